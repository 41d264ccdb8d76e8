"""Structural VAR parameters, restriction sets and basic model queries.

The model is

    A0 y_t = A1 y_{t-1} + ... + Ap y_{t-p} + B eps_t,   eps_t ~ (0, I_q),

with ``B`` of shape ``n x q`` and ``q <= n``.

Index conventions
-----------------
Noise parameters are ``vec((A0, B))`` (column-major, length ``n^2 + nq``):
``A0[i, j]`` lives at ``j*n + i`` and ``B[i, j]`` at ``n^2 + j*n + i``
(0-based).  System parameters are ``vec(A+')`` where ``A+ = (A1, ..., Ap)``
is ``n x np``; since the columns of ``A+'`` are the rows of ``A+``,
``A_l[i, j]`` (lag ``l`` starting at 1) lives at ``i*n*p + (l-1)*n + j``.
Restriction specs given by users use 1-based row/column indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from . import matrixcore as mc
from .errors import (
    ConflictingFix,
    IndexOutOfRange,
    InvalidModel,
    PoleAtZ,
    RankDeficientRestrictions,
    ShapeMismatch,
    SingularA0,
    UnsupportedRestriction,
)

DEFAULT_STABILITY_MARGIN = 1e-8


@dataclass(frozen=True, eq=False)
class SvarModel:
    a0: np.ndarray
    a_plus: tuple
    b: np.ndarray

    def __post_init__(self):
        a0 = mc.as_matrix(self.a0, "A0")
        b = mc.as_matrix(self.b, "B")
        lags = tuple(mc.as_matrix(a, f"A{i + 1}") for i, a in enumerate(self.a_plus))
        n = a0.shape[0]
        if a0.shape != (n, n):
            raise ShapeMismatch(f"A0 must be square, got {a0.shape}")
        if not lags:
            raise InvalidModel("at least one lag matrix is required (p >= 1)")
        for i, a in enumerate(lags):
            if a.shape != (n, n):
                raise ShapeMismatch(f"A{i + 1} has shape {a.shape}, expected {(n, n)}")
        if b.shape[0] != n or not 1 <= b.shape[1] <= n:
            raise ShapeMismatch(f"B must be n x q with 1 <= q <= n, got {b.shape}")
        if mc.rank(a0) < n:
            raise SingularA0("A0 is singular")
        if mc.rank(b) < b.shape[1]:
            raise InvalidModel("B must have full column rank")
        for arr in (a0, b, *lags):
            arr.setflags(write=False)
        object.__setattr__(self, "a0", a0)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "a_plus", lags)

    @property
    def n(self) -> int:
        return self.a0.shape[0]

    @property
    def p(self) -> int:
        return len(self.a_plus)

    @property
    def q(self) -> int:
        return self.b.shape[1]

    @cached_property
    def a0_inv(self) -> np.ndarray:
        return np.linalg.inv(self.a0)

    @cached_property
    def a_plus_block(self) -> np.ndarray:
        """``(A1, ..., Ap)`` as one ``n x np`` matrix."""
        return np.hstack(self.a_plus)

    @cached_property
    def reduced_a_plus(self) -> np.ndarray:
        """Reduced-form coefficients ``A0^{-1} A+`` (``n x np``)."""
        return self.a0_inv @ self.a_plus_block

    @cached_property
    def reduced_b(self) -> np.ndarray:
        return self.a0_inv @ self.b

    def companion(self) -> np.ndarray:
        n, p = self.n, self.p
        f = np.zeros((n * p, n * p))
        f[:n] = self.reduced_a_plus
        f[n:, :-n] = np.eye(n * (p - 1))
        return f

    def vec_noise(self) -> np.ndarray:
        return mc.vec(np.hstack([self.a0, self.b]))

    def vec_system(self) -> np.ndarray:
        return mc.vec(self.a_plus_block.T)

    @classmethod
    def reduced(cls, a_plus_bar: np.ndarray, b_bar: np.ndarray) -> "SvarModel":
        """Model with ``A0 = I`` from an ``n x np`` coefficient block."""
        a_plus_bar = np.asarray(a_plus_bar, dtype=float)
        n = a_plus_bar.shape[0]
        p = a_plus_bar.shape[1] // n
        return cls(np.eye(n), tuple(a_plus_bar[:, k * n:(k + 1) * n] for k in range(p)), b_bar)


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    moduli: np.ndarray
    spectral_radius: float
    margin: float


def is_stable(m: SvarModel, margin: float = DEFAULT_STABILITY_MARGIN) -> StabilityReport:
    """Check that all companion eigenvalues lie strictly inside ``1 - margin``."""
    eig = np.linalg.eigvals(m.companion())
    moduli = np.sort(np.abs(eig))[::-1]
    radius = float(moduli[0]) if moduli.size else 0.0
    return StabilityReport(bool(radius < 1.0 - margin), moduli, radius, margin)


def sigma_u(m: SvarModel) -> np.ndarray:
    """Innovation covariance ``A0^{-1} B B' A0^{-T}``."""
    bb = m.reduced_b
    s = bb @ bb.T
    return 0.5 * (s + s.T)


def lag_polynomial(m: SvarModel, z: complex) -> np.ndarray:
    out = m.a0.astype(complex)
    for k, a in enumerate(m.a_plus, start=1):
        out = out - a * z**k
    return out


def transfer_function_at(m: SvarModel, z: complex) -> np.ndarray:
    """``a(z)^{-1} B`` with ``a(z) = A0 - A1 z - ... - Ap z^p``."""
    az = lag_polynomial(m, z)
    s = np.linalg.svd(az, compute_uv=False)
    if s[-1] <= mc.EPS * s[0] * m.n * 10:
        raise PoleAtZ(f"det a(z) vanishes at z={z}")
    return np.linalg.solve(az, m.b.astype(complex))


# ---------------------------------------------------------------------------
# Restrictions
# ---------------------------------------------------------------------------

class Dims(NamedTuple):
    """Bare ``(n, q, p)``; accepted wherever only model dimensions matter."""

    n: int
    q: int
    p: int


@dataclass(frozen=True, eq=False)
class NoiseRestrictionSet:
    """``C_A0 vec(A0) = c_A0`` and ``C_B vec(B) = c_B``.

    With ``a0_identity`` the structural impact matrix is fixed to ``I_n``;
    only ``B`` is free and ``c_a0`` must have no rows.
    """

    c_a0: np.ndarray
    rhs_a0: np.ndarray
    c_b: np.ndarray
    rhs_b: np.ndarray
    a0_identity: bool = False

    @classmethod
    def empty(cls, n: int, q: int, a0_identity: bool = False) -> "NoiseRestrictionSet":
        return cls(np.zeros((0, n * n)), np.zeros(0), np.zeros((0, n * q)), np.zeros(0), a0_identity)

    @classmethod
    def from_b(cls, c_b, rhs_b, n: int) -> "NoiseRestrictionSet":
        """Restrictions on ``vec(B)`` only, with ``A0 = I`` fixed."""
        c_b = np.atleast_2d(np.asarray(c_b, dtype=float))
        return cls(np.zeros((0, n * n)), np.zeros(0), c_b, np.asarray(rhs_b, dtype=float).ravel(), True)

    @property
    def r_a0(self) -> int:
        return self.c_a0.shape[0]

    @property
    def r_b(self) -> int:
        return self.c_b.shape[0]

    @property
    def r_n(self) -> int:
        return self.r_a0 + self.r_b

    @property
    def c_n(self) -> np.ndarray:
        """Block-diagonal ``diag(C_A0, C_B)``; just ``C_B`` when A0 is fixed."""
        if self.a0_identity:
            return self.c_b
        top = np.hstack([self.c_a0, np.zeros((self.r_a0, self.c_b.shape[1]))])
        bottom = np.hstack([np.zeros((self.r_b, self.c_a0.shape[1])), self.c_b])
        return np.vstack([top, bottom])

    @property
    def rhs_n(self) -> np.ndarray:
        if self.a0_identity:
            return self.rhs_b
        return np.concatenate([self.rhs_a0, self.rhs_b])


@dataclass(frozen=True, eq=False)
class SystemRestrictionSet:
    """``C_S vec(A+') = c_S``."""

    c_s: np.ndarray
    rhs_s: np.ndarray

    @classmethod
    def empty(cls, n: int, p: int) -> "SystemRestrictionSet":
        return cls(np.zeros((0, n * n * p)), np.zeros(0))

    @property
    def r_s(self) -> int:
        return self.c_s.shape[0]

    @cached_property
    def s_a(self) -> np.ndarray:
        """Orthonormal basis of the right kernel of ``C_S``."""
        return mc.kernel_right(self.c_s)

    @property
    def homogeneous(self) -> bool:
        return not np.any(self.rhs_s)


def _parse_target(target: str) -> tuple[str, int]:
    t = target.strip()
    if t in ("A0", "B"):
        return t, 0
    if t.startswith("A") and t[1:].isdigit() and int(t[1:]) >= 1:
        return "A", int(t[1:])
    raise ValueError(f"unknown restriction target {target!r}")


def coordinate(target: str, row: int, col: int, n: int, q: int, p: int) -> tuple[str, int]:
    """Map a 1-based matrix entry to ``(block, position)``.

    ``block`` is ``"A0"``, ``"B"`` or ``"system"``; ``position`` indexes
    ``vec(A0)``, ``vec(B)`` or ``vec(A+')`` respectively.
    """
    kind, lag = _parse_target(target)
    i, j = row - 1, col - 1
    ncols = q if kind == "B" else n
    if not (0 <= i < n and 0 <= j < ncols):
        raise IndexOutOfRange(f"{target}[{row},{col}] outside a {n}x{ncols} matrix")
    if kind == "A0":
        return "A0", j * n + i
    if kind == "B":
        return "B", j * n + i
    if lag > p:
        raise IndexOutOfRange(f"lag {lag} exceeds p={p}")
    return "system", i * n * p + (lag - 1) * n + j


def _parse_coord_key(key: str) -> tuple[str, int, int]:
    # "B[2,1]" -> ("B", 2, 1)
    name, _, rest = key.partition("[")
    if not rest.endswith("]"):
        raise ValueError(f"malformed coordinate {key!r}, expected like 'B[2,1]'")
    r, c = rest[:-1].split(",")
    return name.strip(), int(r), int(c)


def _entry_rows(entry: Mapping[str, Any], n: int, q: int, p: int):
    """Yield ``(block, {position: coef}, rhs, fix_key)`` for one spec entry."""
    if "fix" in entry:
        f = entry["fix"]
        if isinstance(f, Mapping):
            target, row, col, value = f["target"], f["row"], f["col"], f["value"]
        else:
            target, row, col, value = f
        block, pos = coordinate(target, int(row), int(col), n, q, p)
        return block, {pos: 1.0}, float(value), (block, pos)
    if "linear" in entry:
        lin = entry["linear"]
        coefs: dict[int, float] = {}
        blocks = set()
        for key, val in lin["coefficients"].items():
            block, pos = coordinate(*_parse_coord_key(key), n, q, p)
            blocks.add(block)
            coefs[pos] = coefs.get(pos, 0.0) + float(val)
        if len(blocks) != 1:
            raise UnsupportedRestriction(
                "a linear restriction may not mix A0 and B coordinates (C_N is block-diagonal)"
            )
        return blocks.pop(), coefs, float(lin.get("rhs", 0.0)), None
    raise ValueError(f"restriction entry needs a 'fix' or 'linear' key: {entry!r}")


def compile_restrictions(
    spec: Iterable[Mapping[str, Any]],
    m,
    kind: str = "noise",
    a0_identity: bool = False,
    dedupe: bool = False,
    tol: mc.TolLike = None,
):
    """Compile a user restriction list into a restriction set.

    Parameters
    ----------
    spec : iterable of dict
        Entries ``{"fix": {"target": "B", "row": 1, "col": 1, "value": 1.0}}``
        or ``{"linear": {"coefficients": {"B[1,1]": 1, "B[3,1]": 2}, "rhs": 0}}``.
        Targets are ``A0``, ``B`` (noise) or ``A1`` .. ``Ap`` (system).
    m : SvarModel or Dims
        Only ``n``, ``q`` and ``p`` are used.
    kind : {"noise", "system"}
    a0_identity : bool
        Noise only: treat ``A0 = I`` as known, so only ``B`` carries free
        parameters.
    dedupe : bool
        Silently drop an exact repeat of a fix; otherwise any repeat raises
        :class:`ConflictingFix`.
    """
    n, q, p = m.n, m.q, m.p
    sizes = {"A0": n * n, "B": n * q, "system": n * n * p}
    rows: dict[str, list] = {"A0": [], "B": [], "system": []}
    rhs: dict[str, list] = {"A0": [], "B": [], "system": []}
    fixed: dict[tuple, float] = {}
    for entry in spec:
        block, coefs, value, fix_key = _entry_rows(entry, n, q, p)
        if kind == "noise" and block == "system":
            raise ValueError("system coordinate in a noise restriction list")
        if kind == "system" and block != "system":
            raise ValueError("noise coordinate in a system restriction list")
        if a0_identity and block == "A0":
            raise ValueError("A0 is fixed to the identity; it cannot be restricted")
        if fix_key is not None:
            if fix_key in fixed:
                if fixed[fix_key] != value or not dedupe:
                    raise ConflictingFix(f"coordinate {fix_key} fixed more than once")
                continue
            fixed[fix_key] = value
        row = np.zeros(sizes[block])
        for pos, c in coefs.items():
            row[pos] = c
        rows[block].append(row)
        rhs[block].append(value)

    def mat(block):
        return np.array(rows[block]).reshape(len(rows[block]), sizes[block])

    for block in rows:
        if rows[block]:
            c = mat(block)
            if mc.rank(c, tol) < c.shape[0]:
                raise RankDeficientRestrictions(f"{block} restriction rows are linearly dependent")
    if kind == "system":
        return SystemRestrictionSet(mat("system"), np.array(rhs["system"], dtype=float))
    return NoiseRestrictionSet(
        mat("A0"), np.array(rhs["A0"], dtype=float), mat("B"), np.array(rhs["B"], dtype=float), a0_identity
    )


# ---------------------------------------------------------------------------
# JSON model file
# ---------------------------------------------------------------------------

def _rect(name: str, x: Any, shape: Optional[tuple[int, int]] = None) -> np.ndarray:
    if not isinstance(x, (list, tuple)) or not all(isinstance(r, (list, tuple)) for r in x):
        raise ShapeMismatch(f"{name} must be an array of arrays")
    if len({len(r) for r in x}) > 1:
        raise ShapeMismatch(f"{name} is not rectangular")
    arr = np.array(x, dtype=float).reshape(len(x), len(x[0]) if x else 0)
    if shape is not None and arr.shape != shape:
        raise ShapeMismatch(f"{name} has shape {arr.shape}, expected {shape}")
    return arr


@dataclass(frozen=True)
class ModelFile:
    model: SvarModel
    noise: NoiseRestrictionSet
    system: SystemRestrictionSet
    noise_spec: list = field(default_factory=list)
    system_spec: list = field(default_factory=list)


def model_from_dict(doc: Mapping[str, Any]) -> ModelFile:
    n, p, q = int(doc["n"]), int(doc["p"]), int(doc["q"])
    a0 = _rect("A0", doc["A0"], (n, n))
    lags = doc["A"]
    if len(lags) != p:
        raise ShapeMismatch(f"expected {p} lag matrices, got {len(lags)}")
    a_plus = tuple(_rect(f"A{k + 1}", a, (n, n)) for k, a in enumerate(lags))
    b = _rect("B", doc["B"], (n, q))
    m = SvarModel(a0, a_plus, b)
    noise, system = restrictions_from_dict(doc.get("restrictions") or {}, m)
    restr = doc.get("restrictions") or {}
    return ModelFile(m, noise, system, list(restr.get("noise", [])), list(restr.get("system", [])))


def restrictions_from_dict(restr: Mapping[str, Any], m) -> tuple[NoiseRestrictionSet, SystemRestrictionSet]:
    """Compile the ``restrictions`` object of a model or restriction file.

    Besides the ``noise`` and ``system`` entry lists, a raw system matrix may
    be given as ``"system_matrix": {"C": [[...]], "rhs": [...]}``; its rows are
    appended after the compiled entries.
    """
    a0_identity = bool(restr.get("a0_identity", False))
    noise = compile_restrictions(list(restr.get("noise", [])), m, "noise", a0_identity=a0_identity)
    system = compile_restrictions(list(restr.get("system", [])), m, "system")
    raw = restr.get("system_matrix")
    if raw is not None:
        c = _rect("system_matrix.C", raw["C"])
        if c.shape[1] != m.n * m.n * m.p:
            raise ShapeMismatch(f"system_matrix.C needs {m.n * m.n * m.p} columns, got {c.shape[1]}")
        rhs = np.asarray(raw.get("rhs", np.zeros(c.shape[0])), dtype=float).reshape(-1)
        if rhs.shape[0] != c.shape[0]:
            raise ShapeMismatch("system_matrix.rhs length differs from the row count of C")
        c_all = np.vstack([system.c_s, c])
        if mc.rank(c_all) < c_all.shape[0]:
            raise RankDeficientRestrictions("system restriction rows are linearly dependent")
        system = SystemRestrictionSet(c_all, np.concatenate([system.rhs_s, rhs]))
    return noise, system


def model_to_dict(m: SvarModel, noise_spec: Sequence = (), system_spec: Sequence = (),
                  a0_identity: bool = False) -> dict:
    return {
        "n": m.n,
        "p": m.p,
        "q": m.q,
        "A0": m.a0.tolist(),
        "A": [a.tolist() for a in m.a_plus],
        "B": m.b.tolist(),
        "restrictions": {
            "a0_identity": a0_identity,
            "noise": list(noise_spec),
            "system": list(system_spec),
        },
    }
