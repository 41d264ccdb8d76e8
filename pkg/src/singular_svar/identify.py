"""Identifiability checks for singular SVARs.

Noise side: restrictions ``C_N vec((A0, B)) = c_N`` are first checked for
compatibility with the singularity ``L A0^{-1} B = 0`` of ``Sigma_u``, then
local identifiability is decided by the rank of the Jacobian of

    vec(A0, B) -> (vech(A0^{-1} B B' A0^{-T}), C_N vec(A0, B)).

All noise-side results are point-wise: they are evaluated at the candidate
``(A0, B)`` carried by the model and are local by nature.

System side: restrictions ``C_S vec(A+') = 0`` are tested for whether they
restrict the attainable covariance structures (over-identification) and
whether they pin down a unique YW solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import matrixcore as mc
from .model import NoiseRestrictionSet, SvarModel, SystemRestrictionSet, sigma_u
from .moments import ToeplitzSystem
from .yulewalker import kron_system

ORDER_CAVEAT = (
    "the order condition is necessary but not sufficient when Sigma_u is singular: "
    "D_n^+ (B kron I_n) has co-rank q(q-1)/2 even without restrictions"
)
OVERID_TOL = 1e-8
REDUNDANCY_RTOL = 1e-9


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, mc.Tol):
        return x.to_dict()
    if isinstance(x, mc.SvdFactors):
        return {
            "rank": x.rank,
            "tol": x.tol,
            "singular_values": x.singular_values.tolist(),
            "u_range": x.u_range.tolist(),
            "v_null": x.v_null.tolist(),
        }
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    return x


def singularity_kernel(m: SvarModel, L: Optional[np.ndarray] = None) -> np.ndarray:
    """Rows spanning the left kernel of ``Sigma_u`` (``(n-q) x n``).

    The model knows ``q``, so the kernel dimension is taken as ``n - q``
    rather than decided by a tolerance.
    """
    if L is not None:
        return np.atleast_2d(np.asarray(L, dtype=float)).reshape(-1, m.n)
    u, _, _ = np.linalg.svd(sigma_u(m))
    return mc._canonical_sign(u[:, m.q:]).T


def _check_a0(m: SvarModel, r: NoiseRestrictionSet) -> None:
    if r.a0_identity and not np.allclose(m.a0, np.eye(m.n), atol=1e-12):
        raise ValueError("restriction set treats A0 as the identity but the model's A0 differs")


def n_script(m: SvarModel, r: NoiseRestrictionSet, L: Optional[np.ndarray] = None) -> np.ndarray:
    """``[(A0^{-1}B)', I_q] kron L A0^{-1}``, or ``I_q kron L`` when A0 = I is fixed."""
    L = singularity_kernel(m, L)
    if r.a0_identity:
        return np.kron(np.eye(m.q), L)
    left = np.hstack([m.reduced_b.T, np.eye(m.q)])
    return np.kron(left, L @ m.a0_inv)


DERIVED_SAFETY = 100.0


def _joint_cutoff(tol: mc.TolLike, c_n: np.ndarray, rhs: np.ndarray, shape: tuple) -> mc.Tol:
    """One absolute cutoff for both ``M`` and ``[M | c_N]``.

    ``M`` comes out of a projection, so its rounding noise is of order
    ``eps * ||C_N||`` rather than ``eps * sigma_max(M)``.  The default cutoff
    is therefore scaled by the inputs (with a safety factor), and the same
    number is used for both ranks so they are comparable.
    """
    policy = mc.as_tol(tol)
    if policy.absolute is not None:
        return policy
    factor = mc.EPS * DERIVED_SAFETY if policy.relative is None else policy.relative
    scale = max(np.linalg.norm(c_n, 2) if c_n.size else 0.0, float(np.linalg.norm(rhs)))
    return mc.Tol(absolute=factor * scale * max(shape))


@dataclass(frozen=True)
class Compatibility:
    m_matrix: np.ndarray
    compatible: bool
    rank_m: int
    rank_augmented: int
    lstsq_residual: float
    warnings: tuple = ()


def check_compatibility(m: SvarModel, r: NoiseRestrictionSet, tol: mc.TolLike = None,
                        L: Optional[np.ndarray] = None) -> Compatibility:
    """Are the noise restrictions consistent with ``L A0^{-1} B = 0``?

    Decided by ``rank(M) == rank([M | c_N])`` with
    ``M = C_N - Proj_R(C_N | N)``.  A least-squares residual of ``M x = c_N``
    is computed alongside and any disagreement is reported as a warning.
    """
    _check_a0(m, r)
    warnings = []
    if m.q == m.n:
        warnings.append("q = n: Sigma_u is nonsingular, compatibility holds trivially")
    c_n, rhs = r.c_n, r.rhs_n
    nn = n_script(m, r, L)
    mm = c_n - mc.proj_row(c_n, nn, tol) if c_n.shape[0] else c_n
    aug = np.hstack([mm, rhs.reshape(-1, 1)])
    cut = _joint_cutoff(tol, c_n, rhs, aug.shape)
    rank_m = mc.rank(mm, cut)
    rank_aug = mc.rank(aug, cut)
    compatible = rank_m == rank_aug
    if mm.shape[0]:
        x, *_ = np.linalg.lstsq(mm, rhs, rcond=None)
        res = float(np.abs(mm @ x - rhs).max() / max(1.0, np.abs(rhs).max()))
        if (res <= 1e-8) != compatible:
            warnings.append(
                f"rank test and least-squares residual ({res:.3g}) disagree; the verdict is near tolerance"
            )
    else:
        res = 0.0
    return Compatibility(mm, compatible, rank_m, rank_aug, res, tuple(warnings))


def noise_jacobian(m: SvarModel, r: NoiseRestrictionSet) -> np.ndarray:
    """Stacked Jacobian of the covariance and restriction equations."""
    n, q = m.n, m.q
    dp = mc.duplication_pinv(n)
    if r.a0_identity:
        top = 2 * dp @ np.kron(m.b, np.eye(n))
        return np.vstack([top, r.c_b])
    ainv = m.a0_inv
    d_a0 = -2 * dp @ np.kron(sigma_u(m), ainv)
    d_b = 2 * dp @ np.kron(ainv @ m.b, ainv)
    rows = [np.hstack([d_a0, d_b])]
    if r.r_a0:
        rows.append(np.hstack([r.c_a0, np.zeros((r.r_a0, n * q))]))
    if r.r_b:
        rows.append(np.hstack([np.zeros((r.r_b, n * n)), r.c_b]))
    return np.vstack(rows)


def covariance_map(m: SvarModel, vec_noise: np.ndarray, a0_identity: bool = False) -> np.ndarray:
    """``vech(A0^{-1} B B' A0^{-T})`` as a function of the free noise coordinates."""
    n, q = m.n, m.q
    if a0_identity:
        a0, b = np.eye(n), mc.unvec(vec_noise, n, q)
    else:
        a0 = mc.unvec(vec_noise[: n * n], n, n)
        b = mc.unvec(vec_noise[n * n:], n, q)
    ab = np.linalg.solve(a0, b)
    return mc.vech(ab @ ab.T)


def parameter_count(m: SvarModel, r: NoiseRestrictionSet) -> int:
    return m.n * m.q if r.a0_identity else m.n * m.n + m.n * m.q


def check_order_condition(m: SvarModel, r: NoiseRestrictionSet) -> tuple[bool, str]:
    """Row count of the stacked Jacobian against its column count."""
    rows = m.n * (m.n + 1) // 2 + r.r_n
    return rows >= parameter_count(m, r), ORDER_CAVEAT


def diagnose_redundancy(m: SvarModel, r: NoiseRestrictionSet, L: Optional[np.ndarray] = None,
                        rtol: float = REDUNDANCY_RTOL) -> list[int]:
    """Rows of ``C_B`` already implied by the singularity of ``Sigma_u``.

    A row is flagged when it lies in the row span of ``I_q kron L A0^{-1}``.
    """
    if not r.r_b:
        return []
    L = singularity_kernel(m, L)
    if L.shape[0] == 0:
        return []
    span = np.kron(np.eye(m.q), L @ m.a0_inv)
    resid = r.c_b - mc.proj_row(r.c_b, span)
    norms = np.linalg.norm(r.c_b, axis=1)
    return [i for i in range(r.r_b) if np.linalg.norm(resid[i]) <= rtol * max(norms[i], 1e-300)]


def singularity_rank_comparison(m: SvarModel, r: NoiseRestrictionSet, tol: mc.TolLike = None,
                                L: Optional[np.ndarray] = None) -> tuple[int, int]:
    """Ranks of the Jacobian with and without the ``I_q kron L`` rows appended."""
    jac = noise_jacobian(m, r)
    extra = np.kron(np.eye(m.q), singularity_kernel(m, L) @ m.a0_inv)
    if not r.a0_identity:
        extra = np.hstack([np.zeros((extra.shape[0], m.n * m.n)), extra])
    return mc.rank(np.vstack([jac, extra]), tol), mc.rank(jac, tol)


@dataclass(frozen=True)
class NoiseIdentReport:
    n_script: np.ndarray
    m_matrix: np.ndarray
    compatible: bool
    rank_m: int
    rank_m_augmented: int
    jacobian: np.ndarray
    jacobian_rank: int
    target_rank: int
    locally_identified: bool
    redundant_rows: list
    order_condition_met: bool
    order_caveat: str
    sigma_u: np.ndarray
    L: np.ndarray
    tol: mc.Tol
    a0_identity: bool
    warnings: tuple = ()

    def to_dict(self) -> dict:
        return _jsonable({
            "kind": "noise",
            "a0_identity": self.a0_identity,
            "compatible": self.compatible,
            "rank_m": self.rank_m,
            "rank_m_augmented": self.rank_m_augmented,
            "jacobian_rank": self.jacobian_rank,
            "target_rank": self.target_rank,
            "locally_identified": self.locally_identified,
            "redundant_rows": self.redundant_rows,
            "order_condition_met": self.order_condition_met,
            "order_caveat": self.order_caveat,
            "tol": self.tol,
            "warnings": list(self.warnings),
            "n_script": self.n_script,
            "m_matrix": self.m_matrix,
            "jacobian": self.jacobian,
            "sigma_u": self.sigma_u,
            "L": self.L,
        })

    def summary(self) -> str:
        return noise_summary(self.to_dict())


def _flag(v) -> str:
    return "n/a" if v is None else str(bool(v)).lower()


def noise_summary(doc: dict) -> str:
    """Text summary of a serialized :class:`NoiseIdentReport`."""
    lines = [
        f"compatible: {_flag(doc['compatible'])}",
        f"rank M: {doc['rank_m']}, rank [M | c_N]: {doc['rank_m_augmented']}",
        f"jacobian rank: {doc['jacobian_rank']}/{doc['target_rank']}",
        f"locally identified: {_flag(doc['locally_identified'])}",
        f"order condition met: {_flag(doc['order_condition_met'])} (caveat: {doc['order_caveat']})",
        f"redundant restriction rows: {doc['redundant_rows'] or 'none'}",
    ]
    lines += [f"warning: {w}" for w in doc["warnings"]]
    return "\n".join(lines)


def check_local_identifiability(m: SvarModel, r: NoiseRestrictionSet, tol: mc.TolLike = None,
                                L: Optional[np.ndarray] = None) -> NoiseIdentReport:
    """Compatibility plus the Jacobian rank condition at the model's ``(A0, B)``.

    The Jacobian is always computed; ``locally_identified`` additionally
    requires compatibility.
    """
    policy = mc.as_tol(tol)
    comp = check_compatibility(m, r, policy, L)
    jac = noise_jacobian(m, r)
    jrank = mc.rank(jac, policy)
    target = parameter_count(m, r)
    met, caveat = check_order_condition(m, r)
    return NoiseIdentReport(
        n_script=n_script(m, r, L),
        m_matrix=comp.m_matrix,
        compatible=comp.compatible,
        rank_m=comp.rank_m,
        rank_m_augmented=comp.rank_augmented,
        jacobian=jac,
        jacobian_rank=jrank,
        target_rank=target,
        locally_identified=bool(comp.compatible and jrank == target),
        redundant_rows=diagnose_redundancy(m, r, L),
        order_condition_met=met,
        order_caveat=caveat,
        sigma_u=sigma_u(m),
        L=singularity_kernel(m, L),
        tol=policy,
        a0_identity=r.a0_identity,
        warnings=comp.warnings,
    )


# ---------------------------------------------------------------------------
# System restrictions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemIdentReport:
    svd_tilde: mc.SvdFactors
    overid_residual: float
    not_overidentifying: Optional[bool]
    unique_solution: bool
    kernel_dim: int
    rank_deficiency: int
    r_s: int
    restricted_solution: Optional[np.ndarray] = None
    restricted_residual: Optional[float] = None
    messages: tuple = ()

    def to_dict(self) -> dict:
        return _jsonable({
            "kind": "system",
            "not_overidentifying": self.not_overidentifying,
            "overidentifying": None if self.not_overidentifying is None else not self.not_overidentifying,
            "unique_solution": self.unique_solution,
            "overid_residual": self.overid_residual,
            "kernel_dim": self.kernel_dim,
            "rank_deficiency": self.rank_deficiency,
            "r_s": self.r_s,
            "restricted_solution": self.restricted_solution,
            "restricted_residual": self.restricted_residual,
            "messages": list(self.messages),
            "svd_tilde": self.svd_tilde,
        })

    def summary(self) -> str:
        return system_summary(self.to_dict())


def system_summary(doc: dict) -> str:
    """Text summary of a serialized :class:`SystemIdentReport`."""
    lines = [
        f"unique: {_flag(doc['unique_solution'])}, over-identifying: {_flag(doc['overidentifying'])}",
        f"over-identification residual: {doc['overid_residual']:.3g}",
        f"restrictions: {doc['r_s']}, rank deficiency of I_n kron Gamma_p: {doc['rank_deficiency']}",
    ]
    lines += [f"note: {msg}" for msg in doc["messages"]]
    return "\n".join(lines)


def check_system_restrictions(ts: ToeplitzSystem, r: SystemRestrictionSet, tol: mc.TolLike = None,
                              overid_tol: float = OVERID_TOL) -> SystemIdentReport:
    """Over-identification and uniqueness verdicts for ``C_S vec(A+') = c_S``.

    Not over-identifying iff ``(I - U1 U1') (I_n kron V1) = 0`` where ``U1``
    spans the column space of ``(I_n kron Gamma_p) S_A``.  The solution is
    unique iff that matrix has a trivial right kernel.  The over-identification
    test is only defined for homogeneous restrictions.
    """
    n, p = ts.n, ts.p
    g, rhs = kron_system(ts)
    if r.c_s.shape[1] != g.shape[1]:
        raise ValueError(f"C_S has {r.c_s.shape[1]} columns, expected n^2 p = {g.shape[1]}")
    v1 = np.kron(np.eye(n), ts.svd.v_range)
    gs = g @ r.s_a
    tilde = mc.svd_with_tol(gs, tol)
    u1 = tilde.u_range
    resid = float(np.abs(v1 - u1 @ (u1.T @ v1)).max(initial=0.0))
    messages = []
    if r.homogeneous:
        not_over = resid <= overid_tol
    else:
        not_over = None
        messages.append("over-identification is only defined for C_S vec(A+') = 0; c_S is nonzero")
    unique = tilde.v_null.shape[1] == 0
    sol = res = None
    if unique:
        stacked = np.vstack([g, r.c_s])
        sol, *_ = np.linalg.lstsq(stacked, np.concatenate([rhs, r.rhs_s]), rcond=None)
        res = float(np.abs(g @ sol - rhs).max(initial=0.0))
    return SystemIdentReport(
        svd_tilde=tilde,
        overid_residual=resid,
        not_overidentifying=not_over,
        unique_solution=unique,
        kernel_dim=tilde.v_null.shape[1],
        rank_deficiency=n * ts.s,
        r_s=r.r_s,
        restricted_solution=sol,
        restricted_residual=res,
        messages=tuple(messages),
    )


def map_system_restrictions(m: SvarModel, r: SystemRestrictionSet) -> SystemRestrictionSet:
    """Restrictions on ``vec(A+')`` re-expressed on ``vec(Abar+')``: ``C_S (A0 kron I_np)``."""
    return SystemRestrictionSet(r.c_s @ np.kron(m.a0, np.eye(m.n * m.p)), r.rhs_s.copy())


@dataclass(frozen=True)
class GenericityResult:
    fraction: float
    verdicts: tuple
    trials: int
    seed: Optional[int]

    def to_dict(self) -> dict:
        return {"fraction": self.fraction, "trials": self.trials, "seed": self.seed,
                "verdicts": [bool(v) for v in self.verdicts]}


def genericity_trial(ts: ToeplitzSystem, trials: int, seed: Optional[int] = None,
                     extra: Sequence[np.ndarray] = (), tol: mc.TolLike = None) -> GenericityResult:
    """Fraction of random ``ns x n^2 p`` Gaussian restriction matrices that
    yield a unique YW solution.

    Each trial draws from its own child of ``SeedSequence(seed)``, so the
    verdicts do not depend on evaluation order.  Matrices in ``extra`` are
    evaluated after the random draws and count as trials.
    """
    if trials < 0:
        raise ValueError("trials must be >= 0")
    if trials == 0 and not extra:
        raise ValueError("no trials requested; the fraction is undefined")
    if ts.s == 0:
        raise ValueError("Gamma_p is nonsingular; there is nothing to restrict")
    rows, cols = ts.n * ts.s, ts.n * ts.n * ts.p
    children = np.random.SeedSequence(seed).spawn(trials)
    mats = [np.random.default_rng(c).standard_normal((rows, cols)) for c in children]
    mats += [np.asarray(e, dtype=float) for e in extra]
    verdicts = []
    for c_s in mats:
        rep = check_system_restrictions(ts, SystemRestrictionSet(c_s, np.zeros(c_s.shape[0])), tol)
        verdicts.append(bool(rep.unique_solution))
    return GenericityResult(float(np.mean(verdicts)), tuple(verdicts), trials, seed)
