"""Exact-shape matrix constructions and tolerance-aware SVD primitives.

Everything here works on plain ``numpy.ndarray`` values.  The vec operator is
column-major (Fortran order) throughout the package: ``vec(A)`` stacks the
columns of ``A``.  ``vech(A)`` stacks the on-and-below-diagonal part of each
column, again column by column.

Rank decisions are always made through a :class:`Tol` policy so that callers
can see and override the cutoff.  The default cutoff is
``eps * sigma_max * max(rows, cols)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import NonFinite, ShapeMismatch

EPS = float(np.finfo(np.float64).eps)


@dataclass(frozen=True)
class Tol:
    """Rank cutoff policy.

    Exactly one of ``absolute`` / ``relative`` is used.  With ``absolute`` the
    cutoff is that number.  Otherwise the cutoff is
    ``relative * sigma_max * max(rows, cols)`` where ``relative`` defaults to
    machine epsilon.
    """

    absolute: Optional[float] = None
    relative: Optional[float] = None

    def __post_init__(self):
        if self.absolute is not None and self.relative is not None:
            raise ValueError("give either an absolute or a relative tolerance, not both")
        for v in (self.absolute, self.relative):
            if v is not None and not (v >= 0 and np.isfinite(v)):
                raise ValueError(f"tolerance must be finite and >= 0, got {v}")

    def cutoff(self, sigma_max: float, shape: tuple[int, int]) -> float:
        if self.absolute is not None:
            return float(self.absolute)
        factor = EPS if self.relative is None else self.relative
        return float(factor * sigma_max * max(shape))

    def to_dict(self) -> dict:
        if self.absolute is not None:
            return {"kind": "absolute", "value": self.absolute}
        return {"kind": "relative", "value": EPS if self.relative is None else self.relative}


TolLike = Union[Tol, float, None]
DEFAULT_TOL = Tol()


def as_tol(tol: TolLike) -> Tol:
    """Coerce ``None`` (default policy) or a bare float (absolute cutoff)."""
    if tol is None:
        return DEFAULT_TOL
    if isinstance(tol, Tol):
        return tol
    return Tol(absolute=float(tol))


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ShapeMismatch(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFinite(f"{name} contains non-finite entries")
    return arr


# ---------------------------------------------------------------------------
# vec / vech and the structured 0/1 matrices
# ---------------------------------------------------------------------------

def vec(a) -> np.ndarray:
    return np.asarray(a).reshape(-1, order="F")


def unvec(v, rows: int, cols: int) -> np.ndarray:
    return np.asarray(v).reshape((rows, cols), order="F")


def vech(a) -> np.ndarray:
    a = np.asarray(a)
    n = a.shape[0]
    return np.concatenate([a[j:, j] for j in range(n)])


def _vech_index(n: int, i: int, j: int) -> int:
    # position of element (i, j), i >= j, inside vech of an n x n matrix
    return j * n - j * (j - 1) // 2 + (i - j)


def duplication(n: int) -> np.ndarray:
    """The ``n^2 x n(n+1)/2`` 0/1 matrix with ``D vech(S) = vec(S)`` for symmetric S."""
    if n < 1:
        raise ValueError("n must be >= 1")
    d = np.zeros((n * n, n * (n + 1) // 2))
    for j in range(n):
        for i in range(n):
            lo, hi = max(i, j), min(i, j)
            d[j * n + i, _vech_index(n, lo, hi)] = 1.0
    return d


def duplication_pinv(n: int) -> np.ndarray:
    """Moore-Penrose inverse of :func:`duplication`, ``(D'D)^{-1} D'``.

    ``D'D`` is diagonal (1 for diagonal entries, 2 for off-diagonal ones), so
    the inverse is formed exactly rather than through an SVD.
    """
    d = duplication(n)
    return d.T / d.sum(axis=0)[:, None]


def commutation(n: int, m: int) -> np.ndarray:
    """``K_nm`` with ``K_nm vec(B) = vec(B')`` for every ``n x m`` matrix B."""
    if n < 1 or m < 1:
        raise ValueError("dimensions must be >= 1")
    k = np.zeros((n * m, n * m))
    for i in range(n):
        for j in range(m):
            # B[i, j] sits at j*n + i in vec(B) and at i*m + j in vec(B')
            k[i * m + j, j * n + i] = 1.0
    return k


# ---------------------------------------------------------------------------
# SVD with an explicit rank cut
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SvdFactors:
    """Rank-split SVD ``a = u_range @ diag(s[:rank]) @ v_range.T``."""

    u_range: np.ndarray
    u_null: np.ndarray
    singular_values: np.ndarray
    v_range: np.ndarray
    v_null: np.ndarray
    tol: float

    @property
    def rank(self) -> int:
        return self.u_range.shape[1]

    @property
    def retained(self) -> np.ndarray:
        return self.singular_values[: self.rank]


def _canonical_sign(basis: np.ndarray) -> np.ndarray:
    # first clearly nonzero entry of each column made positive
    out = basis.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        nz = np.flatnonzero(np.abs(col) > 1e-10 * max(1.0, np.abs(col).max()))
        if nz.size and col[nz[0]] < 0:
            out[:, k] = -col
    return out


def svd_with_tol(a, tol: TolLike = None) -> SvdFactors:
    a = as_matrix(a)
    m, n = a.shape
    policy = as_tol(tol)
    if m == 0 or n == 0:
        return SvdFactors(
            u_range=np.zeros((m, 0)),
            u_null=np.eye(m),
            singular_values=np.zeros(0),
            v_range=np.zeros((n, 0)),
            v_null=np.eye(n),
            tol=policy.cutoff(0.0, (m, n)),
        )
    u, s, vt = np.linalg.svd(a, full_matrices=True)
    cut = policy.cutoff(s[0] if s.size else 0.0, (m, n))
    r = int(np.sum(s > cut))
    return SvdFactors(
        u_range=u[:, :r],
        u_null=_canonical_sign(u[:, r:]),
        singular_values=s,
        v_range=vt[:r].T,
        v_null=_canonical_sign(vt[r:].T),
        tol=cut,
    )


def rank(a, tol: TolLike = None) -> int:
    return svd_with_tol(a, tol).rank


def kernel_right(a, tol: TolLike = None) -> np.ndarray:
    """Orthonormal basis (as columns) of ``{x : a x = 0}``."""
    return svd_with_tol(a, tol).v_null


def kernel_left(a, tol: TolLike = None) -> np.ndarray:
    """Orthonormal basis (as rows) of ``{y : y a = 0}``."""
    return svd_with_tol(a, tol).u_null.T


def pinv(a, tol: TolLike = None) -> np.ndarray:
    f = svd_with_tol(a, tol)
    return f.v_range @ (f.u_range.T / f.retained[:, None])


def row_projector(b, tol: TolLike = None) -> np.ndarray:
    """Orthogonal projector onto the row span of ``b``."""
    f = svd_with_tol(b, tol)
    return f.v_range @ f.v_range.T


def proj_row(a, b, tol: TolLike = None) -> np.ndarray:
    """Projection of the rows of ``a`` onto the row span of ``b``.

    Equals ``a @ b.T @ pinv(b @ b.T) @ b`` but is formed from the right
    singular vectors of ``b``, which stays well defined when ``b`` is rank
    deficient.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[1]:
        raise ShapeMismatch(f"column counts differ: {a.shape[1]} vs {b.shape[1]}")
    return a @ row_projector(b, tol)


def proj_col(a, d, tol: TolLike = None) -> np.ndarray:
    """Projection of the columns of ``a`` onto the column span of ``d``."""
    a = as_matrix(a, "a")
    d = as_matrix(d, "d")
    if a.shape[0] != d.shape[0]:
        raise ShapeMismatch(f"row counts differ: {a.shape[0]} vs {d.shape[0]}")
    u = svd_with_tol(d, tol).u_range
    return u @ (u.T @ a)


def same_row_space(a, b, tol: float = 1e-8) -> bool:
    """True if two matrices with the same column count span the same rows."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[1]:
        return False
    if rank(a) != rank(b):
        return False
    scale = max(1.0, np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0))
    return bool(
        np.abs(a - proj_row(a, b)).max(initial=0.0) <= tol * scale
        and np.abs(b - proj_row(b, a)).max(initial=0.0) <= tol * scale
    )
