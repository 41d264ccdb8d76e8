"""Solutions of possibly singular Yule-Walker equations.

The vectorized system is ``(I_n kron Gamma_p) vec(A+') = vec(gamma_p')``.  It
splits into ``n`` independent blocks ``Gamma_p a_j = gamma_p[j, :]'``, one per
row ``a_j`` of ``A+``, and all solvers below work block-wise.  Solutions are
returned as flat ``vec(A+')`` vectors; :func:`as_coefficients` reshapes one to
the ``n x np`` block ``A+``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import matrixcore as mc
from .errors import ConstructionFailed, InconsistentSystem
from .model import SvarModel, is_stable
from .moments import ToeplitzSystem, autocovariances, build_toeplitz

CONSISTENCY_RTOL = 1e-8


def as_coefficients(sol: np.ndarray, n: int) -> np.ndarray:
    """``vec(A+')`` -> ``A+`` (``n x np``)."""
    sol = np.asarray(sol)
    return sol.reshape(n, -1)


def as_vec(a_plus: np.ndarray) -> np.ndarray:
    """``A+`` (``n x np``) -> ``vec(A+')``."""
    return np.asarray(a_plus).reshape(-1)


def kron_system(ts: ToeplitzSystem) -> tuple[np.ndarray, np.ndarray]:
    """The full ``(I_n kron Gamma_p, vec(gamma_p'))`` pair."""
    return np.kron(np.eye(ts.n), ts.gamma_p_block), mc.vec(ts.gamma_p_row.T)


def residual(ts: ToeplitzSystem, sol: np.ndarray) -> float:
    """Max-norm residual of the YW equations at ``sol``."""
    a = as_coefficients(sol, ts.n)
    return float(np.abs(a @ ts.gamma_p_block - ts.gamma_p_row).max(initial=0.0))


def sigma_from_solution(ts: ToeplitzSystem, sol: np.ndarray) -> np.ndarray:
    """``gamma(0) - Abar+ gamma_p'``."""
    a = as_coefficients(sol, ts.n)
    s = ts.gamma0 - a @ ts.gamma_p_row.T
    return 0.5 * (s + s.T)


def _check_consistent(ts: ToeplitzSystem) -> None:
    # component of gamma_p' outside the column span of Gamma_p
    off = ts.svd.u_null.T @ ts.gamma_p_row.T
    scale = max(np.abs(ts.gamma_p_row).max(initial=0.0), 1e-300)
    if np.abs(off).max(initial=0.0) > CONSISTENCY_RTOL * scale:
        raise InconsistentSystem(
            f"gamma_p is not in the image of Gamma_p (off-image component {np.abs(off).max():.3g}); "
            "the covariances do not come from a VAR of this order"
        )


def min_norm_solution(ts: ToeplitzSystem, check: bool = True) -> np.ndarray:
    """Solution with zero coordinates along the kernel eigenbasis ``V2``.

    This is the pseudo-inverse solution and has the smallest Euclidean norm
    in the solution set.  With ``check=False`` an inconsistent system (e.g.
    noisy sample covariances) returns the least-squares projection instead
    of raising.
    """
    f = ts.svd
    gp_pinv = f.v_range @ (f.u_range.T / f.retained[:, None])
    a = ts.gamma_p_row @ gp_pinv
    if check:
        _check_consistent(ts)
    return as_vec(a)


@dataclass(frozen=True)
class PivotSelection:
    """0/1 selectors: columns of ``s1`` pick the first independent rows of
    ``Gamma_p``; columns of ``s2`` pick the remaining ``s`` coordinates."""

    s1: np.ndarray
    s2: np.ndarray
    independent: tuple
    dependent: tuple


def pivot_selection(ts: ToeplitzSystem) -> PivotSelection:
    """Greedy top-to-bottom choice of the first linearly independent rows."""
    gp = ts.gamma_p_block
    k = gp.shape[0]
    target = ts.rank
    keep: list[int] = []
    # rank cut must be on the scale of the full matrix, not the partial row set
    cut = mc.Tol(absolute=ts.svd.tol)
    for i in range(k):
        if len(keep) == target:
            break
        if mc.rank(gp[keep + [i]], cut) > len(keep):
            keep.append(i)
    drop = [i for i in range(k) if i not in keep]
    eye = np.eye(k)
    return PivotSelection(eye[:, keep], eye[:, drop], tuple(keep), tuple(drop))


def pivot_solution(ts: ToeplitzSystem) -> tuple[np.ndarray, PivotSelection]:
    """Unique solution with the ``S2' A+'`` coordinates restricted to zero."""
    sel = pivot_selection(ts)
    gp = ts.gamma_p_block
    stacked = np.vstack([gp, sel.s2.T])
    if mc.rank(stacked, mc.Tol(absolute=ts.svd.tol)) < gp.shape[1]:
        raise InconsistentSystem("pivot-restricted YW system is not of full column rank")
    cols = list(sel.independent)
    sub = gp[:, cols]
    coef, *_ = np.linalg.lstsq(sub, ts.gamma_p_row.T, rcond=None)
    a = np.zeros((ts.n, gp.shape[1]))
    a[:, cols] = coef.T
    _check_consistent(ts)
    return as_vec(a), sel


@dataclass(frozen=True, eq=False)
class YwSolutionSet:
    """Affine solution set ``particular + span(kernel_basis)``."""

    particular: np.ndarray
    kernel_basis: np.ndarray
    sigma_u: np.ndarray
    system: ToeplitzSystem

    @property
    def kernel_dim(self) -> int:
        return self.kernel_basis.shape[1]

    def member(self, coords) -> np.ndarray:
        return self.particular + self.kernel_basis @ np.asarray(coords, dtype=float)


def solution_set(ts: ToeplitzSystem) -> YwSolutionSet:
    part = min_norm_solution(ts)
    kernel = np.kron(np.eye(ts.n), ts.svd.v_null)
    return YwSolutionSet(part, kernel, sigma_from_solution(ts, part), ts)


def same_projection(ts: ToeplitzSystem, sol_a: np.ndarray, sol_b: np.ndarray,
                    rtol: float = 1e-9) -> bool:
    """True iff the two coefficient vectors differ by an element of the kernel
    of ``I_n kron Gamma_p``, i.e. they define the same linear projection."""
    d = as_coefficients(np.asarray(sol_a) - np.asarray(sol_b), ts.n)
    scale = np.linalg.norm(ts.gamma_p_block, 2) * max(1.0, np.abs(sol_a).max(), np.abs(sol_b).max())
    return bool(np.abs(d @ ts.gamma_p_block).max(initial=0.0) <= rtol * scale)


# ---------------------------------------------------------------------------
# Observationally equivalent coefficients via U(z) = I + c c' z
# ---------------------------------------------------------------------------

def u_transform(a_plus_bar: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Coefficients of ``(I + c c' z) abar(z)`` when ``c' Abar_p = 0``.

    Lag one becomes ``Abar_1 - c c'`` and lag ``k >= 2`` becomes
    ``Abar_k + c c' Abar_{k-1}``.
    """
    a = np.asarray(a_plus_bar, dtype=float)
    n = a.shape[0]
    p = a.shape[1] // n
    c = np.asarray(c, dtype=float).reshape(n, 1)
    cc = c @ c.T
    lags = [a[:, k * n:(k + 1) * n] for k in range(p)]
    if np.abs(c.T @ lags[-1]).max() > 1e-10 * max(1.0, np.abs(lags[-1]).max()):
        raise ValueError("c' Abar_p must vanish for the product to stay of degree p")
    out = [lags[0] - cc] + [lags[k] + cc @ lags[k - 1] for k in range(1, p)]
    return np.hstack(out)


def common_left_null(m: SvarModel) -> np.ndarray:
    """Unit vector ``c`` with ``c' Abar_p = 0`` and ``c' Bbar = 0`` (if any)."""
    n = m.n
    stacked = np.hstack([m.reduced_a_plus[:, -n:], m.reduced_b])
    ker = mc.kernel_left(stacked)
    if ker.shape[0] == 0:
        raise ValueError("Abar_p and Bbar have no common left null vector")
    return ker[0]


def equivalent_coefficients(m: SvarModel, c: Optional[np.ndarray] = None) -> np.ndarray:
    """A second YW solution for ``m`` built from ``U(z) = I + c c' z``.

    The default ``c`` has norm 0.7 so that ``det(I + c c' z)`` has its root
    at ``z = -1/0.49``, well outside the unit circle.
    """
    if c is None:
        c = 0.7 * common_left_null(m)
    return as_vec(u_transform(m.reduced_a_plus, c))


def degenerate_example(n: int, p: int, seed: Optional[int] = None, q: Optional[int] = None,
                       radius: float = 0.8, max_tries: int = 100) -> SvarModel:
    """Random stable singular VAR whose ``Gamma_p`` is rank deficient.

    A direction ``c`` is drawn and ``Abar_p``, ``Bbar`` are projected so that
    ``c' Abar_p = 0`` and ``c' Bbar = 0``.  Lag ``k`` is scaled by
    ``rho^k`` so the companion spectral radius equals ``radius``.
    """
    if n < 2 or p < 1:
        raise ValueError("need n >= 2 and p >= 1")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        qq = n - 1 if q is None else q
        if not 1 <= qq < n:
            raise ValueError("q must satisfy 1 <= q < n")
        c = rng.standard_normal(n)
        c *= rng.uniform(0.5, 0.9) / np.linalg.norm(c)  # keeps det(I + cc'z) away from the unit circle
        proj = np.eye(n) - np.outer(c, c) / (c @ c)
        lags = [rng.standard_normal((n, n)) for _ in range(p)]
        lags[-1] = proj @ lags[-1]
        b = proj @ rng.standard_normal((n, qq))
        rho = max(np.abs(np.linalg.eigvals(SvarModel.reduced(np.hstack(lags), b).companion())))
        if rho < 1e-6:
            continue
        scale = radius / rho
        lags = [a * scale ** (k + 1) for k, a in enumerate(lags)]
        try:
            m = SvarModel.reduced(np.hstack(lags), b)
        except Exception:
            continue
        if not is_stable(m).stable:
            continue
        ts = build_toeplitz(autocovariances(m, p), p)
        if ts.rank < n * p:
            return m
    raise ConstructionFailed(f"no degenerate stable draw after {max_tries} tries")
