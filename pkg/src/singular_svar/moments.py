"""Second moments of (possibly singular) VAR processes.

Population autocovariances come from the companion-form Lyapunov equation
``G = F G F' + Q``.  ``G`` is exactly the block-Toeplitz matrix ``Gamma_p``
whose ``(i, j)`` block is ``gamma(j - i)``, with ``gamma(-s) = gamma(s)'``.
Higher lags follow from ``gamma(s) = sum_i Abar_i gamma(s - i)``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from . import matrixcore as mc
from .errors import HorizonTooShort, DimensionTooLarge, NotStabilized, ShapeMismatch, Unstable
from .model import SvarModel, is_stable, sigma_u

MAX_DENSE_NP = 60


@dataclass(frozen=True, eq=False)
class CovarianceSequence:
    """``gamma(0), ..., gamma(h)`` with ``gamma(s) = E y_t y_{t-s}'``."""

    gammas: tuple

    def __post_init__(self):
        gs = tuple(mc.as_matrix(g, f"gamma({k})") for k, g in enumerate(self.gammas))
        if not gs:
            raise ShapeMismatch("need at least gamma(0)")
        n = gs[0].shape[0]
        for k, g in enumerate(gs):
            if g.shape != (n, n):
                raise ShapeMismatch(f"gamma({k}) has shape {g.shape}, expected {(n, n)}")
        object.__setattr__(self, "gammas", gs)

    @property
    def n(self) -> int:
        return self.gammas[0].shape[0]

    @property
    def horizon(self) -> int:
        return len(self.gammas) - 1

    def gamma(self, s: int) -> np.ndarray:
        if abs(s) > self.horizon:
            raise HorizonTooShort(f"lag {s} beyond horizon {self.horizon}")
        return self.gammas[s] if s >= 0 else self.gammas[-s].T

    def block_toeplitz(self, r: int) -> np.ndarray:
        """``Gamma_r`` (``nr x nr``) with block ``(i, j)`` equal to ``gamma(j - i)``."""
        if r < 1:
            raise ValueError("r must be >= 1")
        if r - 1 > self.horizon:
            raise HorizonTooShort(f"Gamma_{r} needs gamma up to lag {r - 1}, horizon is {self.horizon}")
        return np.block([[self.gamma(j - i) for j in range(r)] for i in range(r)])

    def to_dict(self) -> dict:
        return {"n": self.n, "h": self.horizon, "gammas": [g.tolist() for g in self.gammas]}

    @classmethod
    def from_dict(cls, doc) -> "CovarianceSequence":
        cov = cls(tuple(np.array(g, dtype=float) for g in doc["gammas"]))
        if "n" in doc and int(doc["n"]) != cov.n:
            raise ShapeMismatch(f"declared n={doc['n']} but matrices are {cov.n}x{cov.n}")
        if "h" in doc and int(doc["h"]) != cov.horizon:
            raise ShapeMismatch(f"declared h={doc['h']} but {len(cov.gammas)} matrices given")
        return cov


def _lyapunov_dense(f: np.ndarray, qm: np.ndarray) -> np.ndarray:
    k = f.shape[0]
    lhs = np.eye(k * k) - np.kron(f, f)
    return mc.unvec(np.linalg.solve(lhs, mc.vec(qm)), k, k)


def _lyapunov_doubling(f: np.ndarray, qm: np.ndarray, max_iter: int = 100) -> np.ndarray:
    g, a = qm.copy(), f.copy()
    for _ in range(max_iter):
        step = a @ g @ a.T
        g = g + step
        a = a @ a
        if np.abs(step).max() <= mc.EPS * np.abs(g).max():
            break
    return g


def autocovariances(
    m: SvarModel,
    h: int,
    method: str = "dense",
    max_np: int = MAX_DENSE_NP,
    margin: Optional[float] = None,
) -> CovarianceSequence:
    """Population autocovariances of the stationary solution up to lag ``h``.

    ``method="dense"`` solves the vectorized Lyapunov equation and is capped
    at ``np <= max_np``; ``method="doubling"`` iterates the doubling
    recursion and has no cap.
    """
    rep = is_stable(m) if margin is None else is_stable(m, margin)
    if not rep.stable:
        raise Unstable(f"spectral radius {rep.spectral_radius:.6g} is not inside the unit circle")
    n, p = m.n, m.p
    f = m.companion()
    qm = np.zeros((n * p, n * p))
    qm[:n, :n] = sigma_u(m)
    if method == "dense":
        if n * p > max_np:
            raise DimensionTooLarge(f"np={n * p} exceeds the dense cap {max_np}; use method='doubling'")
        g = _lyapunov_dense(f, qm)
    elif method == "doubling":
        g = _lyapunov_doubling(f, qm)
    else:
        raise ValueError(f"unknown method {method!r}")
    g = 0.5 * (g + g.T)

    gammas = [g[:n, k * n:(k + 1) * n] for k in range(min(p, h + 1))]
    abar = m.reduced_a_plus
    for s in range(p, h + 1):
        acc = np.zeros((n, n))
        for i in range(1, p + 1):
            prev = gammas[s - i] if s - i >= 0 else gammas[i - s].T
            acc += abar[:, (i - 1) * n:i * n] @ prev
        gammas.append(acc)
    return CovarianceSequence(tuple(gammas[: h + 1]))


def lyapunov_residual(m: SvarModel, cov: CovarianceSequence) -> float:
    """``||G - F G F' - Q|| / ||G||`` for the companion Gram matrix."""
    g = cov.block_toeplitz(m.p)
    f = m.companion()
    qm = np.zeros_like(g)
    qm[:m.n, :m.n] = sigma_u(m)
    return float(np.linalg.norm(g - f @ g @ f.T - qm) / max(np.linalg.norm(g), 1e-300))


# ---------------------------------------------------------------------------
# Yule-Walker system
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ToeplitzSystem:
    """The YW system ``Abar+ Gamma_p = gamma_p`` for a fixed lag order ``p``.

    ``sigma_u``, ``left_kernel_L`` and the rank deficiency ``s`` are computed
    on first access.  ``q`` may be given to fix the rank of ``Sigma_u`` when
    picking ``L``; otherwise the rank is decided by ``tol``.  With
    ``check_consistency=False`` the min-norm projection behind ``sigma_u``
    is used even when ``gamma_p`` leaves the image of ``Gamma_p``.
    """

    n: int
    p: int
    gamma_p_block: np.ndarray
    gamma_p_row: np.ndarray
    gamma0: np.ndarray
    tol: mc.Tol = mc.DEFAULT_TOL
    q: Optional[int] = None
    check_consistency: bool = True

    def __post_init__(self):
        n, p = self.n, self.p
        gp = mc.as_matrix(self.gamma_p_block, "Gamma_p")
        row = mc.as_matrix(self.gamma_p_row, "gamma_p")
        g0 = mc.as_matrix(self.gamma0, "gamma(0)")
        if gp.shape != (n * p, n * p) or row.shape != (n, n * p) or g0.shape != (n, n):
            raise ShapeMismatch(
                f"inconsistent shapes: Gamma_p {gp.shape}, gamma_p {row.shape}, gamma(0) {g0.shape} for n={n}, p={p}"
            )
        object.__setattr__(self, "gamma_p_block", gp)
        object.__setattr__(self, "gamma_p_row", row)
        object.__setattr__(self, "gamma0", g0)

    @classmethod
    def from_blocks(cls, gamma_p_block, gamma_p_row, n: int, gamma0=None,
                    tol: mc.TolLike = None, q: Optional[int] = None) -> "ToeplitzSystem":
        """Build directly from raw matrices (e.g. a hand-made singular ``Gamma_p``)."""
        gp = np.asarray(gamma_p_block, dtype=float)
        p = gp.shape[0] // n
        g0 = gp[:n, :n] if gamma0 is None else gamma0
        return cls(n, p, gp, gamma_p_row, g0, mc.as_tol(tol), q)

    @cached_property
    def svd(self) -> mc.SvdFactors:
        return mc.svd_with_tol(self.gamma_p_block, self.tol)

    @property
    def rank(self) -> int:
        return self.svd.rank

    @property
    def s(self) -> int:
        """Rank deficiency ``np - rank(Gamma_p)``."""
        return self.n * self.p - self.rank

    @cached_property
    def sigma_u(self) -> np.ndarray:
        from .yulewalker import min_norm_solution, sigma_from_solution

        return sigma_from_solution(self, min_norm_solution(self, check=self.check_consistency))

    @cached_property
    def sigma_u_svd(self) -> mc.SvdFactors:
        return mc.svd_with_tol(self.sigma_u, self.tol)

    @property
    def q_effective(self) -> int:
        return self.q if self.q is not None else self.sigma_u_svd.rank

    @cached_property
    def left_kernel_L(self) -> np.ndarray:
        """Orthonormal rows spanning the left kernel of ``Sigma_u``."""
        if self.q is None:
            return self.sigma_u_svd.u_null.T
        u, _, _ = np.linalg.svd(self.sigma_u)
        return mc._canonical_sign(u[:, self.q:]).T


def build_toeplitz(cov: CovarianceSequence, p: int, tol: mc.TolLike = None,
                   q: Optional[int] = None, check_consistency: bool = True) -> ToeplitzSystem:
    if cov.horizon < p:
        raise HorizonTooShort(f"YW system of order {p} needs horizon >= {p}, got {cov.horizon}")
    row = np.hstack([cov.gamma(k) for k in range(1, p + 1)])
    return ToeplitzSystem(cov.n, p, cov.block_toeplitz(p), row, cov.gamma(0), mc.as_tol(tol), q,
                          check_consistency)


# ---------------------------------------------------------------------------
# Structure detection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StructureEstimate:
    p_hat: int
    q_hat: int
    L_hat: np.ndarray
    rank_profile: tuple
    tol: mc.Tol
    non_unique: bool = False
    notes: tuple = ()


def sample_rank_tol(cov: CovarianceSequence, r_max: int, factor: float = 1e-5) -> mc.Tol:
    """Absolute cutoff ``factor * sigma_max(Gamma_rmax)`` for sample covariances.

    Sample Toeplitz matrices built from ``1/T`` autocovariances are not exact
    Gram matrices, so exact rank deficiencies show up as singular values of
    order ``1/T`` relative to the largest one.  The default dimension-scaled
    policy is meant for population inputs; this one keeps a fixed relative
    gap that suits ``T`` around ``1e5``.
    """
    smax = np.linalg.norm(cov.block_toeplitz(r_max), 2)
    return mc.Tol(absolute=factor * smax)


def rank_profile(cov: CovarianceSequence, r_max: int, tol: mc.TolLike = None) -> list[tuple[int, int]]:
    return [(r, mc.rank(cov.block_toeplitz(r), tol)) for r in range(1, r_max + 1)]


def detect_structure(cov: CovarianceSequence, r_max: int, tol: mc.TolLike = None,
                     k_stab: int = 2) -> StructureEstimate:
    """Recover ``(p, q, L)`` from the ranks of ``Gamma_1, ..., Gamma_rmax``.

    ``q_hat`` is the final rank increment, accepted only if the last
    ``k_stab`` increments agree.  ``p_hat`` is the smallest ``r`` from which
    every later increment equals ``q_hat``.
    """
    policy = mc.as_tol(tol)
    if cov.horizon < r_max - 1:
        raise HorizonTooShort(f"r_max={r_max} needs horizon >= {r_max - 1}, got {cov.horizon}")
    if r_max < k_stab + 1:
        raise ValueError(f"r_max must be at least k_stab + 1 = {k_stab + 1}")
    profile = rank_profile(cov, r_max, policy)
    ranks = [rk for _, rk in profile]
    inc = [ranks[i + 1] - ranks[i] for i in range(len(ranks) - 1)]
    tail = inc[-k_stab:]
    if len(set(tail)) != 1:
        raise NotStabilized(f"rank increments {inc} have not settled by r_max={r_max}")
    q_hat = tail[-1]
    p_hat = len(inc)
    while p_hat > 1 and inc[p_hat - 2] == q_hat:
        p_hat -= 1
    notes = []
    non_unique = False
    if q_hat == cov.n:
        non_unique = True
        notes.append("full-rank increments: the rank profile carries no information about p")
    if q_hat == 0:
        raise NotStabilized("zero rank increments: covariances are degenerate")
    if len(inc) - (p_hat - 1) < k_stab:
        non_unique = True
        notes.append("stabilization observed over fewer than k_stab increments after p_hat")
    # L only needs the projection, so noisy sample inputs must not raise here
    ts = build_toeplitz(cov, p_hat, policy, q=q_hat, check_consistency=False)
    return StructureEstimate(p_hat, q_hat, ts.left_kernel_L, tuple(profile), policy, non_unique, tuple(notes))


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SamplePath:
    y: np.ndarray
    eps: np.ndarray
    seed: Optional[int]
    burn_in: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"y{i + 1}" for i in range(self.y.shape[1])])
        for row in self.y:
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def simulate(m: SvarModel, T: int, seed: Optional[int] = None, block: int = 32) -> SamplePath:
    """Draw a path of length ``T`` after a burn-in of ``10 * n * p`` steps.

    Shocks are standard normal; the recursion starts from a zero state.  The
    recursion is evaluated ``block`` steps at a time: inside a block the
    response to the block's own shocks is a finite convolution with the
    impulse responses ``F^d G``, and only the companion state is carried
    sequentially from block to block.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if not is_stable(m).stable:
        raise Unstable("cannot simulate an unstable model")
    n, p, q = m.n, m.p, m.q
    burn = 10 * n * p
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((burn + T, q))
    f = m.companion()
    g = np.zeros((n * p, q))
    g[:n] = m.reduced_b
    total = burn + T
    k = max(1, min(block, total))
    nblocks = -(-total // k)
    e = np.zeros((nblocks * k, q))
    e[:total] = eps
    e = e.reshape(nblocks, k, q)
    # powers[d] = F^d for d = 0..k
    powers = [np.eye(n * p)]
    for _ in range(k):
        powers.append(f @ powers[-1])
    # within-block state responses: x_j = sum_{i<=j} F^{j-i} G e_i
    states = np.zeros((nblocks, k, n * p))
    for d in range(k):
        states[:, d:] += e[:, :k - d] @ (powers[d] @ g).T
    # carry the state across blocks: x_{b, j} += F^{j+1} x_{b-1, k-1}
    carry = np.zeros(n * p)
    lead = np.stack([powers[j + 1] for j in range(k)])  # (k, np, np)
    y = np.empty((nblocks, k, n))
    for b in range(nblocks):
        full = states[b] + lead @ carry
        y[b] = full[:, :n]
        carry = full[-1]
    y = y.reshape(-1, n)[:total]
    return SamplePath(y[burn:], eps[burn:], seed, burn)


def sample_autocovariances(y, h: int, demean: bool = False) -> CovarianceSequence:
    """Biased (``1/T``) sample autocovariances; the result is positive semidefinite."""
    y = np.asarray(y, dtype=float)
    if demean:
        y = y - y.mean(axis=0)
    T = y.shape[0]
    if h >= T:
        raise HorizonTooShort(f"horizon {h} needs more than {T} observations")
    return CovarianceSequence(tuple(y[s:].T @ y[:T - s] / T for s in range(h + 1)))
