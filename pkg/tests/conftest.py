"""Shared model generators and exact-arithmetic oracles."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from singular_svar import moments as mom
from singular_svar.model import SvarModel, is_stable


def random_singular_var(rng, n=None, q=None, p=None, radius=None, a0_identity=True, max_cond=1e10):
    """Stable VAR with ``q < n`` shocks; lags are rescaled to a target spectral radius.

    Draws whose ``Gamma_p`` has condition number above ``max_cond`` are redrawn:
    their smallest singular values sit at rounding level and their rank is not
    numerically defined in double precision.
    """
    n = n or int(rng.integers(2, 5))
    q = q or int(rng.integers(1, n))
    p = p or int(rng.integers(1, 4))
    radius = radius or float(rng.uniform(0.3, 0.9))
    while True:
        lags = [rng.standard_normal((n, n)) for _ in range(p)]
        b = rng.standard_normal((n, q))
        rho = max(abs(np.linalg.eigvals(SvarModel.reduced(np.hstack(lags), b).companion())))
        lags = [a * (radius / rho) ** (k + 1) for k, a in enumerate(lags)]
        a0 = np.eye(n) if a0_identity else np.eye(n) + 0.3 * rng.standard_normal((n, n))
        try:
            m = SvarModel(a0, tuple(a0 @ a for a in lags), a0 @ b)
        except ValueError:
            continue
        if not is_stable(m).stable:
            continue
        gp = mom.autocovariances(m, p).block_toeplitz(p)
        if np.linalg.cond(gp) <= max_cond:
            return m


def standard_models():
    """Named models used for the structure-detection round trip."""
    out = {}
    out["n2_q1_p1"] = SvarModel(np.eye(2), (np.array([[0.5, 0.2], [0.1, 0.4]]),), np.array([[1.0], [0.6]]))
    a1 = np.array([[0.5, 0.1, 0.0], [0.2, 0.3, 0.1], [0.0, 0.1, 0.4]])
    a2 = np.array([[0.1, 0.0, 0.05], [0.0, 0.1, 0.0], [0.05, 0.0, 0.1]])
    b = np.array([[1.0, 0.0], [0.5, 1.0], [0.3, -0.4]])
    out["n3_q2_p2"] = SvarModel(np.eye(3), (a1, a2), b)
    rng = np.random.default_rng(20240611)
    out["n4_q2_p2"] = random_singular_var(rng, n=4, q=2, p=2, radius=0.7)
    out["n4_q3_p3"] = random_singular_var(rng, n=4, q=3, p=3, radius=0.7)
    out["n3_q1_p1_a0"] = random_singular_var(rng, n=3, q=1, p=1, radius=0.6, a0_identity=False)
    return out


def frac_matrix(a):
    return [[Fraction(x) for x in row] for row in a]


def exact_rank(a) -> int:
    """Rank by Gaussian elimination over the rationals."""
    m = frac_matrix(a)
    rows, cols = len(m), len(m[0]) if m else 0
    r = 0
    for c in range(cols):
        piv = next((i for i in range(r, rows) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        for i in range(rows):
            if i != r and m[i][c] != 0:
                f = m[i][c] / m[r][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        r += 1
    return r


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def compatibility_instance(rng):
    """Random noise-restriction problem at a random candidate ``(A0, B)``.

    Half the instances keep ``A0 = I`` fixed.  The right-hand side is either
    drawn so that the restrictions are feasible on the singularity manifold,
    or drawn at random (feasible only when there are few restrictions).
    """
    from singular_svar.identify import n_script
    from singular_svar.model import NoiseRestrictionSet

    a0_identity = bool(rng.integers(0, 2))
    n = int(rng.integers(2, 5))
    q = int(rng.integers(1, n))
    m = random_singular_var(rng, n=n, q=q, p=1, a0_identity=a0_identity)
    r_a0 = 0 if a0_identity else int(rng.integers(0, n * n + 1))
    r_b = int(rng.integers(1 if a0_identity else 0, n * q + 1))
    if r_a0 + r_b == 0:
        r_b = 1
    c_a0, c_b = rng.standard_normal((r_a0, n * n)), rng.standard_normal((r_b, n * q))
    probe = NoiseRestrictionSet(c_a0, np.zeros(r_a0), c_b, np.zeros(r_b), a0_identity)
    if rng.random() < 0.5:
        nn = n_script(m, probe)
        _, s, vt = np.linalg.svd(nn)
        null = vt[int((s > 1e-10 * s.max()).sum()):].T
        rhs = probe.c_n @ (null @ rng.standard_normal(null.shape[1]))
    else:
        rhs = rng.standard_normal(r_a0 + r_b)
    return m, NoiseRestrictionSet(c_a0, rhs[:r_a0], c_b, rhs[r_a0:], a0_identity)


def feasibility_oracle(m, r, rtol=1e-8):
    """Brute force: is ``{y : N y = 0, C_N y = c_N}`` non-empty?  Decided by the
    least-squares residual of the stacked system."""
    from scipy.linalg import lstsq

    from singular_svar.identify import n_script

    nn = n_script(m, r)
    a = np.vstack([nn, r.c_n])
    b = np.concatenate([np.zeros(nn.shape[0]), r.rhs_n])
    y, *_ = lstsq(a, b)
    return bool(np.abs(a @ y - b).max() <= rtol * max(1.0, np.abs(b).max()))


def fd_jacobian(m, a0_identity, h=1e-5):
    """Central differences of ``vec(A0, B) -> vech(Sigma_u)``."""
    from singular_svar.identify import covariance_map

    x0 = mc_vec(m.b) if a0_identity else m.vec_noise()
    cols = []
    for k in range(x0.size):
        e = np.zeros_like(x0)
        e[k] = h
        cols.append((covariance_map(m, x0 + e, a0_identity) - covariance_map(m, x0 - e, a0_identity)) / (2 * h))
    return np.column_stack(cols)


def mc_vec(a):
    return np.asarray(a).reshape(-1, order="F")
