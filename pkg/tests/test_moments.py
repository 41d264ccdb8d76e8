import json

import numpy as np
import pytest
from scipy.linalg import solve_discrete_lyapunov

from conftest import random_singular_var, standard_models
from singular_svar import matrixcore as mc
from singular_svar import moments as mom
from singular_svar.errors import DimensionTooLarge, HorizonTooShort, NotStabilized, ShapeMismatch, Unstable
from singular_svar.model import SvarModel, sigma_u


def ar1(a, b=1.0):
    return SvarModel(np.eye(1), (np.array([[a]]),), np.array([[b]]))


# --- oracles -------------------------------------------------------------

def test_scalar_ar1_closed_form():
    cov = mom.autocovariances(ar1(0.5), 3)
    assert cov.gamma(0)[0, 0] == pytest.approx(4 / 3, abs=1e-14)
    for s in range(4):
        assert cov.gamma(s)[0, 0] == pytest.approx(4 / 3 * 0.5**s, abs=1e-14)


@pytest.mark.parametrize("seed", range(10))
def test_matches_scipy_lyapunov(seed):
    m = random_singular_var(np.random.default_rng(seed))
    f = m.companion()
    qm = np.zeros_like(f)
    qm[:m.n, :m.n] = sigma_u(m)
    g = solve_discrete_lyapunov(f, qm)
    cov = mom.autocovariances(m, m.p)
    np.testing.assert_allclose(cov.block_toeplitz(m.p), g, atol=1e-10 * np.abs(g).max())


@pytest.mark.parametrize("seed", range(10))
def test_dense_and_doubling_agree(seed):
    m = random_singular_var(np.random.default_rng(seed))
    dense = mom.autocovariances(m, 5)
    doub = mom.autocovariances(m, 5, method="doubling")
    for s in range(6):
        np.testing.assert_allclose(dense.gamma(s), doub.gamma(s), atol=1e-10 * np.abs(dense.gamma(0)).max())
    assert mom.lyapunov_residual(m, dense) < 1e-12


def test_recursion_beyond_p_matches_companion_powers(rng):
    m = random_singular_var(rng, n=3, q=2, p=2)
    cov = mom.autocovariances(m, 6)
    g = cov.block_toeplitz(2)
    f = m.companion()
    for s in range(2, 7):
        # gamma(s) is the top-left block of F^s G
        np.testing.assert_allclose(cov.gamma(s), (np.linalg.matrix_power(f, s) @ g)[:3, :3], atol=1e-12)


def test_block_toeplitz_layout():
    cov = mom.CovarianceSequence((np.eye(2), 2 * np.ones((2, 2)) + np.diag([0, 1]), np.zeros((2, 2))))
    t = cov.block_toeplitz(3)
    np.testing.assert_array_equal(t[0:2, 2:4], cov.gamma(1))
    np.testing.assert_array_equal(t[2:4, 0:2], cov.gamma(1).T)
    np.testing.assert_array_equal(t[0:2, 4:6], cov.gamma(2))


# --- errors ---------------------------------------------------------------

def test_autocovariance_errors():
    with pytest.raises(Unstable):
        mom.autocovariances(ar1(1.0), 2)
    big = SvarModel(np.eye(31), (0.5 * np.eye(31), 0.1 * np.eye(31)), np.eye(31)[:, :3])
    with pytest.raises(DimensionTooLarge):
        mom.autocovariances(big, 1)
    assert mom.autocovariances(big, 1, method="doubling").n == 31
    with pytest.raises(ValueError):
        mom.autocovariances(ar1(0.5), 1, method="bogus")


def test_covariance_sequence_validation():
    with pytest.raises(ShapeMismatch):
        mom.CovarianceSequence((np.eye(2), np.eye(3)))
    cov = mom.CovarianceSequence((np.eye(2),))
    with pytest.raises(HorizonTooShort):
        cov.block_toeplitz(2)
    with pytest.raises(ShapeMismatch):
        mom.CovarianceSequence.from_dict({"n": 3, "gammas": [np.eye(2).tolist()]})


def test_covariance_json_round_trip(rng):
    cov = mom.autocovariances(random_singular_var(rng), 4)
    back = mom.CovarianceSequence.from_dict(json.loads(json.dumps(cov.to_dict())))
    for s in range(5):
        np.testing.assert_array_equal(back.gamma(s), cov.gamma(s))


# --- Toeplitz system -------------------------------------------------------

def test_toeplitz_system_recovers_sigma_u():
    m = standard_models()["n3_q2_p2"]
    ts = mom.build_toeplitz(mom.autocovariances(m, 2), 2, mc.Tol(relative=1e-10))
    np.testing.assert_allclose(ts.sigma_u, sigma_u(m), atol=1e-10)
    assert ts.q_effective == 2
    # with q given the kernel dimension is fixed without a rank decision
    assert mom.build_toeplitz(mom.autocovariances(m, 2), 2, q=2).left_kernel_L.shape == (1, 3)
    L = ts.left_kernel_L
    assert L.shape == (1, 3) and np.abs(L @ sigma_u(m)).max() < 1e-10
    with pytest.raises(HorizonTooShort):
        mom.build_toeplitz(mom.autocovariances(m, 1), 2)


# --- structure detection ---------------------------------------------------

@pytest.mark.parametrize("name", sorted(standard_models()))
def test_detect_population(name):
    m = standard_models()[name]
    est = mom.detect_structure(mom.autocovariances(m, 8), 8)
    assert (est.p_hat, est.q_hat) == (m.p, m.q)
    assert mc.same_row_space(est.L_hat, mc.kernel_left(sigma_u(m), 1e-10), tol=1e-8)
    assert not est.non_unique


def test_detect_full_rank_is_flagged_non_unique():
    m = SvarModel(np.eye(2), (np.diag([0.5, 0.3]),), np.eye(2))
    est = mom.detect_structure(mom.autocovariances(m, 4), 4)
    assert est.q_hat == 2 and est.non_unique


def test_detect_not_stabilized():
    # y_t = (e_t, e_{t-3}): ranks 2, 4, 6, 7, so the last two increments differ
    g3 = np.array([[0.0, 0.0], [1.0, 0.0]])
    z = np.zeros((2, 2))
    cov = mom.CovarianceSequence((np.eye(2), z, z, g3))
    assert [rk for _, rk in mom.rank_profile(cov, 4)] == [2, 4, 6, 7]
    with pytest.raises(NotStabilized):
        mom.detect_structure(cov, 4)


def test_detect_needs_horizon():
    with pytest.raises(HorizonTooShort):
        mom.detect_structure(mom.autocovariances(ar1(0.5), 2), 4)


# --- simulation ------------------------------------------------------------

def test_simulation_is_deterministic():
    m = standard_models()["n3_q2_p2"]
    a = mom.simulate(m, 500, seed=7).to_csv()
    b = mom.simulate(m, 500, seed=7).to_csv()
    assert a == b
    assert a.splitlines()[0] == "y1,y2,y3"
    assert a != mom.simulate(m, 500, seed=8).to_csv()


def test_simulation_matches_plain_recursion():
    m = standard_models()["n4_q3_p3"]
    path = mom.simulate(m, 300, seed=3, block=7)
    eps = np.random.default_rng(3).standard_normal((300 + path.burn_in, m.q))
    lags = [m.reduced_a_plus[:, k * m.n:(k + 1) * m.n] for k in range(m.p)]
    y = np.zeros((len(eps) + m.p, m.n))
    for t in range(len(eps)):
        y[t + m.p] = sum(lags[k] @ y[t + m.p - 1 - k] for k in range(m.p)) + m.reduced_b @ eps[t]
    np.testing.assert_allclose(path.y, y[m.p + path.burn_in:], atol=1e-12)
    np.testing.assert_array_equal(path.eps, eps[path.burn_in:])


def test_simulated_path_obeys_singularity():
    m = standard_models()["n3_q2_p2"]
    y = mom.simulate(m, 200, seed=1).y
    L = mc.kernel_left(sigma_u(m), 1e-10)
    u = y[2:] - y[1:-1] @ m.a_plus[0].T - y[:-2] @ m.a_plus[1].T
    assert np.abs(u @ L.T).max() < 1e-10


def test_sample_autocovariances_converge():
    m = standard_models()["n2_q1_p1"]
    y = mom.simulate(m, 100_000, seed=11).y
    sc = mom.sample_autocovariances(y, 2)
    pc = mom.autocovariances(m, 2)
    for s in range(3):
        np.testing.assert_allclose(sc.gamma(s), pc.gamma(s), atol=0.05 * np.abs(pc.gamma(0)).max())
    assert np.linalg.eigvalsh(sc.block_toeplitz(3)).min() > -1e-10
    with pytest.raises(HorizonTooShort):
        mom.sample_autocovariances(y[:3], 3)


def test_sample_rank_tol_is_fraction_of_sigma_max():
    cov = mom.autocovariances(ar1(0.5), 2)
    tol = mom.sample_rank_tol(cov, 2, factor=1e-3)
    assert tol.absolute == pytest.approx(1e-3 * np.linalg.norm(cov.block_toeplitz(2), 2))


def test_simulate_rejects_unstable():
    with pytest.raises(Unstable):
        mom.simulate(ar1(1.2), 10, seed=0)
