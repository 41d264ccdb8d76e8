import numpy as np
import pytest

from singular_svar import identify as ident
from singular_svar import matrixcore as mc
from singular_svar import refixtures as rf
from singular_svar.errors import ExistenceUniquenessFailed, RootOnUnitCircle
from singular_svar.model import sigma_u

REF = {k: float(v) for k, v in rf.REFERENCE_PARAMS.items()}


def eta_map_oracle(m):
    """Forecast-error map that keeps the expectation states at zero.

    Solves ``rows_xi(G0^{-1} (Pi E + Psi)) = 0`` for ``E`` directly, without
    any eigen-decomposition.
    """
    g = np.linalg.inv(m.gamma0)
    xi = [i for i in range(5) if i not in m.observables]
    return np.linalg.solve((g @ m.pi_mat)[xi], -(g @ m.psi_mat)[xi])


@pytest.fixture(scope="module")
def reference_solution():
    return rf.solve_canonical(rf.new_keynesian(**REF))


# --- oracles ----------------------------------------------------------------

def test_eta_map_matches_direct_solve(reference_solution):
    m = rf.new_keynesian(**REF)
    np.testing.assert_allclose(reference_solution.eta_map, eta_map_oracle(m), atol=1e-12)


@pytest.mark.parametrize("tau,kappa", [(0.75, 0.5), (0.4, 0.9), (1.3, 0.2)])
def test_closed_forms_match_direct_solve(tau, kappa):
    m = rf.new_keynesian(0.8, 39 / 38, tau, kappa)
    np.testing.assert_allclose(eta_map_oracle(m), rf.eta_map_closed_form(tau, kappa), atol=1e-12)


def test_m_closed_form_matches_projection_formula():
    # M = C_B (I - N'(N N')^{-1} N) with N = I_2 kron (tau, 0, 1)
    tau = 0.75
    nn = np.kron(np.eye(2), np.array([[tau, 0.0, 1.0]]))
    proj = np.eye(6) - nn.T @ np.linalg.solve(nn @ nn.T, nn)
    np.testing.assert_allclose(rf.C_B_PRINTED @ proj, rf.m_closed_form(tau), atol=1e-15)


def test_printed_duplication_matrix():
    np.testing.assert_array_equal(rf.D3_PRINTED, mc.duplication(3))


# --- the RE solution ----------------------------------------------------------

def test_two_unstable_eigenvalues(reference_solution):
    mods = reference_solution.unstable_moduli
    assert len(mods) == 2 and mods[0] > mods[1] > 1
    np.testing.assert_allclose(mods, [1.16108829, 1.07657618], atol=1e-8)
    assert reference_solution.existence_unique


def test_pi_u_inverse_psi_u(reference_solution):
    tau, kappa = REF["tau"], REF["kappa"]
    expected = np.array([[1.0, -kappa * tau], [0.0, -tau]])
    np.testing.assert_allclose(reference_solution.eta_map, expected, atol=1e-10)
    # the raw product carries the sign of Psi[0, 0] = -1
    np.testing.assert_allclose(reference_solution.pi_u_inv_psi_u, -expected, atol=1e-10)


def test_induced_b(reference_solution):
    np.testing.assert_allclose(reference_solution.b_static, [[1, 0], [-0.375, 1], [-0.75, 0]], atol=1e-10)
    assert reference_solution.xi_residual < 1e-12
    assert reference_solution.lag_residual < 1e-12  # static solution: no dependence on the past


def test_induced_b_is_locally_identified(reference_solution):
    m, r = rf.nk_svar(reference_solution.b_static)
    assert ident.check_local_identifiability(m, r).locally_identified


def test_indeterminate_parameters_report_failure():
    sol = rf.solve_canonical(rf.new_keynesian(0.8, 0.0, 0.75, 0.5))
    assert not sol.existence_unique and len(sol.unstable_eigenvalues) == 1
    assert "unstable" in sol.message
    with pytest.raises(ExistenceUniquenessFailed):
        rf.solve_canonical(rf.new_keynesian(0.8, 0.0, 0.75, 0.5), strict=True)


def test_unit_root_raises():
    with pytest.raises(RootOnUnitCircle):
        rf.solve_canonical(rf.new_keynesian(0.8, 39 / 38, 0.0, 0.5))


# --- golden suite ---------------------------------------------------------------

def test_golden_suite_at_reference_parameters():
    items = rf.golden_suite(**REF)
    assert rf.suite_passed(items), [it.line() for it in items if not it.passed]
    names = {it.name for it in items}
    assert {"M", "rank_M", "rank_M_cB", "2D3+(B kron I3)", "rank_stacked", "induced_B"} <= names


def test_golden_suite_elsewhere_in_parameter_space():
    assert rf.suite_passed(rf.golden_suite(0.8, 39 / 38, 0.76, 0.5))


def test_tau_zero_degeneracy():
    # the RE solver hits a unit root but the identification ranks are unchanged;
    # the restriction B[3, 2] = 0 is then implied by L = (0, 0, 1)
    items = {it.name: it for it in rf.golden_suite(0.8, 39 / 38, 0.0, 0.5)}
    assert not items["re_solution"].passed
    assert items["rank_M"].actual == 3 and items["rank_stacked"].actual == 6
    m, r = rf.nk_svar(rf.b_closed_form(0.0, 0.5))
    assert ident.diagnose_redundancy(m, r) == [3]
    assert mc.same_row_space(ident.singularity_kernel(m), np.array([[0.0, 0.0, 1.0]]))


def test_compiled_restrictions_match_print():
    m, r = rf.nk_svar(rf.b_closed_form(0.75, 0.5))
    np.testing.assert_array_equal(r.c_b, rf.C_B_PRINTED)
    np.testing.assert_array_equal(r.rhs_b, rf.C_B_RHS_PRINTED)
    L = ident.singularity_kernel(m)
    assert mc.same_row_space(L, np.array([[0.75, 0.0, 1.0]]))
    assert mc.rank(sigma_u(m)) == 2


def test_golden_item_serialization():
    it = rf.golden_suite(**REF)[0]
    d = it.to_dict()
    assert d["passed"] is True and d["name"] == it.name
    assert it.line().startswith("PASS")
