import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize, minimize_scalar

from g4v import jt_vibronic as jt
from g4v.errors import CutoffOverflowError, DegeneracyError, NonConvergenceError, ValidationError
from g4v.units import MEV_TO_GHZ


def numeric_stationary_points(c, hbar_omega):
    """Oracle: locate the lower-sheet minimum and saddle by direct minimisation."""
    def radial(phi):
        res = minimize_scalar(
            lambda r: float(jt.apes_energies(r * np.cos(phi), r * np.sin(phi), c, hbar_omega)[0]),
            bounds=(0.0, 50.0), method="bounded", options={"xatol": 1e-12},
        )
        return res.fun

    # Global minimum from a 2-D search seeded off-axis so the search is not trivial.
    best = minimize(lambda x: float(jt.apes_energies(x[0], x[1], c, hbar_omega)[0]),
                    x0=[0.3, 0.2], method="Nelder-Mead",
                    options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 20000})
    # The saddle is the minimum along the ridge direction half-way between minima.
    phi_min = np.arctan2(best.x[1], best.x[0])
    saddle = radial(phi_min + np.pi / 3)
    return -best.fun, saddle - best.fun, phi_min


TABLE_ROWS = [
    # (e_jt, delta_jt, hbar_omega, p_reference)
    (40.86, 3.79, 89.70, 0.34),
    (30.59, 4.05, 77.01, 0.38),
    (20.81, 1.15, 64.87, 0.44),
    (15.02, 3.88, 51.98, 0.48),
    (62.58, 1.12, 60.97, 0.133),
    (71.48, 2.31, 70.64, 0.136),
    (67.69, 4.20, 68.13, 0.140),
    (87.32, 6.69, 77.93, 0.116),
]


# ---------------------------------------------------------------------------
# APES and couplings
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("row", TABLE_ROWS[:4])
def test_closed_form_stationary_points_match_numeric_search(row):
    e_jt, delta, omega, _ = row
    c = jt.fit_couplings(jt.JTParams(e_jt, delta, omega))
    depth, barrier = jt.apes_stationary_points(c, omega)
    num_depth, num_barrier, phi = numeric_stationary_points(c, omega)
    assert depth == pytest.approx(num_depth, rel=1e-8)
    assert barrier == pytest.approx(num_barrier, rel=1e-6)
    # Minima sit on the phi = 0, +-120 deg directions for G > 0.
    assert np.cos(3 * phi) == pytest.approx(1.0, abs=1e-6)


def test_fit_round_trip_table_rows():
    for e_jt, delta, omega, _ in TABLE_ROWS:
        c = jt.fit_couplings(jt.JTParams(e_jt, delta, omega))
        depth, barrier = jt.apes_stationary_points(c, omega)
        assert depth == pytest.approx(e_jt, rel=1e-9)
        assert barrier == pytest.approx(delta, rel=1e-9, abs=1e-12)
        assert 0 <= c.g_quadratic < omega / 2


def test_zero_barrier_is_linear_problem():
    c = jt.fit_couplings(jt.JTParams(10.0, 0.0, 50.0))
    assert c.g_quadratic == 0.0
    assert c.v_linear == pytest.approx(np.sqrt(2 * 10.0 * 50.0))


@settings(max_examples=80)
@given(
    e_jt=st.floats(min_value=1.0, max_value=120.0),
    frac=st.floats(min_value=0.0, max_value=0.95),
    omega=st.floats(min_value=10.0, max_value=120.0),
)
def test_fit_round_trip_property(e_jt, frac, omega):
    params = jt.JTParams(e_jt, frac * e_jt, omega)
    c = jt.fit_couplings(params)
    depth, barrier = jt.apes_stationary_points(c, omega)
    assert depth == pytest.approx(e_jt, rel=1e-9)
    assert barrier == pytest.approx(frac * e_jt, rel=1e-9, abs=1e-9 * e_jt)


@pytest.mark.parametrize("args", [(-1.0, 0.0, 50.0), (10.0, 10.0, 50.0), (10.0, -0.1, 50.0),
                                  (10.0, 1.0, 0.0), (np.nan, 1.0, 50.0)])
def test_invalid_params_rejected(args):
    with pytest.raises(ValidationError):
        jt.JTParams(*args)


def test_apes_sheets_ordered_and_degenerate_at_origin():
    c = jt.JTCouplings(5.0, 3.0)
    lo, hi = jt.apes_energies([0.0, 0.5, -1.0], [0.0, 0.2, 0.7], c, 60.0)
    assert lo[0] == hi[0] == 0.0
    assert np.all(lo <= hi)


# ---------------------------------------------------------------------------
# Hamiltonian construction
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("cutoff", [1, 3, 8])
def test_hamiltonian_dimension_and_symmetry(cutoff):
    h = jt.build_hamiltonian(jt.JTCouplings(4.0, 2.0), 60.0, cutoff)
    assert h.shape == ((cutoff + 1) * (cutoff + 2),) * 2
    dense = h.toarray()
    assert np.array_equal(dense, dense.T)
    assert np.all(np.isfinite(dense))


def test_uncoupled_spectrum_is_two_dimensional_oscillator():
    omega = 50.0
    sol = jt.solve(jt.JTCouplings(0.0, 0.0), omega, cutoff=8, n_eigen=12)
    # Levels (n+1) hbar_omega with electronic x vibrational degeneracy 2(n+1).
    expected = [omega * 1] * 2 + [omega * 2] * 4 + [omega * 3] * 6
    assert np.allclose(sol.eigenvalues, expected, atol=1e-10)
    assert jt.ham_factor_p(sol) == pytest.approx(1.0, abs=1e-12)


def test_weak_coupling_second_order_energy():
    # Second-order perturbation: E0 = hbar_omega - V^2 / hbar_omega = hbar_omega - 2 E_JT.
    omega, e_jt = 60.0, 0.01
    c = jt.fit_couplings(jt.JTParams(e_jt, 0.0, omega))
    sol = jt.solve(c, omega, cutoff=10)
    assert sol.eigenvalues[0] == pytest.approx(omega - 2 * e_jt, abs=1e-5)
    p = jt.ham_factor_p(sol)
    assert 0 < 1 - p < 10 * e_jt / omega


def test_cutoff_overflow_guard():
    with pytest.raises(CutoffOverflowError):
        jt.build_hamiltonian(jt.JTCouplings(1.0, 0.0), 50.0, 64, max_nnz=1000)


def test_bad_cutoff_rejected():
    with pytest.raises(ValidationError):
        jt.build_hamiltonian(jt.JTCouplings(1.0, 0.0), 50.0, 0)


# ---------------------------------------------------------------------------
# Eigensolver
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("cutoff", [5, 6, 7, 8])
@pytest.mark.parametrize("row", [TABLE_ROWS[0], TABLE_ROWS[7]])
def test_dense_and_sparse_agree(cutoff, row):
    e_jt, delta, omega, _ = row
    c = jt.fit_couplings(jt.JTParams(e_jt, delta, omega))
    dense = jt.solve(c, omega, cutoff=cutoff, n_eigen=6, escalate_to=None, method="dense")
    sparse = jt.solve(c, omega, cutoff=cutoff, n_eigen=6, escalate_to=None, method="sparse")
    scale = omega
    assert np.allclose(dense.eigenvalues, sparse.eigenvalues, atol=1e-10 * scale, rtol=0)


def test_unknown_method_rejected():
    with pytest.raises(ValidationError):
        jt.solve(jt.JTCouplings(1.0, 0.0), 50.0, cutoff=30, method="lobpcg")


def test_residuals_small_and_deterministic():
    e_jt, delta, omega, _ = TABLE_ROWS[2]
    c = jt.fit_couplings(jt.JTParams(e_jt, delta, omega))
    a = jt.solve(c, omega)
    b = jt.solve(c, omega)
    assert np.max(a.residuals) < 1e-8 * omega
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert a.converged and a.cutoff == 64


def test_small_cutoff_reports_unconverged():
    c = jt.fit_couplings(jt.JTParams(*TABLE_ROWS[0][:3]))
    sol = jt.solve(c, 89.7, cutoff=4, escalate_to=None)
    assert not sol.converged
    with pytest.raises(NonConvergenceError):
        jt.ham_factor_p(sol)


def test_split_doublet_raises_degeneracy_error():
    sol = jt.VibronicSolution(
        eigenvalues=np.array([0.0, 1.0, 2.0]),
        ground_doublet=np.zeros((2, 4)),
        cutoff=8,
        converged=True,
        hbar_omega=50.0,
    )
    with pytest.raises(DegeneracyError):
        jt.ham_factor_p(sol)


def test_ground_doublet_in_lz_eigenbasis():
    e_jt, delta, omega, _ = TABLE_ROWS[0]
    _, sol, _ = jt.compute_ham_factors(jt.JTParams(e_jt, delta, omega))
    lz = jt.lz_operator(sol.cutoff)
    pair = sol.ground_doublet.T
    m = pair.conj().T @ (lz @ pair)
    assert abs(m[0, 1]) < 1e-10
    assert m[0, 0].real > 0 > m[1, 1].real
    assert sol.doublet_gap < 1e-9 * omega


# ---------------------------------------------------------------------------
# Reduction factors
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("row", [TABLE_ROWS[0], TABLE_ROWS[4]])
def test_p_reproduces_tabulated_value(row):
    e_jt, delta, omega, p_ref = row
    hf, _, _ = jt.compute_ham_factors(jt.JTParams(e_jt, delta, omega))
    assert hf.p == pytest.approx(p_ref, abs=0.03)
    assert hf.q == pytest.approx((1 + hf.p) / 2)


def test_pbv_alternative_phonon_energy():
    # The PbV ground state is quoted with two phonon energies; both land near p = 0.48.
    hf, _, _ = jt.compute_ham_factors(jt.JTParams(15.02, 3.88, 55.98))
    assert hf.p == pytest.approx(0.48, abs=0.03)


def test_direct_q_matches_identity():
    e_jt, delta, omega, _ = TABLE_ROWS[0]
    hf, sol, _ = jt.compute_ham_factors(jt.JTParams(e_jt, delta, omega))
    assert jt.reduction_factor_q_direct(sol) == pytest.approx(hf.q, abs=1e-3)


def test_p_decreases_with_coupling():
    ps = []
    for e_jt in (5.0, 20.0, 40.0):
        hf, _, _ = jt.compute_ham_factors(jt.JTParams(e_jt, 0.0, 60.0))
        ps.append(hf.p)
    assert ps[0] > ps[1] > ps[2]


def test_effective_lambda_units():
    assert jt.effective_lambda(0.34, 0.86) == pytest.approx(0.34 * 0.86 * MEV_TO_GHZ)
    assert jt.effective_lambda(0.34, 0.86) == pytest.approx(70.7, abs=0.01)
    with pytest.raises(ValidationError):
        jt.effective_lambda(0.0, 0.86)
    with pytest.raises(ValidationError):
        jt.ham_factor_q(1.5)
