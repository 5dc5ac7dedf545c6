import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import complex_l1
from softrec.exceptions import ConfigError, InfeasibleError, NumericError, ParameterError, ValidationError
from softrec.superres import (Gaussian, SpikeTrain, SuperresConfig, Tabulated, approximation_error,
                              autocorrelation, build_grid_frame, build_superres_certificate,
                              certificate_constant, certificate_radius_bound, choose_certificate_epsilon,
                              cover_interval_frame_set, deltas_curve, discretization_floor,
                              filter_first_moment_norm, frame_operator, greedy_index_set,
                              max_separation, run_superres_experiment, superres_parameters,
                              theta_for_separation, tv_grid_recover, verify_cor_g)

W = 0.05
G = Gaussian(W)
REFERENCE_DELTA = 2.1  # reference hump radius over width for |c| = 0.1, separation 3.95 widths
FREQS = np.linspace(-400, 400, 8001)


@pytest.fixture(scope="module")
def frame():
    return build_grid_frame((0, 1), 256, G)


def _gaussian_power(width, shift=0.0):
    # |phi_hat|^2 of the unit-energy Gaussian with a(x) = exp(-x^2 / (2 width^2))
    return math.sqrt(2 * math.pi) * width * np.exp(-((FREQS - shift) * width) ** 2 / 2)


# -- filters ----------------------------------------------------------------------

def test_gaussian_autocorrelation():
    assert autocorrelation(G, 0.0) == 1
    assert autocorrelation(G, W * math.sqrt(2 * math.log(2))) == pytest.approx(0.5, abs=1e-12)
    x = np.linspace(-1, 1, 2001)
    a = autocorrelation(G, x)
    assert np.all(np.abs(a) <= 1) and np.array_equal(a, autocorrelation(G, -x))


def test_tabulated_matches_gaussian():
    tab = Tabulated(FREQS, _gaussian_power(W))
    x = np.linspace(-0.3, 0.3, 61)
    np.testing.assert_allclose(autocorrelation(tab, x).real, autocorrelation(G, x), atol=1e-10)
    assert filter_first_moment_norm(tab) == pytest.approx(1 / W, rel=1e-8)


def test_tabulated_asymmetric_is_hermitian():
    tab = Tabulated.normalized(FREQS, _gaussian_power(W, shift=20.0))
    x = np.linspace(0, 0.3, 31)
    a = autocorrelation(tab, x)
    np.testing.assert_allclose(autocorrelation(tab, -x), np.conj(a), atol=1e-12)
    assert np.max(np.abs(a)) <= 1 + 1e-12 and abs(a[1].imag) > 1e-3


def test_tabulated_validation():
    with pytest.raises(ValidationError):
        Tabulated(FREQS, 2 * _gaussian_power(W))
    with pytest.raises(ValidationError):
        Tabulated(FREQS[::-1], _gaussian_power(W))


def test_moment_norm():
    assert filter_first_moment_norm(Gaussian(1.0)) == 1
    assert filter_first_moment_norm(Gaussian(0.5)) == 2
    assert filter_first_moment_norm(G) * W == pytest.approx(1, abs=1e-9)
    heavy = Tabulated.normalized(FREQS, 1 / (1 + FREQS ** 2))
    with pytest.raises(NumericError):
        filter_first_moment_norm(heavy)


def test_autocorrelation_lipschitz():
    # |a(x) - a(y)| <= ||phi||_{1,2} |x - y|
    x = np.linspace(-0.5, 0.5, 20001)
    slope = np.max(np.abs(np.diff(autocorrelation(G, x)))) / (x[1] - x[0])
    assert slope <= filter_first_moment_norm(G)


# -- frame ----------------------------------------------------------------------------

def test_frame_parseval(frame):
    x = np.linspace(0, 1, 50)
    C = frame.coefficients(x)
    np.testing.assert_allclose(np.sum(np.abs(C) ** 2, axis=0), frame.norms_sq(x), rtol=1e-12)
    np.testing.assert_allclose(frame.norms_sq(x), 1, atol=1e-8)
    # Gram of the frame coefficients equals the auto-correlation
    np.testing.assert_allclose((C.conj().T @ C).real, autocorrelation(G, x[:, None] - x[None, :]),
                               atol=1e-8)


def test_frame_config_errors():
    with pytest.raises(ConfigError):
        build_grid_frame((0, 1), 100, G)
    with pytest.raises(ConfigError):
        build_grid_frame((0, 1), 32, G)
    with pytest.raises(ConfigError):
        build_grid_frame((0, 1), 256, G, pad=W)
    with pytest.raises(ConfigError):
        build_grid_frame((1, 0), 256, G)


def test_coefficients_chunking(frame):
    x = np.linspace(0, 1, 37)
    np.testing.assert_array_equal(frame.coefficients(x, chunk=5), frame.coefficients(x))
    assert frame.coefficients([], [1, 2]).shape == (2, 0)


# -- approximation error and covering --------------------------------------------------

def test_epsilon_extremes(frame):
    assert approximation_error(frame, range(frame.N), 0.3) == 0
    assert approximation_error(frame, [], 0.3) == pytest.approx(1, abs=1e-8)


@settings(max_examples=30)
@given(st.floats(0, 1), st.integers(0, 2 ** 32 - 1))
def test_epsilon_nested_monotone(x0, seed):
    fr = build_grid_frame((0, 1), 64, G)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(fr.N)
    k = int(rng.integers(0, fr.N))
    assert approximation_error(fr, perm[:k + 1], x0) <= approximation_error(fr, perm[:k], x0) + 1e-15


def test_epsilon_lipschitz(frame):
    M = greedy_index_set(frame, 0.5, 0.2)
    x = np.linspace(0.3, 0.7, 4001)
    e = approximation_error(frame, M, x)
    assert np.max(np.abs(np.diff(e))) / (x[1] - x[0]) <= filter_first_moment_norm(G) * (1 + 1e-6)


def test_greedy_set_meets_target(frame):
    for eps in (0.5, 0.1, 0.01):
        M = greedy_index_set(frame, 0.4, eps)
        assert approximation_error(frame, M, 0.4) <= eps
        # dropping the weakest kept index breaks the target
        C2 = np.abs(frame.coefficients(0.4)[:, 0]) ** 2
        weakest = min(M, key=lambda i: C2[i])
        assert approximation_error(frame, set(M) - {weakest}, 0.4) > eps


def test_cover_examples(frame):
    assert cover_interval_frame_set(frame, (0, 1), 1.0 + discretization_floor(frame)) == []
    big = cover_interval_frame_set(frame, (0, 1), 0.3)
    small = cover_interval_frame_set(frame, (0, 1), 0.05)
    assert len(small) > len(big) > 0
    x = np.linspace(0, 1, 1001)
    assert np.max(approximation_error(frame, small, x)) <= 0.05


def test_cover_single_point(frame):
    assert cover_interval_frame_set(frame, (0.4, 0.4), 0.2) == sorted(greedy_index_set(frame, 0.4, 0.1))


def test_cover_errors(frame):
    floor = discretization_floor(frame)
    with pytest.raises(ParameterError):
        cover_interval_frame_set(frame, (0, 1), 1.5 * floor)
    with pytest.raises(ParameterError):
        cover_interval_frame_set(frame, (0, 1), 0.0)
    with pytest.raises(ValidationError):
        cover_interval_frame_set(frame, (1, 0), 0.2)


# -- parameters -------------------------------------------------------------------------

def test_reference_parameter_example():
    dsep = 3.95 * W
    theta = theta_for_separation(0.1, W, dsep)
    p = superres_parameters(0.1, 0.5, theta, G, dsep)
    assert theta == pytest.approx(0.99632, abs=1e-5)
    assert p.lam == pytest.approx(0.04982, abs=1e-5)
    assert p.delta / W == pytest.approx(2.449, abs=1e-3)
    assert p.delta_sep_max == pytest.approx(dsep, rel=1e-12)
    # the reference value does not follow from the formulas; kept as a recorded discrepancy
    assert abs(p.delta / W - REFERENCE_DELTA) > 0.3


def test_hump_radius_exact():
    p = superres_parameters(0.1, 0.5, 0.9, G, 0.2)
    assert autocorrelation(G, p.delta) == pytest.approx(p.lam, rel=1e-12)


def test_infeasible_separation():
    with pytest.raises(InfeasibleError):
        superres_parameters(0.1, 0.5, 0.99, G, W)
    with pytest.raises(InfeasibleError):
        theta_for_separation(0.1, W, W)
    with pytest.raises(ParameterError):
        superres_parameters(0.1, 0.5, 0.9, Tabulated(FREQS, _gaussian_power(W)), 0.2)


def test_max_separation_inverse():
    for theta in (0.5, 0.9, 0.999):
        d = max_separation(0.2, theta, W)
        assert theta_for_separation(0.2, W, d) == pytest.approx(theta, rel=1e-12)
    assert max_separation(0.2, 1.0, W) == math.inf


def test_certificate_epsilon():
    L, lam = 1e-3, 0.05
    e = choose_certificate_epsilon(0.1, L, lam)
    assert certificate_radius_bound(0.1, e, L) == pytest.approx(lam, abs=1e-12)
    assert certificate_radius_bound(0.1, 0.5 * e, L) > lam
    assert certificate_constant(1.0, 0.0, 0.0) == 1
    with pytest.raises(InfeasibleError):
        choose_certificate_epsilon(0.1, 0.5, lam)


def test_deltas_curve_rows():
    rows = deltas_curve(c_values=(0.1, 0.3), thetas=[0.9, 0.99])
    assert all(r[1] > 0 and r[2] > 0 for r in rows)
    # larger theta allows more separation-hungry spikes, smaller lambda widens the hump
    assert rows[1][1] > rows[0][1] and rows[1][2] < rows[0][2]


# -- certificate -------------------------------------------------------------------------

def test_full_frame_certificate(frame):
    y = np.linspace(0, 1, 101)
    omega = cmath.exp(0.7j)
    g = build_superres_certificate(frame, range(frame.N), 0.4, omega, 0.0, 0.0, 1.0, y)
    np.testing.assert_allclose(g, omega * autocorrelation(G, y - 0.4), atol=1e-8)


def test_certificate_deviation_bound(frame):
    M = cover_interval_frame_set(frame, (0, 1), 0.1)
    y = np.linspace(0, 1, 501)
    x0, eps0, L, c = 0.37, 0.1, 1e-3, 0.5
    C = certificate_constant(c, eps0, L)
    g = build_superres_certificate(frame, M, x0, 1.0, eps0, L, c, y)
    dev = np.max(np.abs(g - C * autocorrelation(G, y - x0)))
    assert dev <= C * approximation_error(frame, M, x0) * (1 + 1e-6) + 1e-8
    with pytest.raises(InfeasibleError):
        build_superres_certificate(frame, M, x0, 1.0, 0.01, L, c, y)


@given(st.floats(0, 2 * math.pi))
def test_certificate_phase_equivariant(theta):
    fr = build_grid_frame((0, 1), 64, G)
    M = cover_interval_frame_set(fr, (0, 1), 0.2)
    y = np.linspace(0, 1, 33)
    g1 = build_superres_certificate(fr, M, 0.5, 1.0, 0.2, 0.0, 1.0, y)
    g2 = build_superres_certificate(fr, M, 0.5, cmath.exp(1j * theta), 0.2, 0.0, 1.0, y)
    np.testing.assert_allclose(g2, cmath.exp(1j * theta) * g1, atol=1e-14)


def test_cor_g_examples():
    grid = np.linspace(0, 1, 201)
    mu0 = SpikeTrain([0.5], [1.0])
    g = autocorrelation(G, grid - 0.5)
    rep = verify_cor_g(g, mu0, 0.5, G, grid)
    assert rep.valid and rep.sigma == 1 and rep.t == 1 and rep.radius == 1
    rep = verify_cor_g(1.2 * g, mu0, 0.5, G, grid)
    assert rep.sigma == pytest.approx(1.2) and rep.t == pytest.approx(1)
    assert rep.radius == pytest.approx(1 / 1.2)
    rep = verify_cor_g(np.zeros_like(grid), mu0, 0.5, G, grid)
    assert not rep.valid and rep.radius == 0
    with pytest.raises(ValidationError):
        verify_cor_g(g, mu0, 0.5025, G, grid)


def test_spike_train_validation():
    with pytest.raises(ValidationError):
        SpikeTrain([0.1, 0.1], [1, 1])
    with pytest.raises(ValidationError):
        SpikeTrain([0.1, 0.2], [1])
    assert SpikeTrain([0.1, 0.2], [3, -4j]).tv() == 7


# -- recovery ----------------------------------------------------------------------------

def test_tv_recovery_vs_oracle():
    fr = build_grid_frame((0, 1), 64, G)
    M = cover_interval_frame_set(fr, (0, 1), 0.3)
    grid = np.linspace(0, 1, 17)
    mu0 = SpikeTrain([0.25, 0.75], [1.0, -0.5j])
    mu, res = tv_grid_recover(fr, M, mu0, grid=grid, tol=1e-10, max_iter=200000, return_result=True)
    val, _ = complex_l1(frame_operator(fr, M, grid), fr.analysis(mu0.points, mu0.weights, M))
    assert res.converged and res.objective == pytest.approx(val, rel=1e-6)
    assert mu.support == (4, 12)


def test_tv_recovery_zero():
    fr = build_grid_frame((0, 1), 64, G)
    mu = tv_grid_recover(fr, [0, 1, 2], SpikeTrain([], []), grid=np.linspace(0, 1, 9))
    assert mu.support == ()


def test_small_experiment():
    cfg = SuperresConfig(N=256, trials=2, seed=1, max_iter=2000)
    out = run_superres_experiment(cfg)
    assert len(out["rows"]) == 2 and out["certified"] == 2
    assert out["params"]["lam"] == pytest.approx(0.04982, abs=1e-5)
    again = run_superres_experiment(cfg)
    assert again["rows"] == out["rows"] and again["M"] == out["M"]
