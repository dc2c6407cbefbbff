import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from dissipative_higgs import reservoir as rv
from dissipative_higgs.errors import QuadratureError, ReconstructionError
from dissipative_higgs.geometry import CurvedSpace, metric, vielbein


class UnitIm(rv.SusceptibilityModel):
    """Im gamma = 1 on (0, 4]; a flat test spectrum."""

    spectral_scale = 0.5

    def im_chi(self, omega):
        return np.where(np.asarray(omega) > 0, 1.0, 0.0)

    def friction_spectrum(self, omega):
        return np.asarray(omega, dtype=float)

    def describe(self):
        return {"type": "unit"}


class Silent(rv.SusceptibilityModel):
    def im_chi(self, omega):
        return np.zeros_like(np.asarray(omega, dtype=float))

    def friction_spectrum(self, omega):
        return np.zeros_like(np.asarray(omega, dtype=float))

    def describe(self):
        return {"type": "silent"}


def test_lorentz_im_chi_examples():
    m = rv.Lorentz(1.0, 1.0, 0.1)
    assert rv.im_chi(m, 0.0) == 0.0
    assert rv.im_chi(m, 1.0) == pytest.approx(10.0, rel=1e-14)


def test_drude_examples():
    m = rv.OhmicDrude(0.5, 10.0)
    # J(omega) = eta omega / (1 + (omega/wc)^2); Im gamma = J / omega^2
    assert m.spectral_density(10.0) == pytest.approx(2.5, rel=1e-15)
    assert rv.im_chi(m, 10.0) == pytest.approx(0.025, rel=1e-15)


def test_negative_frequency_rejected():
    with pytest.raises(ValueError):
        rv.im_chi(rv.Lorentz(), -1.0)
    with pytest.raises(ValueError):
        rv.coupling_f(rv.Lorentz(), 0.0)


def test_coupling_f_examples():
    assert rv.coupling_f(UnitIm(), math.pi / 2) == pytest.approx(1.0, rel=1e-15)
    assert rv.coupling_f(Silent(), 2.0) == 0.0
    m = rv.Lorentz(2.0, 1.5, 0.3)
    w = np.linspace(0.1, 5, 50)
    np.testing.assert_allclose(rv.coupling_f(m, w) ** 2, 2 * w * m.im_chi(w) / np.pi, rtol=1e-13)


def test_model_parameter_validation():
    with pytest.raises(ValueError):
        rv.Lorentz(1.0, 0.0, 0.1)
    with pytest.raises(ValueError):
        rv.OhmicDrude(0.5, -1.0)
    with pytest.raises(ValueError):
        rv.Tabulated(np.array([0.0, 1.0]), np.array([1.0, -1.0]))


def test_tabulated_interpolation_and_loading(tmp_path):
    path = tmp_path / "imchi.txt"
    path.write_text("# omega im\n0 0\n1 2\n2 0\n")
    m = rv.load_tabulated(path)
    np.testing.assert_allclose(m.im_chi([0.5, 1.0, 1.5, 3.0]), [1.0, 2.0, 1.0, 0.0])
    assert m.default_omega_max() == 2.0
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1 2\n1 2 3\n")
    with pytest.raises(ValueError):
        rv.load_tabulated(bad)


def test_kernel_lorentz_closed_form():
    m = rv.Lorentz(1.0, 1.0, 0.2)
    k = rv.kernel_from_model(m, 0.05, 10.0, omega_max=400.0)
    assert k.gamma[0] == 0.0
    assert np.max(np.abs(k.gamma - m.kernel_exact(k.t))) < 1e-4


def test_kernel_drude_closed_form_and_gamma_dot_zero():
    m = rv.OhmicDrude(0.5, 10.0)
    k = rv.kernel_from_model(m, 0.01, 2.0, omega_max=2000.0)
    # gamma_dot(0) = (2/pi) int_0^W omega Im gamma = (2/pi) eta wc atan(W/wc)
    expected = 2 / np.pi * 0.5 * 10.0 * np.arctan(200.0)
    assert k.gamma_dot[0] == pytest.approx(expected, rel=1e-8)
    assert np.max(np.abs(k.gamma[5:] - m.kernel_exact(k.t[5:]))) < 5e-3


def test_kernel_single_sharp_mode():
    # a narrow resonance acts as one mode of weight f0^2 = strength
    m = rv.Lorentz(1.0, 2.0, 1e-3)
    k = rv.kernel_from_model(m, 0.05, 5.0, omega_max=16.0, tol=1e-12)
    one_mode = np.sin(2.0 * k.t) / 2.0
    assert np.max(np.abs(k.gamma - one_mode)) < 5e-3


def test_kernel_causality_and_samples():
    k = rv.kernel_from_model(rv.Lorentz(), 0.1, 2.0)
    assert k.gamma_at(-0.5) == 0.0
    assert k.gamma_dot_at(-0.1) == 0.0
    np.testing.assert_array_equal(k.samples(0.1, 5), k.gamma_dot[:5])
    with pytest.raises(ValueError):
        k.samples(0.1, 100)
    with pytest.raises(ValueError):
        rv.kernel_from_model(rv.Lorentz(), 0.0, 1.0)


def test_kernel_quadrature_failure_reports_error(monkeypatch):
    class Info:
        status = 1

    def stuck(f, a, b, **kw):
        return f(0.5 * (a + b)), 0.125, Info()

    monkeypatch.setattr(rv, "quad_vec", stuck)
    with pytest.raises(QuadratureError) as info:
        rv.kernel_from_model(rv.Lorentz(), 0.5, 2.0)
    assert info.value.achieved_error == 0.125


def test_kk_zero_input():
    u = np.linspace(0, 10, 1001)
    kk = rv.kramers_kronig_re(u, np.zeros_like(u), [0.0, 1.0, 5.0])
    np.testing.assert_array_equal(kk.re, 0.0)
    assert kk.tail_estimate == 0.0


def test_kk_lorentz_interior():
    m = rv.Lorentz(1.0, 1.0, 0.2)
    u = np.linspace(0, 60, 30001)
    w = np.linspace(0.1, 4.0, 200)
    kk = rv.kramers_kronig_re(u, m.im_chi(u), w)
    assert np.max(np.abs(kk.re - m.re_chi(w)) / np.abs(m.re_chi(w)).clip(0.05)) < 1e-2


def test_kk_drude():
    m = rv.OhmicDrude(0.5, 2.0)
    u = np.linspace(0, 2000, 400001)
    w = np.linspace(0.2, 6.0, 50)
    kk = rv.kramers_kronig_re(u, m.im_chi(u), w)
    np.testing.assert_allclose(kk.re, m.re_chi(w), rtol=1e-2)


def test_kk_at_zero_frequency():
    m = rv.Lorentz(1.0, 1.0, 0.5)
    u = np.linspace(0, 80, 40001)
    kk = rv.kramers_kronig_re(u, m.im_chi(u), [0.0])
    ref = 2 / np.pi * quad(lambda s: m.im_chi(s) / s if s > 0 else 0.5, 0, 80, limit=400)[0]
    assert kk.re[0] == pytest.approx(ref, rel=1e-4)


def test_kk_rejects_bad_grid():
    with pytest.raises(ValueError):
        rv.kramers_kronig_re(np.linspace(1, 2, 10), np.zeros(10))
    with pytest.raises(ValueError):
        rv.kramers_kronig_re(np.linspace(0, 2, 10), np.zeros(10), [3.0])


def test_single_mode_bath_sits_at_resonance():
    bath = rv.discretize_bath(rv.Lorentz(1.0, 1.0, 1e-3), n_modes=1, omega_max=2.0, verify=False)
    assert bath.size == 1
    assert bath.omega[0] == pytest.approx(1.0, rel=1e-15)


def test_bath_reconstruction_default_drude():
    bath = rv.discretize_bath(rv.OhmicDrude(0.5, 10.0), n_modes=400)
    assert bath.reconstruction_error <= 1e-3
    assert np.all(np.diff(bath.omega) > 0) and bath.omega[0] > 0


def test_reconstruction_decreases_with_modes():
    m = rv.Lorentz(1.0, 1.0, 0.2)
    ref = rv.kernel_from_model(m, 0.05, 20.0, omega_max=8.0)
    errs = [rv.reconstruction_error(rv.discretize_bath(m, n, omega_max=8.0, verify=False), ref)
            for n in (25, 50, 100, 200)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_reconstruction_failure_is_loud():
    with pytest.raises(ReconstructionError) as info:
        rv.discretize_bath(rv.OhmicDrude(0.5, 10.0), n_modes=10, t_max=20.0)
    assert info.value.achieved_error > 1e-3


def test_kernel_from_bath_matches_mode_sum():
    bath = rv.discretize_bath(rv.Lorentz(), n_modes=50, verify=False)
    k = rv.MemoryKernel.from_bath(bath, 0.1, 3.0)
    t = 0.1 * np.arange(31)
    ref = np.array([np.sum(bath.coupling**2 * np.sin(bath.omega * s) / bath.omega) for s in t])
    np.testing.assert_allclose(k.gamma, ref, atol=1e-14)


def test_thermal_zero_temperature():
    bath = rv.discretize_bath(rv.Lorentz(), n_modes=20, verify=False)
    s = rv.sample_thermal(bath, 0.0, seed=1)
    assert not s.X.any() and not s.P.any()
    with pytest.raises(ValueError):
        rv.sample_thermal(bath, -1.0, seed=1)


def test_thermal_same_seed_identical():
    bath = rv.discretize_bath(rv.Lorentz(), n_modes=20, verify=False)
    a = rv.sample_thermal(bath, 2.0, seed=9, replica=3)
    b = rv.sample_thermal(bath, 2.0, seed=9, replica=3)
    c = rv.sample_thermal(bath, 2.0, seed=10, replica=3)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.P, b.P)
    assert not np.array_equal(a.X, c.X)


def test_ensemble_slices_are_schedule_independent():
    bath = rv.discretize_bath(rv.Lorentz(), n_modes=8, verify=False)
    whole = rv.sample_thermal_ensemble(bath, 1.0, 4, 6)
    tail = rv.sample_thermal_ensemble(bath, 1.0, 4, 2, start=4)
    np.testing.assert_array_equal(whole.X[4:], tail.X)


def test_thermal_variance_monte_carlo():
    bath = rv.discretize_bath(rv.Lorentz(), n_modes=4, verify=False)
    T, kB, n = 0.7, 1.3, 100_000
    ens = rv.sample_thermal_ensemble(bath, T, 2, n, kB=kB)
    for arr, target in ((ens.X, kB * T / bath.omega**2), (ens.P, kB * T * np.ones(4))):
        var = arr.var(axis=0, ddof=1)  # (modes, 3)
        # standard error of a Gaussian sample variance is sigma^2 sqrt(2/(n-1))
        se = target[:, None] * math.sqrt(2.0 / (n - 1))
        assert np.max(np.abs(var - target[:, None]) / se) < 4.0
        assert np.max(np.abs(arr.mean(axis=0)) / np.sqrt(target[:, None] / n)) < 4.5


def test_noise_force_trivial_cases():
    sp = CurvedSpace(lam=0.5)
    bath = rv.discretize_bath(rv.Lorentz(), n_modes=10, verify=False)
    rest = rv.BathState.at_rest(bath)
    np.testing.assert_array_equal(rv.noise_force(sp, [0.3, 0.1], bath, rest, 1.7), 0.0)
    with pytest.raises(ValueError):
        rv.noise_force(sp, [0.3, 0.1], bath, rv.BathState(np.zeros((3, 3)), np.zeros((3, 3))), 0.0)


def test_noise_force_one_mode_at_origin():
    sp = CurvedSpace(lam=0.8)
    bath = rv.BathDiscretization(np.array([1.5]), np.array([0.4]), np.array([1.0]), 3.0)
    X0 = np.array([[0.2, -0.7, 0.5]])
    P0 = np.array([[1.1, 0.3, -0.2]])
    t = 0.9
    got = rv.noise_force(sp, [0.0, 0.0], bath, rv.BathState(X0, P0), t)
    w, c = 1.5, 0.4
    expected = -(P0[0, :2] * math.cos(w * t) - w * X0[0, :2] * math.sin(w * t)) * c
    np.testing.assert_allclose(got, expected, atol=1e-15)


def test_noise_field_is_time_integral_of_source_rate():
    sp = CurvedSpace(lam=0.4)
    bath = rv.discretize_bath(rv.Lorentz(), n_modes=30, verify=False)
    st0 = rv.sample_thermal(bath, 1.0, seed=3)
    x = np.array([0.3, 0.6])
    h = 1e-5
    fd = (rv.noise_field(sp, x, bath, st0, 1.0 + h) - rv.noise_field(sp, x, bath, st0, 1.0 - h)) / (2 * h)
    sdot = rv.noise_source_rate(bath, st0, 1.0)
    np.testing.assert_allclose(fd, vielbein(sp, x).T @ sdot, rtol=1e-7, atol=1e-9)


def test_noise_covariance_matches_fdt_kernel_side():
    m = rv.Lorentz(1.0, 1.0, 0.2)
    bath = rv.discretize_bath(m, n_modes=400, verify=False)
    sp = CurvedSpace(lam=0.3)
    x = np.array([0.5, -0.3])
    tau = np.array([0.0, 0.5, 1.0, 2.0])
    cov = rv.noise_covariance(sp, x, bath, tau, 1.0)
    kern = rv.kernel_from_model(m, 0.005, 2.0, omega_max=bath.omega_max)
    k = kern.noise_correlation(float(bath.noise_correlation(0.0)[0]), tau)
    np.testing.assert_allclose(cov, k[:, None, None] * metric(sp, x)[None], rtol=1e-4, atol=1e-6)


def test_noise_statistics_within_three_sigma():
    sp = CurvedSpace(lam=0.3)
    bath = rv.discretize_bath(rv.Lorentz(1.0, 1.0, 0.2), n_modes=200, verify=False)
    stats = rv.noise_statistics(sp, [0.5, -0.3], bath, [0.0, 1.0], 1.0, seed=11, replicas=4000)
    assert np.max(stats.z_scores()) < 3.5


def test_noise_stationarity():
    # <R(t0 + tau) R(t0)> does not depend on t0
    sp = CurvedSpace(lam=0.3)
    bath = rv.discretize_bath(rv.Lorentz(1.0, 1.0, 0.2), n_modes=100, verify=False)
    x = np.broadcast_to([0.5, -0.3], (4000, 2))
    ens = rv.sample_thermal_ensemble(bath, 1.0, 21, 4000)
    tau = 0.7
    means, errs = [], []
    for t0 in (0.0, 3.0):
        a = rv.noise_field(sp, x, bath, ens, t0 + tau)[:, 0] * rv.noise_field(sp, x, bath, ens, t0)[:, 0]
        means.append(a.mean())
        errs.append(a.std(ddof=1) / math.sqrt(a.size))
    assert abs(means[0] - means[1]) < 3 * math.hypot(*errs)


@given(st.floats(0.01, 30.0), st.floats(0.1, 5), st.floats(0.1, 5), st.floats(0.01, 2))
def test_passivity_lorentz(w, strength, res, damp):
    m = rv.Lorentz(strength, res, damp)
    assert m.im_chi(w) >= 0
    assert np.isfinite(rv.coupling_f(m, w)) and rv.coupling_f(m, w) >= 0


@given(st.floats(0.0, 50.0), st.floats(0.01, 3), st.floats(0.5, 30))
def test_drude_friction_spectrum_finite(w, eta, wc):
    m = rv.OhmicDrude(eta, wc)
    assert 0 < m.friction_spectrum(w) <= eta
