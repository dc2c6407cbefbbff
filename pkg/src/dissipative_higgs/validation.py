"""Release-gate checks run by ``dissipative-higgs validate``.

Each check returns a :class:`Check` with a measured value and the bound it
was held to.  Module functions are looked up through their modules at call
time so a test can patch, say, ``reservoir.kernel_from_model`` and watch
the dependent checks fail.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import dynamics, geometry, reservoir, spectra
from .geometry import CurvedSpace


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    bound: float
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<32s} value={self.value:.3e} bound={self.bound:.1e} {self.detail}".rstrip()


def _check(name, value, bound, detail=""):
    value = float(value)
    return Check(name, bool(np.isfinite(value) and value <= bound), value, bound, detail)


def geometry_inverse(seed=0, n=10_000):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for lam in rng.uniform(0, 4, 8):
        x = rng.uniform(-3, 3, (n // 8, 2))
        x *= np.minimum(1.0, 3.0 / np.linalg.norm(x, axis=1))[:, None]
        sp = CurvedSpace(lam=lam)
        prod = geometry.metric(sp, x) @ geometry.inverse_metric(sp, x)
        worst = max(worst, float(np.max(np.abs(prod - np.eye(2)))))
    return _check("geometry: g g^-1 = I", worst, 1e-12)


def geometry_vielbein(seed=1, n=10_000):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for lam in rng.uniform(0, 4, 8):
        x = rng.uniform(-3, 3, (n // 8, 2))
        x *= np.minimum(1.0, 3.0 / np.linalg.norm(x, axis=1))[:, None]
        sp = CurvedSpace(lam=lam)
        a = geometry.vielbein(sp, x)
        ata = np.swapaxes(a, -1, -2) @ a
        worst = max(worst, float(np.max(np.abs(ata - geometry.metric(sp, x)))))
    return _check("geometry: a^T a = g", worst, 1e-12)


def rectilinear_motion(dt=1e-4):
    sp = CurvedSpace(lam=1.0)
    pot = dynamics.Free()
    x = np.array([[0.0, 0.0]])
    v = np.array([[1.0, 0.0]])
    worst_y = worst_speed = 0.0
    acc = None
    while x[0, 0] < 2.5:
        x, v, acc = dynamics.conservative_step(sp, pot, x, v, dt, acc)
        worst_y = max(worst_y, abs(x[0, 1]))
        expected = 1.0 + sp.lam * x[0, 0] ** 2
        worst_speed = max(worst_speed, abs(np.hypot(*v[0]) / expected - 1.0))
    return _check("dynamics: rectilinear geodesic", max(worst_y / 1e-9, worst_speed / 1e-6), 1.0,
                  f"|x2|={worst_y:.1e} speed={worst_speed:.1e}")


def angular_momentum(steps=5000):
    sp = CurvedSpace(lam=0.7)
    cfg = dynamics.SimConfig(dt=2e-3, steps=steps, scheme="conservative", stride=50)
    tr = dynamics.run(sp, dynamics.Harmonic(1.0), cfg, [0.8, 0.1], [0.1, 0.6])
    L = tr.ang[:, 0]
    return _check("dynamics: angular momentum", np.max(np.abs(L - L[0])) / abs(L[0]), 1e-6)


def conservative_limits():
    """gamma = 0 Langevin equals the conservative step; lam = 0 kills curvature."""
    sp = CurvedSpace(lam=0.4)
    pot = dynamics.Harmonic(1.0)
    cfg_c = dynamics.SimConfig(dt=1e-2, steps=300, scheme="conservative")
    cfg_a = dynamics.SimConfig(dt=1e-2, steps=300, scheme="routeA")
    zero = reservoir.MemoryKernel(1e-2, np.zeros(301), np.zeros(301), source="zero")
    a = dynamics.run(sp, pot, cfg_c, [0.7, 0.2], [0.0, 0.5])
    b = dynamics.run(sp, pot, cfg_a, [0.7, 0.2], [0.0, 0.5], kernel=zero)
    dev = float(np.max(np.abs(a.x - b.x)) + np.max(np.abs(a.v - b.v)))
    flat = CurvedSpace(lam=0.0)
    rng = np.random.default_rng(3)
    x = rng.normal(size=(100, 2))
    v = rng.normal(size=(100, 2))
    curv = float(np.max(np.abs(geometry.geodesic_acceleration(flat, x, v))))
    curv = max(curv, float(np.max(np.abs(geometry.metric(flat, x) - np.eye(2)))))
    return _check("limits: gamma->0 and lambda->0", max(dev / 1e-12, curv / 1e-14), 1.0,
                  f"route A vs conservative={dev:.1e} flat curvature={curv:.1e}")


def kramers_kronig_closure():
    model = reservoir.Lorentz(1.0, 1.0, 0.2)
    u = np.linspace(0.0, 50.0, 25001)
    w = np.concatenate([np.linspace(0.1, 0.9, 81), np.linspace(1.1, 4.0, 291)])
    kk = reservoir.kramers_kronig_re(u, model.im_chi(u), w)
    exact = model.re_chi(w)
    return _check("reservoir: Kramers-Kronig", np.max(np.abs(kk.re - exact) / np.abs(exact)), 1e-2)


def kernel_quadrature():
    model = reservoir.Lorentz(1.0, 1.0, 0.2)
    kern = reservoir.kernel_from_model(model, 0.02, 10.0, omega_max=400.0)
    exact = model.kernel_exact(kern.t)
    return _check("reservoir: kernel vs closed form", np.max(np.abs(kern.gamma - exact)), 1e-4)


def bath_reconstruction():
    bath = reservoir.discretize_bath(reservoir.OhmicDrude(0.5, 10.0), n_modes=400, verify=True)
    return _check("reservoir: bath reconstruction", bath.reconstruction_error, 1e-3,
                  f"horizon={bath.reconstruction_horizon:g}")


def fluctuation_dissipation(replicas=4000, seed=5):
    """Sampled noise covariance against the kernel-side prediction ``g kT (K0 - int gamma)``."""
    model = reservoir.Lorentz(1.0, 1.0, 0.2)
    sp = CurvedSpace(lam=0.3)
    x = np.array([0.5, -0.3])
    bath = reservoir.discretize_bath(model, n_modes=400, verify=False)
    lags = np.array([0.0, 0.5, 1.0, 2.0])
    stats = reservoir.noise_statistics(sp, x, bath, lags, 1.0, seed, replicas)
    kern = reservoir.kernel_from_model(model, 0.01, 2.0, omega_max=bath.omega_max)
    k = kern.noise_correlation(float(bath.noise_correlation(0.0)[0]), lags)
    prediction = k[:, None, None] * geometry.metric(sp, x)[None]
    z = float(np.max(stats.z_scores(prediction)))
    return _check("reservoir: fluctuation-dissipation", z, 3.0, "max |z|")


def energy_conservation(steps=4000, dt=2e-3):
    sp = CurvedSpace(lam=0.5)
    bath = reservoir.discretize_bath(reservoir.OhmicDrude(0.2, 5.0), n_modes=200, verify=False)
    cfg = dynamics.SimConfig(dt=dt, steps=steps, scheme="routeB", stride=100)
    tr = dynamics.run(sp, dynamics.Harmonic(1.0), cfg, [1.0, 0.0], [0.0, 0.8], bath=bath)
    e = tr.e_tot[:, 0]
    return _check("dynamics: route B energy", np.max(np.abs(e - e[0])) / abs(e[0]), 1e-5)


def _spectrum(n_max, lam):
    basis = spectra.FockBasis2D(n_max)
    eig = spectra.diagonalize(spectra.build_higgs_hamiltonian(basis, lam), basis, lam)
    return basis, eig


def flat_spectrum():
    _, eig = _spectrum(20, 0.0)
    ref = np.array([1.0, 2.0, 2.0, 3.0, 3.0, 3.0])
    return _check("spectra: flat levels", np.max(np.abs(eig.energies[:6] - ref)), 1e-10)


def degeneracy(n_max=30, lam=0.05):
    _, eig = _spectrum(n_max, lam)
    spread = max(eig.multiplet_spread(k) for k in range(6))
    return _check("spectra: multiplet degeneracy", spread, 1e-6, f"lambda={lam}")


def _allowed(eig, terms, m):
    V, Vp = spectra._all_elements(eig, terms, m)
    W2 = np.abs(V + terms.lam * Vp) ** 2
    same = eig.parity == eig.parity[m]
    forbidden = np.concatenate([W2[:2, same].ravel(), W2[2, ~same].ravel()])
    allowed = np.concatenate([W2[:2, ~same].ravel(), W2[2, same].ravel()])
    return forbidden, allowed


def parity_selection(lam=0.05):
    basis = spectra.FockBasis2D(20)
    eig = spectra.diagonalize(spectra.build_higgs_hamiltonian(basis, lam), basis, lam)
    terms = spectra.vielbein_operator_terms(basis, lam)
    worst = 0.0
    for m in (0, 1, 3):
        forbidden, allowed = _allowed(eig, terms, m)
        worst = max(worst, float(forbidden.max() / allowed.max()))
    return _check("spectra: parity selection", worst, 1e-12)


def prefactor_closure(t=200.0):
    basis = spectra.FockBasis2D(12)
    lam = 0.0
    eig = spectra.diagonalize(spectra.build_higgs_hamiltonian(basis, lam), basis, lam)
    terms = spectra.vielbein_operator_terms(basis, lam)
    req = spectra.RateRequest(0, lam, spectra.Fixed(1.0), spectra.Gaussian(0.05),
                              reservoir.OhmicDrude(0.5, 10.0))
    table = spectra.golden_rule_rates(req, eig, terms)
    gamma_t = t * sum(r.gamma_abs + r.gamma_emit for r in table.rows) / float(req.line_shape(0.0))
    omega = np.linspace(0.25, 1.75, 30001)
    prob = np.trapezoid(spectra.time_dependent_probability(req, eig, terms, t, omega), omega)
    return _check("spectra: golden-rule closure", abs(prob / gamma_t - 1.0), 2e-2)


CHECKS = (
    geometry_inverse,
    geometry_vielbein,
    rectilinear_motion,
    angular_momentum,
    conservative_limits,
    kramers_kronig_closure,
    kernel_quadrature,
    bath_reconstruction,
    fluctuation_dissipation,
    energy_conservation,
    flat_spectrum,
    degeneracy,
    parity_selection,
    prefactor_closure,
)


def run_all(checks=CHECKS):
    results = []
    for fn in checks:
        start = time.perf_counter()
        try:
            res = fn()
        except Exception as exc:  # a crashing check is a failing check
            res = Check(fn.__name__, False, float("nan"), float("nan"), f"error: {exc}")
        res.seconds = time.perf_counter() - start
        results.append(res)
    return results
