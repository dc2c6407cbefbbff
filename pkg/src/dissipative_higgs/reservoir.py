"""Reservoir: susceptibility models, memory kernel, bath discretization, noise.

Conventions
-----------
The reservoir couples to the particle velocity.  Its response is the
susceptibility ``gamma(omega) = int_0^inf gamma(t) exp(i omega t) dt`` and
the coupling density is fixed by ``f(omega)**2 = 2 omega Im gamma / pi``.
The time-domain kernel is

    gamma(t)     = int_0^omax f(w)**2 sin(w t) / w dw
    gamma_dot(t) = int_0^omax f(w)**2 cos(w t) dw

and ``gamma_dot`` is the friction kernel of the Langevin equation.  Every
model therefore exposes ``friction_spectrum(w) = w Im gamma(w)``, which is
finite at ``w = 0`` for all supported families and is what the quadratures
integrate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import quad_vec
from scipy.special import roots_legendre

from . import geometry
from .errors import QuadratureError, ReconstructionError

__all__ = [
    "SusceptibilityModel",
    "Lorentz",
    "OhmicDrude",
    "Tabulated",
    "load_tabulated",
    "im_chi",
    "coupling_f",
    "MemoryKernel",
    "kernel_from_model",
    "KKResult",
    "kramers_kronig_re",
    "BathDiscretization",
    "discretize_bath",
    "BathState",
    "replica_generator",
    "sample_thermal",
    "sample_thermal_ensemble",
    "noise_field",
    "noise_force",
    "noise_covariance",
]


class SusceptibilityModel:
    """Interface shared by the analytic and tabulated models."""

    #: characteristic frequency used to pick the default quadrature cut-off
    spectral_scale: float = 1.0

    def im_chi(self, omega):
        raise NotImplementedError

    def friction_spectrum(self, omega):
        """``omega * Im gamma(omega)``; the real part of the friction kernel."""
        raise NotImplementedError

    def re_chi(self, omega):
        """Analytic real part, or ``None`` when no closed form exists."""
        return None

    def spectral_density(self, omega):
        """``J(omega) = omega**2 Im gamma(omega)``."""
        omega = _nonneg(omega)
        return omega * self.friction_spectrum(omega)

    def default_omega_max(self) -> float:
        return 8.0 * self.spectral_scale

    def describe(self) -> dict:
        raise NotImplementedError


def _nonneg(omega):
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0) or np.any(~np.isfinite(omega)):
        raise ValueError("frequency must be finite and >= 0")
    return omega


@dataclass(frozen=True)
class Lorentz(SusceptibilityModel):
    """Single damped resonance, ``gamma(w) = wp2 / (w0**2 - w**2 - i G w)``."""

    strength: float = 1.0
    resonance: float = 1.0
    damping: float = 0.1

    def __post_init__(self):
        if not (self.strength > 0 and self.resonance > 0 and self.damping > 0):
            raise ValueError("Lorentz parameters must all be > 0")

    @property
    def spectral_scale(self):
        return max(self.resonance, self.damping)

    def _den(self, omega):
        return (self.resonance**2 - omega**2) ** 2 + (self.damping * omega) ** 2

    def im_chi(self, omega):
        omega = _nonneg(omega)
        return self.strength * self.damping * omega / self._den(omega)

    def friction_spectrum(self, omega):
        omega = _nonneg(omega)
        return self.strength * self.damping * omega**2 / self._den(omega)

    def re_chi(self, omega):
        omega = _nonneg(omega)
        return self.strength * (self.resonance**2 - omega**2) / self._den(omega)

    def kernel_exact(self, t):
        """Closed-form ``gamma(t)`` of the untruncated model (underdamped)."""
        t = np.asarray(t, dtype=float)
        half = 0.5 * self.damping
        freq = math.sqrt(self.resonance**2 - half**2)
        out = self.strength * np.exp(-half * t) * np.sin(freq * t) / freq
        return np.where(t > 0, out, 0.0)

    def describe(self):
        return {
            "type": "lorentz",
            "strength": self.strength,
            "resonance": self.resonance,
            "damping": self.damping,
        }


@dataclass(frozen=True)
class OhmicDrude(SusceptibilityModel):
    """Ohmic reservoir with a Drude cut-off.

    Parametrised by the spectral density ``J(w) = eta w / (1 + (w/wc)**2)``,
    so the friction kernel is ``gamma_dot(t) = eta wc exp(-wc t)`` and a
    particle feels the Markovian friction ``eta`` when ``wc`` is large.
    In the susceptibility language this is ``Im gamma = J / w**2``.
    """

    eta: float = 0.5
    omega_c: float = 10.0

    def __post_init__(self):
        if not (self.eta > 0 and self.omega_c > 0):
            raise ValueError("OhmicDrude parameters must be > 0")

    @property
    def spectral_scale(self):
        return self.omega_c

    def spectral_density(self, omega):
        omega = _nonneg(omega)
        return self.eta * omega / (1.0 + (omega / self.omega_c) ** 2)

    def friction_spectrum(self, omega):
        omega = _nonneg(omega)
        return self.eta / (1.0 + (omega / self.omega_c) ** 2)

    def im_chi(self, omega):
        omega = _nonneg(omega)
        with np.errstate(divide="ignore"):
            return self.friction_spectrum(omega) / omega

    def re_chi(self, omega):
        omega = _nonneg(omega)
        return -self.eta * self.omega_c / (self.omega_c**2 + omega**2)

    def kernel_exact(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t > 0, self.eta * (1.0 - np.exp(-self.omega_c * t)), 0.0)

    def kernel_dot_exact(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0, self.eta * self.omega_c * np.exp(-self.omega_c * t), 0.0)

    def describe(self):
        return {"type": "ohmic_drude", "eta": self.eta, "omega_c": self.omega_c}


@dataclass(frozen=True)
class Tabulated(SusceptibilityModel):
    """``Im gamma`` given on a grid; linear interpolation, zero outside."""

    omega: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    source: str = ""

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if w.ndim != 1 or w.shape != v.shape or w.size < 2:
            raise ValueError("tabulated susceptibility needs matching 1-D grids (>= 2 points)")
        if np.any(w < 0) or np.any(np.diff(w) <= 0):
            raise ValueError("tabulated frequencies must be >= 0 and strictly increasing")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("tabulated Im gamma must be finite and >= 0")
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "values", v)

    @property
    def spectral_scale(self):
        return float(self.omega[-1]) / 8.0

    def default_omega_max(self):
        return float(self.omega[-1])

    def im_chi(self, omega):
        omega = _nonneg(omega)
        return np.interp(omega, self.omega, self.values, left=0.0, right=0.0)

    def friction_spectrum(self, omega):
        omega = _nonneg(omega)
        return omega * self.im_chi(omega)

    def describe(self):
        return {"type": "tabulated", "file": self.source, "points": int(self.omega.size)}


def load_tabulated(path) -> Tabulated:
    """Read a two-column ``omega  Im_gamma`` text file (``#`` comments)."""
    path = Path(path)
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns, found {data.shape[1]}")
    return Tabulated(data[:, 0], data[:, 1], source=str(path))


def im_chi(model: SusceptibilityModel, omega):
    return model.im_chi(omega)


def coupling_f(model: SusceptibilityModel, omega):
    """Coupling density ``f(w) = sqrt(2 w Im gamma(w) / pi)`` for ``w > 0``."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("coupling_f is defined for omega > 0 only")
    return np.sqrt(2.0 / np.pi * model.friction_spectrum(omega))


# ---------------------------------------------------------------------------
# memory kernel


@dataclass
class MemoryKernel:
    """``gamma(t)`` and ``gamma_dot(t)`` tabulated on ``t = k * dt``.

    Queries at ``t < 0`` return zero (causality).  Off-grid queries are
    linearly interpolated; integrators should request on-grid samples.
    """

    dt: float
    gamma: np.ndarray
    gamma_dot: np.ndarray
    error: float = 0.0
    source: str = ""

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(self.gamma.size)

    @property
    def t_max(self) -> float:
        return self.dt * (self.gamma.size - 1)

    def gamma_at(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t < 0, 0.0, np.interp(t, self.t, self.gamma))

    def gamma_dot_at(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t < 0, 0.0, np.interp(t, self.t, self.gamma_dot))

    def samples(self, dt, n):
        """``gamma_dot(k dt)`` for ``k = 0..n-1``; errors past the horizon."""
        if n > 1 and (n - 1) * dt > self.t_max * (1 + 1e-12):
            raise ValueError(
                f"kernel horizon {self.t_max:g} shorter than requested {(n - 1) * dt:g}"
            )
        if math.isclose(dt, self.dt, rel_tol=1e-12):
            return self.gamma_dot[:n].copy()
        return self.gamma_dot_at(dt * np.arange(n))

    def noise_correlation(self, k0, tau):
        """``K(tau) = K(0) - int_0^tau gamma``: the kernel-side FDT prediction."""
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        t = self.t
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (self.gamma[1:] + self.gamma[:-1]) * self.dt)])
        return k0 - np.interp(np.abs(tau), t, cum)

    @classmethod
    def from_bath(cls, bath: "BathDiscretization", dt, t_max) -> "MemoryKernel":
        t = dt * np.arange(int(round(t_max / dt)) + 1)
        return cls(dt, bath.gamma(t), bath.gamma_dot(t), source="bath mode sum")


def kernel_from_model(model: SusceptibilityModel, dt_kernel, t_max, omega_max=None, tol=1e-10):
    """Adaptive Gauss-Kronrod evaluation of the kernel on ``[0, t_max]``.

    Raises :class:`QuadratureError` (carrying the achieved estimate) when the
    subdivision limit is hit before the requested tolerance.
    """
    if not dt_kernel > 0 or not t_max > 0:
        raise ValueError("dt_kernel and t_max must be > 0")
    omega_max = model.default_omega_max() if omega_max is None else float(omega_max)
    n = int(round(t_max / dt_kernel)) + 1
    t = dt_kernel * np.arange(n)
    scale = 2.0 / np.pi

    def integrand(w):
        h = scale * model.friction_spectrum(w)
        # sin(w t)/w written through sinc so that w = 0 is harmless
        return h * np.concatenate([t * np.sinc(w * t / np.pi), np.cos(w * t)])

    peak = scale * float(np.max(model.friction_spectrum(np.linspace(0, omega_max, 257))))
    epsabs = tol * max(peak * omega_max, 1e-300)
    res, err, info = quad_vec(
        integrand, 0.0, omega_max, epsabs=epsabs, epsrel=tol, limit=50000, full_output=True
    )
    if info.status != 0 or err > 100 * max(epsabs, tol * float(np.max(np.abs(res)))):
        raise QuadratureError(
            f"kernel quadrature did not converge (status {info.status}, error {err:.3e})",
            achieved_error=float(err),
        )
    gamma = res[:n]
    gamma[0] = 0.0
    return MemoryKernel(dt_kernel, gamma, res[n:], error=float(err), source="quadrature")


# ---------------------------------------------------------------------------
# Kramers-Kronig


@dataclass
class KKResult:
    omega: np.ndarray
    re: np.ndarray
    tail_estimate: float


def kramers_kronig_re(omega, im_values, eval_omega=None) -> KKResult:
    """Real part from ``Im gamma`` samples by principal-value quadrature.

    ``Re gamma(w) = (2/pi) P int_0^W u Im(u) / (u**2 - w**2) du`` with the
    pole at ``u = w`` removed by subtracting ``h(w)`` and adding the
    logarithm analytically.  ``tail_estimate`` bounds the neglected
    ``u > W`` contribution assuming ``u Im(u)`` no longer grows there.

    The grid must start at 0 and should be uniform enough for trapezoidal
    integration; ``im_values`` may be infinite at ``omega = 0``.
    """
    u = np.asarray(omega, dtype=float)
    im = np.asarray(im_values, dtype=float)
    if u.ndim != 1 or u.shape != im.shape or u.size < 4:
        raise ValueError("omega and im_values must be matching 1-D arrays")
    if u[0] != 0 or np.any(np.diff(u) <= 0):
        raise ValueError("grid must start at 0 and increase strictly")
    top = u[-1]
    with np.errstate(invalid="ignore"):
        h = u * im
    if not np.isfinite(h[0]):
        h[0] = h[1] + (h[1] - h[2]) * u[1] / (u[2] - u[1])
    dh = np.gradient(h, u)

    if eval_omega is None:
        w_all = u[1:-1]
    else:
        w_all = np.atleast_1d(np.asarray(eval_omega, dtype=float))
        if np.any(w_all < 0) or np.any(w_all >= top):
            raise ValueError("evaluation points must lie in [0, omega_max)")

    out = np.empty_like(w_all)
    tails = np.empty_like(w_all)
    h_top = h[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        g0 = h / u**2
    g0[0] = 2 * g0[1] - g0[2]
    zero = w_all <= 1e-9 * top
    out[zero] = np.trapezoid(g0, u)
    tails[zero] = h_top / top
    idx = np.flatnonzero(~zero)
    # evaluation points in blocks keep the (block, grid) work arrays small
    block = max(1, 2_000_000 // u.size)
    for lo in range(0, idx.size, block):
        sel = idx[lo : lo + block]
        w = w_all[sel][:, None]
        hw = np.interp(w_all[sel], u, h)[:, None]
        diff = u[None, :] - w
        hit = np.abs(diff) < 1e-12 * top
        with np.errstate(divide="ignore", invalid="ignore"):
            reg = (h[None, :] - hw) / diff
        reg[hit] = np.broadcast_to(np.interp(w_all[sel], u, dh)[:, None], reg.shape)[hit]
        wf = w[:, 0]
        minus = np.trapezoid(reg, u, axis=1) + hw[:, 0] * np.log((top - wf) / wf)
        plus = np.trapezoid(h[None, :] / (u[None, :] + w), u, axis=1)
        out[sel] = (minus - plus) / (2.0 * wf)
        tails[sel] = h_top * np.log((top + wf) / (top - wf)) / (2.0 * wf)
    return KKResult(w_all, (2.0 / np.pi) * out, float((2.0 / np.pi) * np.max(np.abs(tails))))


# ---------------------------------------------------------------------------
# discretized bath


@dataclass
class BathDiscretization:
    """Gauss-Legendre quadrature realisation of the oscillator continuum."""

    omega: np.ndarray
    coupling: np.ndarray
    weights: np.ndarray
    omega_max: float
    model: dict = field(default_factory=dict)
    reconstruction_error: float | None = None
    reconstruction_horizon: float | None = None

    @property
    def size(self) -> int:
        return int(self.omega.size)

    def gamma(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        c2w = self.coupling**2 / self.omega
        out = np.sin(np.outer(t, self.omega)) @ c2w
        return np.where(t > 0, out, 0.0)

    def gamma_dot(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.cos(np.outer(t, self.omega)) @ self.coupling**2
        return np.where(t >= 0, out, 0.0)

    def noise_correlation(self, tau):
        """Mode-sum ``K(tau) = sum c**2 cos(w tau) / w**2``."""
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        return np.cos(np.outer(tau, self.omega)) @ (self.coupling / self.omega) ** 2

    def describe(self) -> dict:
        return {
            "n_modes": self.size,
            "omega_max": self.omega_max,
            "quadrature": "gauss-legendre",
            "model": self.model,
            "reconstruction_error": self.reconstruction_error,
            "reconstruction_horizon": self.reconstruction_horizon,
        }


def discretize_bath(model, n_modes=400, omega_max=None, t_max=None, tolerance=1e-3, verify=True):
    """Place ``n_modes`` oscillators on Gauss-Legendre nodes of ``[0, omega_max]``.

    With ``verify`` the mode sum ``sum c**2 sin(w t)/w`` is compared with
    :func:`kernel_from_model` on ``[0, t_max]`` (default ``n_modes /
    omega_max``, well inside the horizon a Gauss-Legendre rule of this size
    resolves) and :class:`ReconstructionError` is raised above
    ``tolerance`` (relative sup-norm).
    """
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    omega_max = model.default_omega_max() if omega_max is None else float(omega_max)
    if not omega_max > 0:
        raise ValueError("omega_max must be > 0")
    nodes, wts = roots_legendre(n_modes)
    omega = 0.5 * omega_max * (nodes + 1.0)
    weights = 0.5 * omega_max * wts
    coupling = coupling_f(model, omega) * np.sqrt(weights)
    bath = BathDiscretization(omega, coupling, weights, omega_max, model.describe())
    if verify:
        horizon = n_modes / omega_max if t_max is None else float(t_max)
        dt = horizon / 400.0
        ref = kernel_from_model(model, dt, horizon, omega_max=omega_max)
        err = reconstruction_error(bath, ref)
        bath.reconstruction_error = err
        bath.reconstruction_horizon = horizon
        if err > tolerance:
            raise ReconstructionError(
                f"{n_modes} modes reproduce gamma(t) on [0, {horizon:g}] only to "
                f"{err:.2e} (tolerance {tolerance:.1e})",
                achieved_error=err,
            )
    return bath


def reconstruction_error(bath: BathDiscretization, kernel: MemoryKernel) -> float:
    approx = bath.gamma(kernel.t)
    scale = float(np.max(np.abs(kernel.gamma)))
    return float(np.max(np.abs(approx - kernel.gamma)) / scale) if scale > 0 else float(
        np.max(np.abs(approx))
    )


# ---------------------------------------------------------------------------
# thermal state and noise


@dataclass
class BathState:
    """Mode amplitudes ``X`` and momenta ``P``, shape ``(..., n_modes, 3)``."""

    X: np.ndarray
    P: np.ndarray

    def copy(self):
        return BathState(self.X.copy(), self.P.copy())

    @classmethod
    def at_rest(cls, bath, replicas=None):
        shape = (bath.size, 3) if replicas is None else (replicas, bath.size, 3)
        return cls(np.zeros(shape), np.zeros(shape))


def replica_generator(seed: int, replica: int = 0, stream: int = 0) -> np.random.Generator:
    """Counter-based (Philox) generator for one replica.

    Keyed by ``(seed, stream, replica)`` so any replica can be regenerated
    on its own, whatever the order or chunking of an ensemble run.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(replica)))
    return np.random.Generator(np.random.Philox(ss))


def sample_thermal(bath: BathDiscretization, temperature, seed, replica=0, kB=1.0) -> BathState:
    """Classical Gibbs state of the free modes at ``temperature``.

    ``Var X = kB T / w**2`` and ``Var P = kB T`` per Cartesian component.
    """
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    if temperature == 0:
        return BathState.at_rest(bath)
    z = replica_generator(seed, replica).standard_normal((2, bath.size, 3))
    sd = math.sqrt(kB * temperature)
    return BathState(z[0] * (sd / bath.omega)[:, None], z[1] * sd)


def sample_thermal_ensemble(bath, temperature, seed, replicas, kB=1.0, start=0) -> BathState:
    """Stack of :func:`sample_thermal` draws for replicas ``start .. start+replicas-1``."""
    X = np.zeros((replicas, bath.size, 3))
    P = np.zeros_like(X)
    if temperature > 0:
        for i in range(replicas):
            s = sample_thermal(bath, temperature, seed, start + i, kB)
            X[i] = s.X
            P[i] = s.P
    elif temperature < 0:
        raise ValueError("temperature must be >= 0")
    return BathState(X, P)


def _mode_sum(coef, arr):
    # sum over the mode axis (-2); plain axis reduction keeps each replica's
    # arithmetic independent of how many replicas share the array
    return (coef[:, None] * arr).sum(axis=-2)


def noise_field(space, x, bath, state0: BathState, t):
    """Free-bath field ``R^N_alpha(t) = a_{j alpha}(x) S^N_j(t)``."""
    wt = bath.omega * t
    s = _mode_sum(bath.coupling * np.sin(wt) / bath.omega, state0.P) + _mode_sum(
        bath.coupling * np.cos(wt), state0.X
    )
    a = geometry.vielbein(space, x)
    return np.einsum("...ia,...i->...a", a, s)


def noise_source_rate(bath, state0: BathState, t):
    """``dS^N/dt`` in the embedding frame, shape ``(..., 3)``."""
    wt = bath.omega * t
    return _mode_sum(bath.coupling * np.cos(wt), state0.P) - _mode_sum(
        bath.coupling * bath.omega * np.sin(wt), state0.X
    )


def noise_force(space, x, bath, state0: BathState, t):
    """Stochastic force ``xi^N = -g^-1 dR^N/dt`` (time derivative at fixed ``x``)."""
    if state0.X.shape[-2] != bath.size:
        raise ValueError("bath state and discretization disagree on the mode count")
    sdot = noise_source_rate(bath, state0, t)
    a = geometry.vielbein(space, x)
    rdot = np.einsum("...ia,...i->...a", a, sdot)
    return -np.einsum("...ab,...b->...a", geometry.inverse_metric(space, x), rdot)


def noise_covariance(space, x, bath, tau, temperature, kB=1.0):
    """Thermal prediction ``<R^N_a(t+tau) R^N_b(t)> = kB T g_ab(x) K(tau)``."""
    g = geometry.metric(space, x)
    k = bath.noise_correlation(tau)
    return kB * temperature * k[:, None, None] * g[None]


@dataclass
class NoiseStatistics:
    """Sampled ``<R_a(tau) R_b(0)>`` with standard errors, shape ``(lags, 2, 2)``."""

    lags: np.ndarray
    empirical: np.ndarray
    stderr: np.ndarray
    analytic: np.ndarray
    replicas: int

    def z_scores(self, reference=None) -> np.ndarray:
        ref = self.analytic if reference is None else reference
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.abs(self.empirical - ref) / self.stderr
        return np.where(self.stderr > 0, z, np.where(self.empirical == ref, 0.0, np.inf))


def noise_statistics(space, x, bath, lags, temperature, seed, replicas, kB=1.0, chunk=500):
    """Monte Carlo covariance of the free-bath field at fixed ``x``.

    Each replica is one thermal draw of the modes; products
    ``R_a(tau) R_b(0)`` are averaged over replicas in fixed-size chunks so
    memory stays bounded and the result does not depend on ``chunk``
    beyond floating-point summation order within a chunk.
    """
    x = np.asarray(x, dtype=float)
    lags = np.atleast_1d(np.asarray(lags, dtype=float))
    s1 = np.zeros((lags.size, 2, 2))
    s2 = np.zeros_like(s1)
    for lo in range(0, replicas, chunk):
        n = min(chunk, replicas - lo)
        state = sample_thermal_ensemble(bath, temperature, seed, n, kB=kB, start=lo)
        xs = np.broadcast_to(x, (n, 2))
        r0 = noise_field(space, xs, bath, state, 0.0)
        for k, tau in enumerate(lags):
            rt = noise_field(space, xs, bath, state, tau)
            prod = rt[:, :, None] * r0[:, None, :]
            s1[k] += prod.sum(axis=0)
            s2[k] += (prod**2).sum(axis=0)
    mean = s1 / replicas
    var = np.maximum(s2 / replicas - mean**2, 0.0) * replicas / (replicas - 1)
    stderr = np.sqrt(var / replicas)
    analytic = noise_covariance(space, x, bath, lags, temperature, kB)
    return NoiseStatistics(lags, mean, stderr, analytic, replicas)
