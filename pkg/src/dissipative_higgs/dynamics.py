"""Time integration of the dissipative particle on the sphere.

Three schemes share one conservative core:

``conservative``
    Geodesic motion plus central force, no reservoir.
``routeA``
    Generalized Langevin equation in the tangent plane: trapezoidal memory
    convolution with ``gamma_dot`` and the mode-sum noise force.
``routeB``
    The particle and every discretized bath mode integrated together.  The
    total Hamiltonian is split into the free-bath part (exact rotation) and
    the particle part; in velocity variables the latter is the conservative
    flow, during which each mode momentum picks up ``c_k`` times the
    displacement of the embedding point.

All state arrays carry a leading replica axis, so ensembles advance in
lock-step; each replica's arithmetic is independent of its neighbours.

The conservative core is a velocity-Verlet step whose two half-kicks treat
the curvature term as the symmetric bilinear form ``G(x; v_old, v_new)``.
That makes each half-kick a 2x2 linear solve (done in closed form) and the
whole step time-reversible and second order.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import geometry, reservoir
from .errors import (
    ChartOverflowError,
    HistoryError,
    HiggsError,
    InstabilityError,
    StepError,
)
from .geometry import CurvedSpace

__all__ = [
    "Free",
    "Harmonic",
    "CoulombLike",
    "potential_acceleration",
    "conservative_rhs",
    "conservative_step",
    "step_microscopic",
    "MemoryHistory",
    "step_langevin",
    "energy_system",
    "energy_total_microscopic",
    "angular_momentum",
    "SimConfig",
    "Trajectory",
    "run",
]

SCHEMES = ("conservative", "routeA", "routeB")


# ---------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class Free:
    def value(self, r, mass=1.0):
        return np.zeros_like(np.asarray(r, dtype=float))

    def dvdr(self, r, mass=1.0):
        return np.zeros_like(np.asarray(r, dtype=float))

    def dvdr_over_r(self, r2, mass=1.0):
        return np.zeros_like(np.asarray(r2, dtype=float))

    def describe(self):
        return {"type": "free"}


@dataclass(frozen=True)
class Harmonic:
    """``V = m w0**2 r**2 / 2`` in the gnomonic radius (the Higgs oscillator)."""

    omega0: float = 1.0

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValueError("omega0 must be > 0")

    def value(self, r, mass=1.0):
        return 0.5 * mass * self.omega0**2 * np.asarray(r, dtype=float) ** 2

    def dvdr(self, r, mass=1.0):
        return mass * self.omega0**2 * np.asarray(r, dtype=float)

    def dvdr_over_r(self, r2, mass=1.0):
        return np.full_like(np.asarray(r2, dtype=float), mass * self.omega0**2)

    def describe(self):
        return {"type": "harmonic", "omega0": self.omega0}


@dataclass(frozen=True)
class CoulombLike:
    """``V = -alpha / r``; trajectories closer than ``r_min`` abort."""

    alpha: float = 1.0
    r_min: float = 1e-9

    def value(self, r, mass=1.0):
        return -self.alpha / np.asarray(r, dtype=float)

    def dvdr(self, r, mass=1.0):
        return self.alpha / np.asarray(r, dtype=float) ** 2

    def dvdr_over_r(self, r2, mass=1.0):
        r2 = np.asarray(r2, dtype=float)
        if np.any(r2 < self.r_min**2):
            raise InstabilityError(f"entered the Coulomb core r < {self.r_min:g}")
        return self.alpha / r2**1.5

    def describe(self):
        return {"type": "coulomb", "alpha": self.alpha}


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def potential_acceleration(space: CurvedSpace, potential, x):
    """``-(Lambda**4 / (m r)) dV/dr x``: the central force mapped by ``g^-1``."""
    r2 = _dot(x, x)
    big2 = 1.0 + space.lam * r2
    coef = big2**2 * potential.dvdr_over_r(r2, space.mass) / space.mass
    return -coef[..., None] * x


def conservative_rhs(space: CurvedSpace, potential, x, v):
    geometry.check_chart(space, x)
    return geometry.geodesic_acceleration(space, x, v) + potential_acceleration(space, potential, x)


def _half_kick(space, x, v, acc, h, damp=0.0):
    """Solve ``w = v + h/2 [G(x; v, w) + acc - damp * w]`` for ``w``.

    ``damp`` is the implicit coefficient of the newest memory sample.
    """
    half = 0.5 * h
    c = half * space.lam / (1.0 + space.lam * _dot(x, x))
    xv = _dot(x, v)
    alpha = 1.0 + half * damp - c * xv
    b = v + half * acc
    xb = _dot(x, b)
    k = c * xb / (alpha * (alpha - c * xv))
    return b / alpha[..., None] + k[..., None] * v


def conservative_step(space: CurvedSpace, potential, x, v, dt, acc=None):
    """One reversible velocity-Verlet step; returns ``(x', v', acc(x'))``."""
    if acc is None:
        acc = potential_acceleration(space, potential, x)
    vh = _half_kick(space, x, v, acc, dt)
    x1 = x + dt * vh
    geometry.check_chart(space, x1)
    acc1 = potential_acceleration(space, potential, x1)
    v1 = _half_kick(space, x1, vh, acc1, dt)
    return x1, v1, acc1


# ---------------------------------------------------------------------------
# diagnostics


def energy_system(space: CurvedSpace, potential, x, v):
    """``(m/2) v^T g v + V(r)``."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    r2 = _dot(x, x)
    inv2 = 1.0 / (1.0 + space.lam * r2)
    kin = inv2 * (_dot(v, v) - space.lam * inv2 * _dot(x, v) ** 2)
    return 0.5 * space.mass * kin + potential.value(np.sqrt(r2), space.mass)


def bath_energy(bath, state):
    w2 = (bath.omega**2)[:, None]
    return 0.5 * (state.P**2 + w2 * state.X**2).sum(axis=(-2, -1))


def energy_total_microscopic(space, potential, bath, x, v, state):
    """System energy plus free-mode energy; conserved by the exact flow.

    In velocity variables the minimal-coupling Hamiltonian carries no
    separate interaction term.
    """
    return energy_system(space, potential, x, v) + bath_energy(bath, state)


def angular_momentum(space: CurvedSpace, x, v):
    """``m (x1 v2 - x2 v1) / Lambda**2``, conserved by central forces."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    cross = x[..., 0] * v[..., 1] - x[..., 1] * v[..., 0]
    return space.mass * cross / (1.0 + space.lam * _dot(x, x))


# ---------------------------------------------------------------------------
# route B: particle + explicit modes


class _BathRotor:
    """Exact half-step rotation of free modes, with cached trigonometry."""

    def __init__(self, bath, dt):
        self.bath = bath
        wt = 0.5 * dt * bath.omega
        self.cos = np.cos(wt)[:, None]
        self.sin_w = (np.sin(wt) / bath.omega)[:, None]
        self.w_sin = (bath.omega * np.sin(wt))[:, None]
        self.c = bath.coupling

    def rotate(self, state):
        X, P = state.X, state.P
        Xn = self.cos * X + self.sin_w * P
        P *= self.cos
        P -= self.w_sin * X
        X[...] = Xn

    def source(self, state):
        return reservoir._mode_sum(self.c, state.X)


def _pullback(space, x, s):
    """``g^-1 a^T s``: an embedding-frame vector as a tangent-plane one."""
    a = geometry.vielbein(space, x)
    da = np.einsum("...ia,...i->...a", a, s)
    return np.einsum("...ab,...b->...a", geometry.inverse_metric(space, x), da)


def _source_kick(space, x, v, d_source):
    """Velocity after the embedding-frame source ``S`` jumps by ``dS``."""
    return v - _pullback(space, x, d_source) / space.mass


def _micro_step(space, potential, rotor, x, v, state, dt, acc, s_now):
    rotor.rotate(state)
    s_mid = rotor.source(state)
    v = _source_kick(space, x, v, s_mid - s_now)
    q0 = geometry.embed_offset(space, x)
    x, v, acc = conservative_step(space, potential, x, v, dt, acc)
    dq = geometry.embed_offset(space, x) - q0
    state.P += rotor.c[:, None] * dq[..., None, :]
    rotor.rotate(state)
    s_new = rotor.source(state)
    v = _source_kick(space, x, v, s_new - s_mid)
    return x, v, acc, s_new


def step_microscopic(space, potential, bath, x, v, state, dt):
    """Advance particle and modes together by ``dt``.

    Returns ``(x', v', state')``; ``state`` itself is left untouched.
    """
    rotor = _BathRotor(bath, dt)
    state = state.copy()
    s_now = rotor.source(state)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    x1, v1, _, _ = _micro_step(space, potential, rotor, x, v, state, dt, None, s_now)
    return x1, v1, state


class _ModeAmplitudes:
    """Bath modes in the interaction picture, laid out ``(R, 3, N)``.

    ``w = exp(i w t) (w X + i P)`` is constant under the free flow, so the
    exact rotation costs nothing; the particle only enters through the
    momentum jumps ``P += c dq`` applied at the mid-step time.
    """

    def __init__(self, bath, state):
        om = bath.omega
        self.omega = om
        self.c = bath.coupling
        self.c_w = bath.coupling / om
        self.re = np.ascontiguousarray(np.swapaxes(om[:, None] * state.X, -1, -2))
        self.im = np.ascontiguousarray(np.swapaxes(state.P, -1, -2))

    def source(self, t):
        """``S_j(t) = sum_k c_k X_kj(t)``."""
        wt = self.omega * t
        return np.einsum("...k,k->...", self.re, self.c_w * np.cos(wt)) + np.einsum(
            "...k,k->...", self.im, self.c_w * np.sin(wt)
        )

    def kick(self, t, dq):
        """Momentum jump ``P_kj += c_k dq_j`` at time ``t``."""
        wt = self.omega * t
        self.re -= dq[..., None] * (self.c * np.sin(wt))
        self.im += dq[..., None] * (self.c * np.cos(wt))

    def energy(self):
        return 0.5 * (np.einsum("...k,...k->...", self.re, self.re).sum(-1)
                      + np.einsum("...k,...k->...", self.im, self.im).sum(-1))

    def state(self, t) -> reservoir.BathState:
        wt = self.omega * t
        cos, sin = np.cos(wt), np.sin(wt)
        zr = cos * self.re + sin * self.im
        zi = cos * self.im - sin * self.re
        X = np.swapaxes(zr / self.omega, -1, -2)
        P = np.swapaxes(zi, -1, -2)
        return reservoir.BathState(np.ascontiguousarray(X), np.ascontiguousarray(P))


# ---------------------------------------------------------------------------
# route A: generalized Langevin equation


class MemoryHistory:
    """Velocity history for the trapezoidal memory sum.

    ``velocities[k]`` is ``v(k dt)``; each row has the replica shape
    ``(..., 2)``.  The optional ``window`` truncates the sum to the most
    recent samples.
    """

    def __init__(self, kernel_dot, capacity, shape, dt, window=None):
        self.kd = np.asarray(kernel_dot, dtype=float)
        needed = capacity if window is None else min(capacity, window + 1)
        if self.kd.size < needed:
            raise HistoryError(f"kernel has {self.kd.size} samples, history needs {needed}")
        self.dt = dt
        self.window = window
        self.buf = np.zeros((capacity,) + tuple(shape))
        self.n = 0

    def append(self, v):
        if self.n >= self.buf.shape[0]:
            raise HistoryError("history buffer exhausted")
        self.buf[self.n] = v
        self.n += 1

    def past_sum(self, n_now):
        """Trapezoid terms of ``int_0^{t_n} gamma_dot(t_n - t') v dt'`` except ``j = n``.

        Uses the samples ``v_0 .. v_{n-1}``.
        """
        if n_now == 0:
            return np.zeros(self.buf.shape[1:])
        if n_now > self.n:
            raise HistoryError("memory sum requested past the stored history")
        lo = 0
        if self.window is not None:
            lo = max(0, n_now - self.window)
        idx = np.arange(lo, n_now)
        weights = self.kd[n_now - idx].copy()
        if lo == 0:
            weights[0] *= 0.5
        # einsum keeps a fixed per-element summation order, so results do not
        # depend on how many replicas share the buffer (BLAS may regroup)
        return self.dt * np.einsum("k,k...->...", weights, self.buf[lo:n_now])


class _RouteANoise:
    """Free-bath stochastic force evaluated from the initial mode state."""

    def __init__(self, space, bath, state0):
        self.space = space
        if bath is None:
            self.modes = None
            return
        if state0.X.shape[-2] != bath.size:
            raise ValueError("bath state and discretization disagree on the mode count")
        self.omega = bath.omega
        self.cP = bath.coupling
        self.cX = bath.coupling * bath.omega
        self.modes = (
            np.ascontiguousarray(np.swapaxes(state0.X, -1, -2)),
            np.ascontiguousarray(np.swapaxes(state0.P, -1, -2)),
        )

    def __call__(self, x, t):
        if self.modes is None:
            return np.zeros_like(x)
        X0, P0 = self.modes
        wt = self.omega * t
        sdot = np.einsum("...k,k->...", P0, self.cP * np.cos(wt)) - np.einsum(
            "...k,k->...", X0, self.cX * np.sin(wt)
        )
        return -_pullback(self.space, x, sdot)


def _langevin_force(space, potential, history, n, x, t, noise, damp_v):
    """Explicit force at step ``n`` (memory endpoint supplied via ``damp_v``)."""
    acc = potential_acceleration(space, potential, x)
    mem = history.past_sum(n)
    if damp_v is not None:
        mem = mem + 0.5 * history.dt * history.kd[0] * damp_v
    return acc + (noise(x, t) - mem) / space.mass


def step_langevin(space, potential, history: MemoryHistory, noise, x, v, n, dt, acc=None):
    """Advance the Langevin equation from step ``n`` to ``n + 1``.

    ``history`` must already hold ``v_0 .. v_n``; ``v_{n+1}`` is appended.
    The conservative part is the reversible Verlet core; memory and noise
    are explicit except for the newest trapezoid weight, which enters the
    second half-kick implicitly.
    """
    if history.n != n + 1:
        raise HistoryError(f"history holds {history.n} samples, step {n} needs {n + 1}")
    t = n * dt
    if acc is None:
        acc = _langevin_force(space, potential, history, n, x, t, noise, v if n > 0 else None)
    vh = _half_kick(space, x, v, acc, dt)
    x1 = x + dt * vh
    geometry.check_chart(space, x1)
    damp = 0.5 * dt * history.kd[0] / space.mass
    acc1 = potential_acceleration(space, potential, x1) + (
        noise(x1, t + dt) - history.past_sum(n + 1)
    ) / space.mass
    v1 = _half_kick(space, x1, vh, acc1, dt, damp=damp)
    history.append(v1)
    acc_next = acc1 - damp * v1
    return x1, v1, acc_next


# ---------------------------------------------------------------------------
# driver


@dataclass
class SimConfig:
    """Integration settings.

    ``window`` is the optional memory truncation (in steps); ``None`` keeps
    the full history.  ``energy_jump`` aborts route B when the relative
    total-energy change exceeds it.  ``chunk`` is the number of replicas
    advanced together.
    """

    dt: float = 0.01
    steps: int = 1000
    seed: int = 0
    scheme: str = "routeB"
    stride: int = 1
    replicas: int = 1
    temperature: float = 0.0
    kB: float = 1.0
    window: int | None = None
    energy_jump: float = 0.5
    chunk: int = 100

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.stride < 1 or self.replicas < 1 or self.chunk < 1:
            raise ValueError("stride, replicas and chunk must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass
class Trajectory:
    """Sampled states; arrays are ``(n_samples, replicas, ...)``."""

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    e_sys: np.ndarray
    e_tot: np.ndarray | None
    ang: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def replicas(self):
        return self.x.shape[1]

    def replica(self, i) -> "Trajectory":
        return Trajectory(
            self.t,
            self.x[:, i : i + 1],
            self.v[:, i : i + 1],
            self.e_sys[:, i : i + 1],
            None if self.e_tot is None else self.e_tot[:, i : i + 1],
            self.ang[:, i : i + 1],
            dict(self.meta, replica=i),
        )

    def mean(self) -> "Trajectory":
        return Trajectory(
            self.t,
            self.x.mean(axis=1, keepdims=True),
            self.v.mean(axis=1, keepdims=True),
            self.e_sys.mean(axis=1, keepdims=True),
            None if self.e_tot is None else self.e_tot.mean(axis=1, keepdims=True),
            self.ang.mean(axis=1, keepdims=True),
            dict(self.meta, ensemble_mean=True),
        )

    def columns(self, i=0):
        """Rows for the CSV writer of replica ``i``."""
        n = self.t.size
        e_tot = self.e_tot[:, i] if self.e_tot is not None else [None] * n
        return [
            (
                self.t[k],
                self.x[k, i, 0],
                self.x[k, i, 1],
                self.v[k, i, 0],
                self.v[k, i, 1],
                self.e_sys[k, i],
                e_tot[k],
                self.ang[k, i],
            )
            for k in range(n)
        ]


def _as_batch(arr, replicas):
    arr = np.asarray(arr, dtype=float)
    if arr.shape == (2,):
        return np.tile(arr, (replicas, 1))
    if arr.shape != (replicas, 2):
        raise ValueError(f"initial condition must be (2,) or ({replicas}, 2)")
    return arr.copy()


def run(space, potential, config: SimConfig, x0, v0, bath=None, kernel=None):
    """Integrate ``config.replicas`` trajectories from ``(x0, v0)``.

    ``bath`` (a :class:`~dissipative_higgs.reservoir.BathDiscretization`)
    is required for route B and for route A at finite temperature; route A
    takes its friction kernel from ``kernel`` or, failing that, from the
    bath mode sum, so both routes see the same reservoir.  Thermal bath
    states are drawn per replica from ``(seed, replica)``.
    """
    cfg = config
    if cfg.scheme == "routeB" and bath is None:
        raise ValueError("route B needs a discretized bath")
    if cfg.scheme == "routeA" and kernel is None and bath is None:
        raise ValueError("route A needs a kernel or a bath")
    if cfg.scheme == "routeA" and cfg.temperature > 0 and bath is None:
        raise ValueError("route A at finite temperature needs a bath for the noise")

    x0 = _as_batch(x0, cfg.replicas)
    v0 = _as_batch(v0, cfg.replicas)
    n_out = cfg.steps // cfg.stride + 1
    R = cfg.replicas
    out_x = np.empty((n_out, R, 2))
    out_v = np.empty((n_out, R, 2))
    out_e = np.empty((n_out, R))
    out_l = np.empty((n_out, R))
    out_tot = np.empty((n_out, R)) if cfg.scheme == "routeB" else None

    kd = None
    if cfg.scheme == "routeA":
        reach = cfg.steps if cfg.window is None else min(cfg.steps, cfg.window)
        if kernel is None:
            kernel = reservoir.MemoryKernel.from_bath(bath, cfg.dt, cfg.dt * reach)
        kd = kernel.samples(cfg.dt, reach + 1)

    started = time.perf_counter()
    for lo in range(0, R, cfg.chunk):
        hi = min(R, lo + cfg.chunk)
        sl = slice(lo, hi)
        _run_chunk(space, potential, cfg, x0[sl], v0[sl], bath, kd, lo,
                   out_x[:, sl], out_v[:, sl], out_e[:, sl], out_l[:, sl],
                   None if out_tot is None else out_tot[:, sl])

    meta = {
        "config": asdict(cfg),
        "space": {"lambda": space.lam, "mass": space.mass},
        "potential": potential.describe(),
        "seed": cfg.seed,
        "bath": None if bath is None else bath.describe(),
        "kernel": None if kernel is None else {"source": kernel.source, "dt": kernel.dt},
        "wall_time": time.perf_counter() - started,
    }
    t = cfg.dt * cfg.stride * np.arange(n_out)
    return Trajectory(t, out_x, out_v, out_e, out_tot, out_l, meta)


def _run_chunk(space, potential, cfg, x, v, bath, kd, first, ox, ov, oe, ol, otot):
    dt = cfg.dt
    n_rep = x.shape[0]

    def record(k, state=None):
        ox[k] = x
        ov[k] = v
        oe[k] = energy_system(space, potential, x, v)
        ol[k] = angular_momentum(space, x, v)
        if otot is not None:
            otot[k] = oe[k] + bath_energy(bath, state)

    state = None
    if bath is not None and (cfg.scheme == "routeB" or cfg.temperature > 0):
        state = reservoir.sample_thermal_ensemble(
            bath, cfg.temperature, cfg.seed, n_rep, kB=cfg.kB, start=first
        )

    record(0, state)
    geometry.check_chart(space, x)
    step = 0
    try:
        if cfg.scheme == "conservative":
            acc = None
            for step in range(cfg.steps):
                x, v, acc = conservative_step(space, potential, x, v, dt, acc)
                if (step + 1) % cfg.stride == 0:
                    record((step + 1) // cfg.stride)
        elif cfg.scheme == "routeB":
            modes = _ModeAmplitudes(bath, state)
            e0 = oe[0] + modes.energy()
            scale = np.maximum(np.abs(e0), 1e-300)
            s_prev = modes.source(0.0)
            acc = None
            for step in range(cfg.steps):
                # the two source kicks that meet at t_n act at the same x and
                # merge into one, spanning mid-step to mid-step
                tm = (step + 0.5) * dt
                s_mid = modes.source(tm)
                v = _source_kick(space, x, v, s_mid - s_prev)
                q0 = geometry.embed_offset(space, x)
                x, v, acc = conservative_step(space, potential, x, v, dt, acc)
                modes.kick(tm, geometry.embed_offset(space, x) - q0)
                s_prev = s_mid
                if (step + 1) % cfg.stride == 0:
                    k = (step + 1) // cfg.stride
                    t1 = (step + 1) * dt
                    s_end = modes.source(t1)
                    v_end = _source_kick(space, x, v, s_end - s_mid)
                    ox[k] = x
                    ov[k] = v_end
                    oe[k] = energy_system(space, potential, x, v_end)
                    ol[k] = angular_momentum(space, x, v_end)
                    otot[k] = oe[k] + modes.energy()
                    jump = np.abs(otot[k] - e0) / scale
                    if not np.all(np.isfinite(jump)) or np.any(jump > cfg.energy_jump):
                        raise InstabilityError(
                            f"relative energy change {np.max(jump):.3g} exceeds {cfg.energy_jump:g}"
                        )
        else:
            state0 = state if cfg.temperature > 0 else None
            noise = _RouteANoise(space, bath if state0 is not None else None, state0)
            history = MemoryHistory(kd, cfg.steps + 1, x.shape, dt, cfg.window)
            history.append(v)
            acc = None
            for step in range(cfg.steps):
                x, v, acc = step_langevin(space, potential, history, noise, x, v, step, dt, acc)
                if (step + 1) % cfg.stride == 0:
                    record((step + 1) // cfg.stride)
    except StepError:
        raise
    except HiggsError as exc:
        raise StepError(step, exc) from exc
