"""Truncated-Fock-basis spectra and golden-rule rates for the Higgs oscillator.

Units: ``hbar = m = 1``; lengths are measured in ``1/sqrt(omega0)`` so the
flat oscillator has levels ``omega0 (n + 1)``.

Composite operators (``pi``, ``L``, products with ``x``) are assembled in a
basis padded by a few quanta and projected back, so every matrix element of
a polynomial of degree up to the padding is exact and the truncation only
enters through diagonalization.

In the Fock basis ``x`` is real symmetric and ``p = i P`` with ``P`` real
antisymmetric; the Hamiltonian is then a real symmetric matrix and the
interaction operators are ``i`` times real antisymmetric ones, which keeps the
heavy arithmetic real.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import reservoir
from .dynamics import Harmonic

__all__ = [
    "FockBasis2D",
    "OperatorMatrix",
    "build_xp",
    "build_higgs_hamiltonian",
    "EigenSolution",
    "diagonalize",
    "InteractionTerms",
    "vielbein_operator_terms",
    "matrix_elements",
    "BoseEinstein",
    "Fixed",
    "Gaussian",
    "Lorentzian",
    "RateRequest",
    "RateRow",
    "RateTable",
    "golden_rule_rates",
    "time_dependent_probability",
    "rate_density",
    "higgs_levels",
]

PAD = 8


@dataclass(frozen=True)
class FockBasis2D:
    """States ``|n1, n2>`` with ``n1 + n2 <= n_max``, ordered by total quanta."""

    n_max: int
    states: tuple = field(init=False, repr=False)
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        states = tuple(
            (n1, total - n1) for total in range(self.n_max + 1) for n1 in range(total, -1, -1)
        )
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(states)})

    @property
    def dim(self) -> int:
        return len(self.states)

    def index(self, n1: int, n2: int) -> int:
        return self._index[(n1, n2)]

    def state(self, i: int) -> tuple:
        return self.states[i]

    @property
    def total(self) -> np.ndarray:
        return np.array([a + b for a, b in self.states])

    def interior(self, depth=1) -> np.ndarray:
        """Indices with at most ``n_max - depth`` quanta."""
        return np.flatnonzero(self.total <= self.n_max - depth)


@dataclass(frozen=True)
class OperatorMatrix:
    matrix: np.ndarray
    hermitian: bool = False
    name: str = ""

    def __post_init__(self):
        if self.hermitian:
            dev = hermiticity_error(self.matrix)
            if dev > 1e-12 * max(1.0, float(np.max(np.abs(self.matrix)))):
                raise ValueError(f"{self.name or 'operator'} flagged hermitian but deviates by {dev:.2e}")

    @property
    def dim(self):
        return self.matrix.shape[0]


def hermiticity_error(mat) -> float:
    return float(np.max(np.abs(mat - mat.conj().T))) if mat.size else 0.0


def _ladders(basis: FockBasis2D):
    D = basis.dim
    a1 = np.zeros((D, D))
    a2 = np.zeros((D, D))
    for i, (n1, n2) in enumerate(basis.states):
        if n1 > 0:
            a1[basis.index(n1 - 1, n2), i] = math.sqrt(n1)
        if n2 > 0:
            a2[basis.index(n1, n2 - 1), i] = math.sqrt(n2)
    return a1, a2


def _real_xp(basis, omega0=1.0):
    """``x`` (real) and ``P`` with ``p = i P``."""
    xs, ps = [], []
    for a in _ladders(basis):
        xs.append((a + a.T) / math.sqrt(2.0 * omega0))
        ps.append(math.sqrt(omega0 / 2.0) * (a.T - a))
    return xs, ps


def build_xp(basis: FockBasis2D, omega0=1.0) -> dict:
    """Position and momentum matrices from ``x = (a + a^+)/sqrt(2)``, ``p = i(a^+ - a)/sqrt(2)``."""
    xs, ps = _real_xp(basis, omega0)
    out = {}
    for k in range(2):
        out[f"x{k + 1}"] = OperatorMatrix(xs[k].astype(complex), True, f"x{k + 1}")
        out[f"p{k + 1}"] = OperatorMatrix(1j * ps[k], True, f"p{k + 1}")
    return out


class _Padded:
    """Real operator algebra on a padded basis, projected on demand."""

    def __init__(self, basis: FockBasis2D, omega0):
        self.basis = basis
        self.big = FockBasis2D(basis.n_max + PAD)
        self.x, self.P = _real_xp(self.big, omega0)
        self.D = basis.dim

    def cut(self, mat):
        return mat[: self.D, : self.D]


def _higgs_blocks(pad: _Padded, lam):
    x, P = pad.x, pad.P
    # p = iP; x.p = i(x.P); p.x = i(P.x)
    xP = x[0] @ P[0] + x[1] @ P[1]
    Px = P[0] @ x[0] + P[1] @ x[1]
    # pi = p + lam/2 [x (x.p) + (p.x) x] = i Pi
    Pi = [P[a] + 0.5 * lam * (x[a] @ xP + Px @ x[a]) for a in range(2)]
    Lt = x[0] @ P[1] - x[1] @ P[0]  # L12 = i Lt
    r2 = x[0] @ x[0] + x[1] @ x[1]
    return Pi, Lt, r2


def build_higgs_hamiltonian(basis: FockBasis2D, lam: float, potential=None, mass=1.0) -> OperatorMatrix:
    """``H = (pi.pi + (lam/2) L_ab L_ab) / (2m) + m w0^2 r^2 / 2`` with ``L_ab L_ab = 2 L12^2``.

    ``pi`` uses the hermitian ordering ``p + (lam/2)[x (x.p) + (p.x) x]``.
    The literal ordering ``x (x.p) + (x.p) x`` differs by ``i lam x``; it is
    related to this one by a similarity transformation and has the same
    spectrum, but it is not hermitian in the flat measure.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    potential = Harmonic(1.0) if potential is None else potential
    if not isinstance(potential, Harmonic):
        raise TypeError("the truncated basis is built for the harmonic potential")
    w0 = potential.omega0
    # lengths in units of 1/sqrt(m w0): r_phys = r / sqrt(m), so lam_eff = lam / m
    lam_eff = lam / mass
    pad = _Padded(basis, w0)
    Pi, Lt, r2 = _higgs_blocks(pad, lam_eff)
    # pi.pi = -(Pi.Pi), L12^2 = -(Lt.Lt)
    kin = -(Pi[0] @ Pi[0] + Pi[1] @ Pi[1] + lam_eff * Lt @ Lt)
    H = 0.5 * kin + 0.5 * w0**2 * r2
    H = pad.cut(H)
    H = 0.5 * (H + H.T)
    return OperatorMatrix(H, True, "H_higgs")


def higgs_levels(n, lam, omega0=1.0):
    """Closed-form Higgs-oscillator levels ``(n+1) w0 sqrt(1 + lam^2/(4 w0^2)) + lam (n+1)^2 / 2``.

    Used only as an external cross-check; the solver never relies on it.
    """
    n = np.asarray(n, dtype=float)
    return (n + 1) * omega0 * np.sqrt(1.0 + lam**2 / (4.0 * omega0**2)) + 0.5 * lam * (n + 1) ** 2


# ---------------------------------------------------------------------------
# eigen-decomposition


@dataclass
class EigenSolution:
    """Eigenpairs in ascending order.

    ``multiplets`` groups indices whose energies lie within ``tolerance``
    of the multiplet's lowest member; ``label[i]`` is the multiplet number,
    which equals the total quanta ``n`` of the parent flat level for the
    well-converged low part of the spectrum.  ``parity`` is read off the
    eigenvectors (``H`` commutes with ``(-1)^(n1+n2)``), so it stays exact
    where truncation scrambles the multiplet labels.
    """

    energies: np.ndarray
    vectors: np.ndarray
    multiplets: list
    label: np.ndarray
    residuals: np.ndarray
    lam: float
    basis: FockBasis2D
    norm: float
    tolerance: float
    parity: np.ndarray

    def omega(self, m, n, hbar=1.0):
        return (self.energies[n] - self.energies[m]) / hbar

    def multiplet_spread(self, k) -> float:
        e = self.energies[self.multiplets[k]]
        return float(e.max() - e.min())

    def max_residual(self) -> float:
        return float(np.max(self.residuals / self.norm))


def _group(energies, tol):
    groups = []
    start = 0
    for i in range(1, energies.size + 1):
        if i == energies.size or energies[i] - energies[start] > tol:
            groups.append(np.arange(start, i))
            start = i
    return groups


def diagonalize(H: OperatorMatrix, basis: FockBasis2D, lam: float, tolerance=1e-3, exact_tol=1e-11) -> EigenSolution:
    """Dense symmetric eigen-decomposition with reproducible degenerate bases.

    Clusters degenerate to ``exact_tol * |H|`` are rotated to diagonalize
    the quantum number ``n1``; at ``lam = 0`` the eigenvectors are therefore
    bare Fock states.  Each vector's largest component is made real positive.
    """
    mat = H.matrix
    real = not np.iscomplexobj(mat) or float(np.max(np.abs(mat.imag))) == 0.0
    mat = mat.real if real else mat
    energies, vectors = np.linalg.eigh(mat)
    norm = float(np.linalg.norm(mat, 2))
    n1 = np.array([s[0] for s in basis.states], dtype=float)
    for grp in _group(energies, exact_tol * norm):
        if grp.size < 2:
            continue
        sub = vectors[:, grp]
        proj = sub.conj().T @ (n1[:, None] * sub)
        # descending n1, matching the order (n, 0), (n-1, 1), ... of the basis
        w, u = np.linalg.eigh(0.5 * (proj + proj.conj().T))
        vectors[:, grp] = sub @ u[:, ::-1]
    big = np.argmax(np.abs(vectors), axis=0)
    phase = vectors[big, np.arange(vectors.shape[1])]
    vectors = vectors * (np.abs(phase) / phase)[None, :]
    energies = np.real(np.einsum("ij,ij->j", vectors.conj(), mat @ vectors))
    residuals = np.linalg.norm(mat @ vectors - vectors * energies[None, :], axis=0)
    multiplets = _group(energies, tolerance)
    label = np.empty(energies.size, dtype=int)
    for k, grp in enumerate(multiplets):
        label[grp] = k
    even = (basis.total % 2 == 0)
    even_weight = (np.abs(vectors[even]) ** 2).sum(axis=0)
    parity = np.where(even_weight > 0.5, 0, 1)
    return EigenSolution(
        energies, vectors, multiplets, label, residuals, lam, basis, norm, tolerance, parity
    )


# ---------------------------------------------------------------------------
# interaction operators


@dataclass(frozen=True)
class InteractionTerms:
    """``A[j]`` and ``Aprime[j]`` for embedding directions ``j = 0, 1, 2``."""

    A: tuple
    Aprime: tuple
    lam: float


def vielbein_operator_terms(basis: FockBasis2D, lam: float, omega0=1.0) -> InteractionTerms:
    """Hermitian ``p_b a_jb + h.c.`` with the vielbein expanded to first order in ``lam``.

    In-plane rows: ``a_ga = d_ga (1 - lam r^2/2) - lam x_g x_a``; out-of-plane
    row: ``a_3a = -sqrt(lam) x_a``.  ``Aprime_j = p_j r^2 + r^2 p_j`` for the
    in-plane rows and zero out of plane.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    pad = _Padded(basis, omega0)
    x, P = pad.x, pad.P
    r2 = x[0] @ x[0] + x[1] @ x[1]
    D = pad.big.dim
    eye = np.eye(D)

    def sym(Pmat, amat):
        # p a + a p = i (P a + a P)
        return Pmat @ amat + amat @ Pmat

    A, Ap = [], []
    for g in range(2):
        acc = np.zeros((D, D))
        for b in range(2):
            a_gb = -lam * x[g] @ x[b]
            if g == b:
                a_gb += eye - 0.5 * lam * r2
            acc += sym(P[b], a_gb)
        A.append(OperatorMatrix(1j * pad.cut(acc), True, f"A{g + 1}"))
        Ap.append(OperatorMatrix(1j * pad.cut(sym(P[g], r2)), True, f"Aprime{g + 1}"))
    acc = np.zeros((D, D))
    for b in range(2):
        acc += sym(P[b], -math.sqrt(lam) * x[b])
    A.append(OperatorMatrix(1j * pad.cut(acc), True, "A3"))
    Ap.append(OperatorMatrix(np.zeros((basis.dim, basis.dim), dtype=complex), True, "Aprime3"))
    return InteractionTerms(tuple(A), tuple(Ap), lam)


def matrix_elements(eig: EigenSolution, terms: InteractionTerms, m: int, n: int):
    """``(V_j, V'_j)`` for ``j = 1..3`` as complex arrays of length 3: ``<n|A_j|m>``."""
    vm = eig.vectors[:, m]
    vn = eig.vectors[:, n].conj()
    V = np.array([vn @ (A.matrix @ vm) for A in terms.A])
    Vp = np.array([vn @ (A.matrix @ vm) for A in terms.Aprime])
    return V, Vp


def _all_elements(eig, terms, m):
    """``V[j, n]`` and ``V'[j, n]`` for fixed initial state ``m``."""
    vm = eig.vectors[:, m]
    left = eig.vectors.conj().T
    V = np.array([left @ (A.matrix @ vm) for A in terms.A])
    Vp = np.array([left @ (A.matrix @ vm) for A in terms.Aprime])
    return V, Vp


# ---------------------------------------------------------------------------
# occupations and line shapes


@dataclass(frozen=True)
class BoseEinstein:
    temperature: float
    kB: float = 1.0
    hbar: float = 1.0

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        if self.temperature == 0:
            return np.zeros_like(omega)
        x = self.hbar * omega / (self.kB * self.temperature)
        with np.errstate(divide="ignore", over="ignore"):
            return 1.0 / np.expm1(x)

    def describe(self):
        return {"type": "bose_einstein", "temperature": self.temperature}


@dataclass(frozen=True)
class Fixed:
    value: float

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("occupation must be >= 0")

    def __call__(self, omega):
        return np.full_like(np.asarray(omega, dtype=float), self.value)

    def describe(self):
        return {"type": "fixed", "value": self.value}


@dataclass(frozen=True)
class Gaussian:
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")

    def __call__(self, d):
        d = np.asarray(d, dtype=float)
        return np.exp(-0.5 * (d / self.sigma) ** 2) / (self.sigma * math.sqrt(2 * math.pi))

    def describe(self):
        return {"type": "gaussian", "sigma": self.sigma}


@dataclass(frozen=True)
class Lorentzian:
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")

    def __call__(self, d):
        d = np.asarray(d, dtype=float)
        return self.sigma / (math.pi * (d**2 + self.sigma**2))

    def describe(self):
        return {"type": "lorentzian", "sigma": self.sigma}


# ---------------------------------------------------------------------------
# golden rule


@dataclass
class RateRequest:
    """Golden-rule query from initial eigenstate ``initial``.

    ``skip_tol`` drops final states closer in energy than this (degenerate
    partners have no resonant reservoir frequency).
    """

    initial: int
    lam: float
    occupation: object
    line_shape: object
    model: reservoir.SusceptibilityModel
    floor: float = 1e-15
    hbar: float = 1.0
    skip_tol: float = 1e-6


@dataclass(frozen=True)
class RateRow:
    m: int
    n: int
    j: int
    omega_nm: float
    V2: float
    Vp2: float
    gamma_abs: float
    gamma_emit: float


HEADER = ("m", "n", "j", "omega_nm", "V2", "Vp2", "Gamma_abs", "Gamma_emit")


@dataclass
class RateTable:
    rows: list
    request: RateRequest

    def __len__(self):
        return len(self.rows)

    def total_abs(self) -> float:
        return float(sum(r.gamma_abs for r in self.rows))

    def total_emit(self) -> float:
        return float(sum(r.gamma_emit for r in self.rows))

    def as_tuples(self):
        return [
            (r.m, r.n, r.j, r.omega_nm, r.V2, r.Vp2, r.gamma_abs, r.gamma_emit) for r in self.rows
        ]


def _check(request, eig, terms):
    if not math.isclose(request.lam, eig.lam, abs_tol=1e-15) or not math.isclose(
        request.lam, terms.lam, abs_tol=1e-15
    ):
        raise ValueError("request, eigen-solution and interaction terms use different lambda")
    if not 0 <= request.initial < eig.energies.size:
        raise IndexError(f"initial state {request.initial} outside the basis")


def _channels(request, eig, terms):
    """Per (n, j): ``omega_nm``, ``|V|^2``, ``|V'|^2``, ``|V + lam V'|^2``."""
    _check(request, eig, terms)
    m = request.initial
    V, Vp = _all_elements(eig, terms, m)
    omega = (eig.energies - eig.energies[m]) / request.hbar
    W2 = np.abs(V + request.lam * Vp) ** 2
    return m, omega, np.abs(V) ** 2, np.abs(Vp) ** 2, W2


def golden_rule_rates(request: RateRequest, eig: EigenSolution, terms: InteractionTerms) -> RateTable:
    """``Gamma = Im gamma(w) / (2 hbar) * M * |V + lam V'|^2 * delta_sigma(0)``.

    Absorption (``omega_nm > 0``) carries ``M(omega_nm)``; emission carries
    ``M(omega_mn) + 1``.
    """
    m, omega, V2, Vp2, W2 = _channels(request, eig, terms)
    peak = float(request.line_shape(0.0))
    rows = []
    for n in range(omega.size):
        w = omega[n]
        if n == m or abs(w) <= request.skip_tol:
            continue
        aw = abs(w)
        pref = float(reservoir.im_chi(request.model, aw)) / (2.0 * request.hbar) * peak
        occ = float(request.occupation(aw))
        for j in range(W2.shape[0]):
            g = pref * W2[j, n]
            g_abs = g * occ if w > 0 else 0.0
            g_emit = g * (occ + 1.0) if w < 0 else 0.0
            if max(g_abs, g_emit) <= request.floor:
                continue
            rows.append(RateRow(m, n, j + 1, float(w), float(V2[j, n]), float(Vp2[j, n]), g_abs, g_emit))
    return RateTable(rows, request)


def time_dependent_probability(request: RateRequest, eig, terms, t, omega):
    """Finite-time transition probability per unit reservoir bandwidth.

    ``P(w) = sum_{n,j} Im gamma(w) M'(w) |V + lam V'|^2 t^2 sinc^2[(|w_nm| - w) t/2] / (4 pi hbar)``
    with ``M' = M`` for absorption and ``M + 1`` for emission.  Integrated
    over ``w`` a line contributes ``Gamma t`` as ``t`` grows, because
    ``t^2 sinc^2(D t/2) -> 2 pi t delta(D)``.
    """
    if not t > 0:
        raise ValueError("t must be > 0")
    m, omega_nm, _, _, W2 = _channels(request, eig, terms)
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    im = np.asarray(reservoir.im_chi(request.model, omega), dtype=float)
    occ = np.asarray(request.occupation(omega), dtype=float)
    out = np.zeros_like(omega)
    for n in range(omega_nm.size):
        w = omega_nm[n]
        if n == m or abs(w) <= request.skip_tol:
            continue
        strength = float(W2[:, n].sum())
        if strength == 0.0:
            continue
        occ_n = occ if w > 0 else occ + 1.0
        half = 0.5 * (abs(w) - omega) * t
        out += im * occ_n * strength * t**2 * np.sinc(half / np.pi) ** 2
    return out / (4.0 * np.pi * request.hbar)


def rate_density(request: RateRequest, eig, terms, omega):
    """Golden-rule rate per unit bandwidth, ``delta`` replaced by the line shape."""
    m, omega_nm, _, _, W2 = _channels(request, eig, terms)
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    im = np.asarray(reservoir.im_chi(request.model, omega), dtype=float)
    occ = np.asarray(request.occupation(omega), dtype=float)
    out = np.zeros_like(omega)
    for n in range(omega_nm.size):
        w = omega_nm[n]
        if n == m or abs(w) <= request.skip_tol:
            continue
        strength = float(W2[:, n].sum())
        occ_n = occ if w > 0 else occ + 1.0
        out += im * occ_n * strength * request.line_shape(abs(w) - omega)
    return out / (2.0 * request.hbar)
