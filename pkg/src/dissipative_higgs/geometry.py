"""Gnomonic-chart geometry of a sphere of curvature ``lam = 1/R**2``.

Points of the open upper hemisphere are described by tangent-plane
coordinates ``x`` (shape ``(..., 2)``); all functions broadcast over the
leading axes so that whole replica ensembles can be evaluated at once.

The embedding is ``q = (x1, x2, lam**-0.5) / Lambda`` with
``Lambda = sqrt(1 + lam * r**2)``; it satisfies ``|q| = R``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ChartOverflowError

__all__ = [
    "CurvedSpace",
    "TangentState",
    "lambda_factor",
    "metric",
    "inverse_metric",
    "vielbein",
    "embed",
    "embed_offset",
    "project",
    "geodesic_acceleration",
    "geodesic_bilinear",
    "check_chart",
]


@dataclass(frozen=True)
class CurvedSpace:
    """Curvature and particle mass.

    Parameters
    ----------
    lam : float
        Curvature ``1/R**2`` (``>= 0``). ``lam = 0`` is the flat plane.
    mass : float
        Particle mass (``> 0``).
    chart_limit : float
        Largest ``Lambda`` accepted before a point is treated as having
        run off the chart (the equator maps to ``Lambda -> inf``).
    """

    lam: float = 0.0
    mass: float = 1.0
    chart_limit: float = 1.0e3

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError(f"curvature must be finite and >= 0, got {self.lam}")
        if not self.mass > 0:
            raise ValueError(f"mass must be > 0, got {self.mass}")
        if not self.chart_limit > 1:
            raise ValueError("chart_limit must exceed 1")

    @property
    def radius(self) -> float:
        return np.inf if self.lam == 0 else self.lam ** -0.5


@dataclass
class TangentState:
    """Tangent-plane position ``x`` and velocity ``v`` (both ``(..., 2)``)."""

    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.x.shape != self.v.shape or self.x.shape[-1:] != (2,):
            raise ValueError("x and v must share a (..., 2) shape")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.v))):
            raise ValueError("state must be finite")

    def copy(self) -> "TangentState":
        return TangentState(self.x.copy(), self.v.copy())


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def lambda_factor(space: CurvedSpace, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.sqrt(1.0 + space.lam * _dot(x, x))


def metric(space: CurvedSpace, x) -> np.ndarray:
    """``g = Lambda**-2 (1 - lam Lambda**-2 x x^T)``, shape ``(..., 2, 2)``."""
    x = np.asarray(x, dtype=float)
    inv2 = 1.0 / (1.0 + space.lam * _dot(x, x))
    outer = x[..., :, None] * x[..., None, :]
    eye = np.broadcast_to(np.eye(2), outer.shape)
    return inv2[..., None, None] * (eye - (space.lam * inv2)[..., None, None] * outer)


def inverse_metric(space: CurvedSpace, x) -> np.ndarray:
    """``g^-1 = Lambda**2 (1 + lam x x^T)``."""
    x = np.asarray(x, dtype=float)
    big2 = 1.0 + space.lam * _dot(x, x)
    outer = x[..., :, None] * x[..., None, :]
    eye = np.broadcast_to(np.eye(2), outer.shape)
    return big2[..., None, None] * (eye + space.lam * outer)


def vielbein(space: CurvedSpace, x) -> np.ndarray:
    """Embedding Jacobian ``a[i, alpha] = dq_i / dx_alpha``, shape ``(..., 3, 2)``.

    Any ``a`` with ``a^T a = g`` would do; the Jacobian is the smooth gauge
    and is well defined at ``lam = 0`` where the embedding itself is not.
    """
    x = np.asarray(x, dtype=float)
    lam = space.lam
    big = np.sqrt(1.0 + lam * _dot(x, x))
    inv1 = 1.0 / big
    inv3 = inv1 ** 3
    out = np.zeros(x.shape[:-1] + (3, 2))
    out[..., 0, 0] = inv1 - lam * x[..., 0] ** 2 * inv3
    out[..., 1, 1] = inv1 - lam * x[..., 1] ** 2 * inv3
    cross = -lam * x[..., 0] * x[..., 1] * inv3
    out[..., 0, 1] = cross
    out[..., 1, 0] = cross
    out[..., 2, :] = -np.sqrt(lam) * x * inv3[..., None]
    return out


def embed(space: CurvedSpace, x) -> np.ndarray:
    """Point on the sphere of radius ``R`` above tangent point ``x``."""
    if space.lam <= 0:
        raise ValueError("embedding requires lam > 0")
    x = np.asarray(x, dtype=float)
    inv1 = 1.0 / lambda_factor(space, x)
    top = np.full(x.shape[:-1], space.lam ** -0.5)
    return np.concatenate([x, top[..., None]], axis=-1) * inv1[..., None]


def embed_offset(space: CurvedSpace, x) -> np.ndarray:
    """``q(x) - q(0)``: the embedding measured from the tangency point.

    Finite for ``lam = 0`` (reduces to ``(x1, x2, 0)``); the bath only ever
    sees differences of ``q``, so this is what the dynamics uses.
    """
    x = np.asarray(x, dtype=float)
    lam = space.lam
    r2 = _dot(x, x)
    big = np.sqrt(1.0 + lam * r2)
    # lam**-0.5 * (1/Lambda - 1) rewritten without cancellation
    dz = -np.sqrt(lam) * r2 / (big * (1.0 + big))
    return np.concatenate([x / big[..., None], dz[..., None]], axis=-1)


def project(space: CurvedSpace, q) -> np.ndarray:
    """Inverse of :func:`embed` on the open upper hemisphere."""
    if space.lam <= 0:
        raise ValueError("projection requires lam > 0")
    q = np.asarray(q, dtype=float)
    if np.any(q[..., 2] <= 0):
        raise ChartOverflowError("point outside the upper-hemisphere chart (q3 <= 0)")
    scale = space.lam ** -0.5 / q[..., 2]
    return q[..., :2] * scale[..., None]


def geodesic_bilinear(space: CurvedSpace, x, u, w) -> np.ndarray:
    """Symmetric bilinear curvature term ``lam/Lambda**2 [(x.u) w + (x.w) u]``.

    ``geodesic_bilinear(space, x, v, v)`` is the geodesic acceleration.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    coef = space.lam / (1.0 + space.lam * _dot(x, x))
    return coef[..., None] * (_dot(x, u)[..., None] * w + _dot(x, w)[..., None] * u)


def geodesic_acceleration(space: CurvedSpace, x, v) -> np.ndarray:
    """Acceleration of a free particle, ``2 lam (x.v) v / Lambda**2``.

    Always parallel to ``v``: geodesics are straight lines in the chart.
    """
    return geodesic_bilinear(space, x, v, v)


def check_chart(space: CurvedSpace, x) -> None:
    big = lambda_factor(space, x)
    if not np.all(np.isfinite(big)):
        raise ChartOverflowError("non-finite tangent coordinates")
    worst = float(np.max(big))
    if worst > space.chart_limit:
        raise ChartOverflowError(
            f"Lambda = {worst:.3g} exceeds chart limit {space.chart_limit:.3g}"
        )
