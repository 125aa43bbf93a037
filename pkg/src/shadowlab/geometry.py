"""Points, norms, and metrics on R^d.

Three metrics are available:

* ``SUP``: the max norm ``|x|_inf = max_j |x_j|``, the default everywhere
  because sup-norm balls are axis-aligned boxes, which keeps the exact
  feasibility machinery exact.
* ``EUCLIDEAN``: the usual 2-norm.
* ``POLAR_WARP``: a planar metric obtained by radially remapping each point
  through ``H(p) = (1 + |p|_2) * p`` (equivalently ``r -> r + r^2`` in polar
  coordinates, angles untouched) and taking the Euclidean distance between the
  images.  ``H`` fixes the origin and is a homeomorphism of the plane, so the
  warped metric induces the standard topology while inflating distances far
  from the origin.

All functions are vectorized over a trailing coordinate axis: a "point" is a
float array of shape ``(d,)`` and batches are ``(..., d)``.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .errors import ContractViolation, DimensionMismatch

__all__ = [
    "MetricKind",
    "as_point",
    "sup_norm",
    "euclidean_norm",
    "radial_rescale",
    "metric_norm",
    "distance",
    "sample_directions",
    "uniform_ball",
]


class MetricKind(Enum):
    SUP = "sup"
    EUCLIDEAN = "euclidean"
    POLAR_WARP = "polar_warp"

    @classmethod
    def from_name(cls, name: str) -> "MetricKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise ContractViolation(f"unknown metric {name!r}")


def as_point(coords) -> np.ndarray:
    """Validate and return a 1-D float coordinate vector.

    Requires d >= 1 and finite entries (no NaN or infinity).
    """
    p = np.asarray(coords, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise ContractViolation(f"a point must be a 1-D vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ContractViolation(f"point has non-finite coordinates: {p!r}")
    return p


def sup_norm(p) -> np.ndarray:
    """Max of absolute coordinates, along the last axis."""
    return np.max(np.abs(np.asarray(p, dtype=float)), axis=-1)


def euclidean_norm(p) -> np.ndarray:
    return np.linalg.norm(np.asarray(p, dtype=float), axis=-1)


def radial_rescale(p, a: float = 1.0, b: float = 1.0) -> np.ndarray:
    """Map ``p -> h(|p|_2) * p/|p|_2`` with ``h(r) = a*r + b*r^2``.

    The origin maps to the origin (h(0)=0 forces it).  For a>0, b>=0 the map
    is a homeomorphism of the plane; b=0 reduces to scalar multiplication.
    """
    p = np.asarray(p, dtype=float)
    r = euclidean_norm(p)
    # h(r)/r = a + b*r is finite at r=0, so no division is needed.
    factor = a + b * r
    return p * factor[..., None]


def _check_same_dimension(p: np.ndarray, q: np.ndarray) -> None:
    if p.shape[-1] != q.shape[-1]:
        raise DimensionMismatch(
            f"points of dimension {p.shape[-1]} and {q.shape[-1]}"
        )


def metric_norm(metric: MetricKind, p) -> np.ndarray:
    """Distance from ``p`` to the origin in the given metric."""
    p = np.asarray(p, dtype=float)
    if metric is MetricKind.SUP:
        return sup_norm(p)
    if metric is MetricKind.EUCLIDEAN:
        return euclidean_norm(p)
    if metric is MetricKind.POLAR_WARP:
        if p.shape[-1] != 2:
            raise ContractViolation("the polar-warped metric is planar only (d=2)")
        r = euclidean_norm(p)
        return r + r * r
    raise ContractViolation(f"unknown metric {metric!r}")


def distance(metric: MetricKind, p, q) -> np.ndarray:
    """Metric distance between ``p`` and ``q`` (broadcasting over batches)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    _check_same_dimension(p, q)
    if metric is MetricKind.SUP:
        return sup_norm(p - q)
    if metric is MetricKind.EUCLIDEAN:
        return euclidean_norm(p - q)
    if metric is MetricKind.POLAR_WARP:
        if p.shape[-1] != 2:
            raise ContractViolation("the polar-warped metric is planar only (d=2)")
        return euclidean_norm(radial_rescale(p) - radial_rescale(q))
    raise ContractViolation(f"unknown metric {metric!r}")


def sample_directions(metric: MetricKind, dim: int, count: int, rng=None) -> np.ndarray:
    """Unit vectors of the metric's sphere, shape ``(count, dim)``.

    For the plane without an RNG the directions are evenly spaced angles,
    which makes radial constructions deterministic.  Otherwise Gaussian
    directions are drawn and normalized.
    """
    if count < 1:
        raise ContractViolation("need at least one direction")
    if dim == 2 and rng is None:
        theta = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
        u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    else:
        if rng is None:
            rng = np.random.default_rng(0)
        u = rng.standard_normal((count, dim))
        bad = euclidean_norm(u) == 0.0
        u[bad] = 1.0
    norms = metric_norm(metric, u) if metric is not MetricKind.POLAR_WARP else euclidean_norm(u)
    return u / norms[:, None]


def uniform_ball(metric: MetricKind, dim: int, rng, size: int) -> np.ndarray:
    """Uniform samples from the unit ball of the metric, shape ``(size, dim)``."""
    if metric is MetricKind.SUP:
        return rng.uniform(-1.0, 1.0, size=(size, dim))
    if metric is MetricKind.EUCLIDEAN:
        u = rng.standard_normal((size, dim))
        norms = euclidean_norm(u)
        norms[norms == 0.0] = 1.0
        radii = rng.uniform(0.0, 1.0, size=size) ** (1.0 / dim)
        return u * (radii / norms)[:, None]
    raise ContractViolation(f"uniform sampling not defined for metric {metric!r}")
