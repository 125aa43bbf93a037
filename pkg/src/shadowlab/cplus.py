"""Strictly positive continuous functions on R^d, as expression trees.

Both the shadowing tolerance (epsilon) and the pseudo-orbit slack (delta)
live here.  A function is a tree over one point variable with node kinds

    const, norm (metric-selected), coord, add, sub (guarded), mul, min, max,
    exp2neg (u -> 2^-u), recip (guarded), radial (piecewise-linear table in
    the norm), clamp, envelope (tabulated 1-Lipschitz minorant)

all of which are continuous, so continuity is structural.  Strict positivity
is checked at evaluation time: a root evaluation that is <= 0 raises
``PositivityError`` naming the node, as do the guarded nodes (``sub`` must
stay positive, ``recip`` needs a positive denominator).

Evaluation is vectorized: ``fn.eval(p)`` accepts a single point ``(d,)`` or a
batch ``(N, d)`` and returns a scalar or an ``(N,)`` array.

Floating-point policy: ``exp2neg`` saturates at the smallest positive
subnormal instead of underflowing to zero, so trees like ``2^-|x|`` remain
strictly positive arbitrarily far out.

Trees serialize to a small JSON schema ``{"op": name, "args": [...]}`` where
args mix child trees and literals; radial tables carry sorted
``(radius, value)`` pairs.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .errors import ContractViolation, PositivityError
from .geometry import MetricKind, metric_norm, sample_directions

__all__ = [
    "CPlusFn",
    "Const",
    "Norm",
    "Coord",
    "Add",
    "Sub",
    "Mul",
    "Min",
    "Max",
    "Exp2Neg",
    "Recip",
    "Clamp",
    "RadialTable",
    "Envelope",
    "fn_from_json",
    "fn_from_obj",
    "NeighborhoodSpec",
    "epsilon_from_neighborhood",
    "saddle_adversarial_epsilon",
    "decaying_epsilon",
    "synthesize_delta_homothety",
    "delta_reference_levels",
    "verify_delta_conditions",
    "random_positive_fn",
]

_TINY = math.ulp(0.0)  # smallest positive subnormal double


def _as_batch(p) -> tuple[np.ndarray, bool]:
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 1:
        return arr[None, :], True
    if arr.ndim == 2:
        return arr, False
    raise ContractViolation(f"expected a point or a batch of points, got shape {arr.shape}")


class CPlusFn:
    """Base class for strictly positive scalar fields."""

    op: str = "?"

    def eval(self, p):
        """Evaluate at a point or batch; raises if any value is <= 0."""
        pts, single = _as_batch(p)
        values = self._eval(pts)
        if not np.all(values > 0.0):
            worst = float(np.min(values))
            raise PositivityError(self.op, worst)
        return float(values[0]) if single else values

    def _eval(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_obj(self) -> dict:
        raise NotImplementedError

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_obj(), sort_keys=True, **kwargs)

    def __repr__(self):
        return f"<{type(self).__name__} {self.to_json()}>"


class Const(CPlusFn):
    op = "const"

    def __init__(self, value: float):
        self.value = float(value)

    def _eval(self, pts):
        return np.full(pts.shape[0], self.value)

    def to_obj(self):
        return {"op": "const", "args": [self.value]}


class Norm(CPlusFn):
    """|x| in the chosen metric's norm (distance to the origin)."""

    op = "norm"

    def __init__(self, metric: MetricKind = MetricKind.SUP):
        self.metric = metric

    def _eval(self, pts):
        return metric_norm(self.metric, pts)

    def to_obj(self):
        return {"op": "norm", "args": [self.metric.value]}


class Coord(CPlusFn):
    op = "coord"

    def __init__(self, index: int):
        self.index = int(index)

    def _eval(self, pts):
        if not 0 <= self.index < pts.shape[1]:
            raise ContractViolation(f"coordinate {self.index} out of range")
        return pts[:, self.index]

    def to_obj(self):
        return {"op": "coord", "args": [self.index]}


class _Nary(CPlusFn):
    def __init__(self, *terms: CPlusFn):
        if len(terms) < 2:
            raise ContractViolation(f"{self.op} needs at least two operands")
        self.terms = tuple(terms)

    def to_obj(self):
        return {"op": self.op, "args": [t.to_obj() for t in self.terms]}


class Add(_Nary):
    op = "add"

    def _eval(self, pts):
        out = self.terms[0]._eval(pts)
        for t in self.terms[1:]:
            out = out + t._eval(pts)
        return out


class Mul(_Nary):
    op = "mul"

    def _eval(self, pts):
        out = self.terms[0]._eval(pts)
        for t in self.terms[1:]:
            out = out * t._eval(pts)
        return out


class Min(_Nary):
    op = "min"

    def _eval(self, pts):
        out = self.terms[0]._eval(pts)
        for t in self.terms[1:]:
            out = np.minimum(out, t._eval(pts))
        return out


class Max(_Nary):
    op = "max"

    def _eval(self, pts):
        out = self.terms[0]._eval(pts)
        for t in self.terms[1:]:
            out = np.maximum(out, t._eval(pts))
        return out


class Sub(CPlusFn):
    """a - b, guarded: the difference must stay strictly positive."""

    op = "sub"

    def __init__(self, a: CPlusFn, b: CPlusFn):
        self.a = a
        self.b = b

    def _eval(self, pts):
        out = self.a._eval(pts) - self.b._eval(pts)
        if not np.all(out > 0.0):
            raise PositivityError("sub", float(np.min(out)))
        return out

    def to_obj(self):
        return {"op": "sub", "args": [self.a.to_obj(), self.b.to_obj()]}


class Exp2Neg(CPlusFn):
    """u -> 2^(-u); saturates at the smallest subnormal instead of underflowing."""

    op = "exp2neg"

    def __init__(self, child: CPlusFn):
        self.child = child

    def _eval(self, pts):
        u = self.child._eval(pts)
        with np.errstate(under="ignore"):
            out = np.exp2(-u)
        return np.maximum(out, _TINY)

    def to_obj(self):
        return {"op": "exp2neg", "args": [self.child.to_obj()]}


class Recip(CPlusFn):
    """u -> 1/u, guarded: the denominator must be strictly positive."""

    op = "recip"

    def __init__(self, child: CPlusFn):
        self.child = child

    def _eval(self, pts):
        u = self.child._eval(pts)
        if not np.all(u > 0.0):
            raise PositivityError("recip", float(np.min(u)))
        return 1.0 / u

    def to_obj(self):
        return {"op": "recip", "args": [self.child.to_obj()]}


class Clamp(CPlusFn):
    op = "clamp"

    def __init__(self, child: CPlusFn, lo: float, hi: float):
        if not (0.0 < lo <= hi):
            raise ContractViolation("clamp needs 0 < lo <= hi")
        self.child = child
        self.lo = float(lo)
        self.hi = float(hi)

    def _eval(self, pts):
        return np.clip(self.child._eval(pts), self.lo, self.hi)

    def to_obj(self):
        return {"op": "clamp", "args": [self.child.to_obj(), self.lo, self.hi]}


class RadialTable(CPlusFn):
    """Piecewise-linear function of the norm, from sorted (radius, value) pairs.

    Inside the table: linear interpolation.  Below the first radius the first
    value is held.  Beyond the last radius the tail rule applies:

    * ``"clamp"``: hold the last value (default);
    * ``"harmonic"``: continue as v_last * (1 + r_last) / (1 + r), which keeps
      the value strictly positive and strictly decreasing and matches the
      final slope of a profile of the shape G(r)/(1+r) at the cut radius.
    """

    op = "radial"

    def __init__(self, pairs, metric: MetricKind = MetricKind.SUP, tail: str = "clamp"):
        pts = np.asarray(pairs, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
            raise ContractViolation("radial table needs a nonempty list of (radius, value) pairs")
        radii, values = pts[:, 0], pts[:, 1]
        if radii[0] < 0.0 or np.any(np.diff(radii) <= 0.0):
            raise ContractViolation("radii must be nonnegative and strictly increasing")
        if np.any(values <= 0.0):
            raise PositivityError("radial", float(np.min(values)))
        if tail not in ("clamp", "harmonic"):
            raise ContractViolation(f"unknown tail rule {tail!r}")
        self.radii = radii
        self.values = values
        self.metric = metric
        self.tail = tail

    def _eval(self, pts):
        r = metric_norm(self.metric, pts)
        out = np.interp(r, self.radii, self.values)
        if self.tail == "harmonic":
            r_last = self.radii[-1]
            v_last = self.values[-1]
            beyond = r > r_last
            if np.any(beyond):
                out = np.where(beyond, v_last * (1.0 + r_last) / (1.0 + r), out)
        return out

    def to_obj(self):
        return {
            "op": "radial",
            "args": [
                self.metric.value,
                [[float(r), float(v)] for r, v in zip(self.radii, self.values)],
                self.tail,
            ],
        }


class Envelope(CPlusFn):
    """Sampled infimal convolution: x -> min_i (values_i + d(x, points_i)).

    This is the 1-Lipschitz minorant of the tabulated data, continuous and
    strictly positive whenever the tabulated values are.  On its own nodes it
    equals the tabulated infimal convolution exactly (the i-th term at the
    i-th node contributes values_i + 0).
    """

    op = "envelope"

    def __init__(self, points, values, metric: MetricKind = MetricKind.SUP):
        self.points = np.asarray(points, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.points.ndim != 2 or self.points.shape[0] == 0:
            raise ContractViolation("envelope needs a nonempty (M, d) sample set")
        if self.values.shape != (self.points.shape[0],):
            raise ContractViolation("one value per sample point required")
        if np.any(self.values <= 0.0):
            raise PositivityError("envelope", float(np.min(self.values)))
        self.metric = metric
        self._node_values: np.ndarray | None = None

    def _eval(self, pts):
        out = np.empty(pts.shape[0])
        # Chunk the query axis; each chunk forms a (chunk, M) distance block.
        chunk = max(1, int(4_000_000 // max(1, self.points.shape[0])))
        for lo in range(0, pts.shape[0], chunk):
            block = pts[lo : lo + chunk]
            if self.metric is MetricKind.SUP:
                dist = np.max(np.abs(block[:, None, :] - self.points[None, :, :]), axis=-1)
            elif self.metric is MetricKind.EUCLIDEAN:
                dist = np.linalg.norm(block[:, None, :] - self.points[None, :, :], axis=-1)
            else:
                raise ContractViolation("envelope supports sup and Euclidean metrics")
            out[lo : lo + chunk] = np.min(self.values[None, :] + dist, axis=1)
        return out

    def values_at_nodes(self) -> np.ndarray:
        """The infimal convolution at the sample points themselves (cached)."""
        if self._node_values is None:
            self._node_values = self._eval(self.points)
        return self._node_values

    def to_obj(self):
        return {
            "op": "envelope",
            "args": [self.metric.value, self.points.tolist(), self.values.tolist()],
        }


_NODE_KINDS = {}
for _cls in (Const, Norm, Coord, Add, Sub, Mul, Min, Max, Exp2Neg, Recip, Clamp, RadialTable, Envelope):
    _NODE_KINDS[_cls.op] = _cls


def fn_from_obj(obj: dict) -> CPlusFn:
    """Rebuild a tree from its JSON object form."""
    if not isinstance(obj, dict) or "op" not in obj:
        raise ContractViolation(f"not a function node: {obj!r}")
    op = obj["op"]
    args = obj.get("args", [])
    if op == "const":
        return Const(args[0])
    if op == "norm":
        return Norm(MetricKind.from_name(args[0]))
    if op == "coord":
        return Coord(args[0])
    if op in ("add", "mul", "min", "max"):
        return _NODE_KINDS[op](*[fn_from_obj(a) for a in args])
    if op == "sub":
        return Sub(fn_from_obj(args[0]), fn_from_obj(args[1]))
    if op == "exp2neg":
        return Exp2Neg(fn_from_obj(args[0]))
    if op == "recip":
        return Recip(fn_from_obj(args[0]))
    if op == "clamp":
        return Clamp(fn_from_obj(args[0]), args[1], args[2])
    if op == "radial":
        return RadialTable(args[1], MetricKind.from_name(args[0]), args[2] if len(args) > 2 else "clamp")
    if op == "envelope":
        return Envelope(args[1], args[2], MetricKind.from_name(args[0]))
    raise ContractViolation(f"unknown node kind {op!r}")


def fn_from_json(text: str) -> CPlusFn:
    return fn_from_obj(json.loads(text))


# ---------------------------------------------------------------------------
# Named tolerance functions
# ---------------------------------------------------------------------------


def saddle_adversarial_epsilon() -> CPlusFn:
    """The tolerance 2^(-|x|_inf) that defeats the planar saddle.

    It decays doubly exponentially along the expanding axis orbit
    (value 2^(-2^n) at the n-th forward point), pinning any candidate
    shadowing point onto the forward seed.
    """
    return Exp2Neg(Norm(MetricKind.SUP))


def decaying_epsilon(rate: float) -> CPlusFn:
    """min(1, rate/(1 + |x|_inf)): strictly positive, vanishing at infinity."""
    if rate <= 0.0:
        raise ContractViolation("rate must be positive")
    return Min(Const(1.0), Mul(Const(rate), Recip(Add(Const(1.0), Norm(MetricKind.SUP)))))


# ---------------------------------------------------------------------------
# Diagonal neighborhoods and the infimal-convolution construction
# ---------------------------------------------------------------------------


class NeighborhoodSpec:
    """A diagonal neighborhood of ball type: E[x] = open ball of radius rho(x)."""

    def __init__(self, radius: CPlusFn):
        self.radius = radius


def epsilon_from_neighborhood(nbhd: NeighborhoodSpec, grid, metric: MetricKind = MetricKind.SUP) -> Envelope:
    """Turn a ball-type diagonal neighborhood into a tolerance function.

    Returns the sampled infimal convolution
    ``eps(x) = min over grid points y of (rho(y) + d(x, y))``, the largest
    1-Lipschitz function dominated by rho on the grid.  For ball-type
    neighborhoods the distance from a center to its ball's complement equals
    the radius, so rho itself is the correct ingredient.

    Guarantees on the grid: eps <= rho pointwise, eps is 1-Lipschitz, and
    d(x, y) < eps(x) implies d(x, y) < rho(x) (the tolerance ball sits inside
    the neighborhood slice).
    """
    pts = np.asarray(grid, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ContractViolation("grid must be a nonempty (M, d) array")
    rho_values = nbhd.radius.eval(pts)
    rho_values = np.atleast_1d(rho_values)
    return Envelope(pts, rho_values, metric)


# ---------------------------------------------------------------------------
# Delta synthesis for homotheties
# ---------------------------------------------------------------------------


def _metric_directions(metric: MetricKind, dim: int, count: int) -> np.ndarray:
    u = sample_directions(MetricKind.EUCLIDEAN, dim, count)
    norms = metric_norm(metric, u)
    return u / norms[:, None]


def _reference_levels(epsilon: CPlusFn, metric: MetricKind, sphere_samples: int, dim: int):
    """(r0, m): the tolerance at the origin and 0.9 times the sampled ball minimum."""
    origin = np.zeros(dim)
    r0 = float(epsilon.eval(origin))
    dirs = _metric_directions(metric, dim, sphere_samples)
    radii = np.linspace(0.0, r0, 33)
    ball = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, dim)
    m = 0.9 * float(np.min(epsilon.eval(ball)))
    return r0, m


def delta_reference_levels(epsilon: CPlusFn, metric: MetricKind = MetricKind.SUP,
                           sphere_samples: int = 64, dim: int = 2):
    """Expose (r0, m) exactly as the synthesizer derives them."""
    if sphere_samples < 4:
        raise ContractViolation("need at least 4 sphere samples")
    return _reference_levels(epsilon, metric, sphere_samples, dim)


def synthesize_delta_homothety(epsilon: CPlusFn, metric: MetricKind = MetricKind.SUP,
                               sphere_samples: int = 64, factor: float = 2.0,
                               rho_max: float = float(2 ** 16), radial_points: int = 512,
                               dim: int = 2) -> RadialTable:
    """Build a pseudo-orbit slack delta for the homothety x -> factor*x.

    With r0 = epsilon(0) and m = 0.9 * (sampled min of epsilon over the closed
    ball of radius r0), the returned radial table is

        delta(x) = 0.5 * G(|x|) / (1 + |x|)

    where g(s) is the sampled-direction minimum at radius s of epsilon, m and,
    for s > r0, the escape bound s*(k-1)/(2k) (k = |factor|; equal to s/4 at
    k = 2), and G is the running minimum of g along the radial grid.  By
    construction delta is strictly positive and, at every verified point,

        delta < epsilon,   delta < m,   delta < |x|*(k-1)/(2k) outside the
        ball,   and delta is strictly decreasing in the norm.

    The 0.9 and 0.5 safety factors absorb the sampling of true minima; callers
    re-verify a posteriori with ``verify_delta_conditions``.  Beyond rho_max
    the table continues by the harmonic tail rule, which preserves positivity
    and strict decrease at arbitrarily large radii.
    """
    if sphere_samples < 4:
        raise ContractViolation("need at least 4 sphere samples")
    k = abs(float(factor))
    if k <= 1.0:
        raise ContractViolation("synthesis needs an expanding factor, |factor| > 1")
    r0, m = _reference_levels(epsilon, metric, sphere_samples, dim)

    near = min(4.0 * r0, rho_max)
    # Geometric knots resolve small radii; the absolute-step band keeps the
    # linear interpolant below exponentially decaying tolerances out to the
    # radius where any such tolerance leaves double range (around 1e3).
    s_grid = np.unique(np.concatenate([
        np.linspace(0.0, near, 65),
        np.geomspace(max(near, 1e-12), rho_max, radial_points),
        np.arange(near, min(rho_max, 2200.0), 4.0),
    ]))
    dirs = _metric_directions(metric, dim, sphere_samples)
    pts = (s_grid[:, None, None] * dirs[None, :, :]).reshape(-1, dim)
    eps_on_rays = epsilon.eval(pts).reshape(len(s_grid), sphere_samples)
    g = np.minimum(np.min(eps_on_rays, axis=1), m)
    outside = s_grid > r0
    escape_bound = s_grid * (k - 1.0) / (2.0 * k)
    g = np.where(outside, np.minimum(g, escape_bound), g)
    G = np.minimum.accumulate(g)
    with np.errstate(under="ignore"):
        values = 0.5 * G / (1.0 + s_grid)

    # A tolerance that decays exponentially drives the profile below double
    # range long before rho_max.  Truncate at the last comfortably
    # representable knot and drop the continuation to the smallest subnormal
    # with a constant tail: admissible perturbations out there round to
    # exactly zero, which is also what the true (unrepresentably small)
    # profile would force.
    dead = values <= 1e-300
    if np.any(dead):
        cut = int(np.argmax(dead))
        if cut < 2:
            raise ContractViolation("tolerance collapses immediately; cannot synthesize")
        edge = s_grid[cut - 1] * (1.0 + 1e-9)
        pairs = np.column_stack([
            np.append(s_grid[:cut], edge),
            np.append(values[:cut], _TINY),
        ])
        return RadialTable(pairs, metric, tail="clamp")
    return RadialTable(np.column_stack([s_grid, values]), metric, tail="harmonic")


class DeltaConditionReport:
    """Outcome of re-verifying a synthesized delta at random points."""

    def __init__(self, r0, m, factor, checked, failures):
        self.r0 = r0
        self.m = m
        self.factor = factor
        self.checked = checked
        self.failures = dict(failures)

    @property
    def ok(self) -> bool:
        return all(v == 0 for v in self.failures.values())

    def __repr__(self):
        return f"<DeltaConditionReport checked={self.checked} failures={self.failures}>"


def verify_delta_conditions(delta: CPlusFn, epsilon: CPlusFn, metric: MetricKind = MetricKind.SUP,
                            factor: float = 2.0, n_points: int = 100_000, rng=None,
                            dim: int = 2, r_hi: float | None = None) -> DeltaConditionReport:
    """Check the four synthesis conditions at independent random points.

    All comparisons are strict with zero tolerance; the safety factors baked
    into the synthesis provide the slack.  Points mix uniform radii inside
    the reference ball with log-uniform radii spanning the profile's radial
    reach (for a radial table, just inside its last knot; beyond it both the
    profile and a collapsing tolerance leave double range, where strict
    comparisons are meaningless).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    k = abs(float(factor))
    r0, m = _reference_levels(epsilon, metric, sphere_samples=256, dim=dim)
    if r_hi is None:
        if isinstance(delta, RadialTable):
            r_hi = 0.999 * float(delta.radii[-1])
        else:
            r_hi = float(2 ** 18)

    n_inside = n_points // 2
    n_outside = n_points - n_inside
    radii_in = rng.uniform(0.0, r0, size=n_inside)
    radii_out = np.exp(rng.uniform(np.log(max(r0 * 1e-3, 1e-9)), np.log(r_hi), size=n_outside))
    radii = np.concatenate([radii_in, radii_out])
    u = rng.standard_normal((n_points, dim))
    u /= np.maximum(metric_norm(metric, u), 1e-300)[:, None]
    pts = u * radii[:, None]

    d_vals = delta.eval(pts)
    e_vals = epsilon.eval(pts)
    norms = metric_norm(metric, pts)
    outside = norms > r0

    failures = {
        "below_epsilon": int(np.sum(~(d_vals < e_vals))),
        "below_ball_min": int(np.sum(~(d_vals < m))),
        "escape_bound": int(np.sum(~(d_vals[outside] < norms[outside] * (k - 1.0) / (2.0 * k)))),
    }

    # Strict decrease in the norm: compare value pairs at distinct radii.
    order = np.argsort(norms, kind="stable")
    sorted_norms = norms[order]
    sorted_vals = d_vals[order]
    distinct = np.diff(sorted_norms) > 0.0
    failures["strictly_decreasing"] = int(np.sum(~(np.diff(sorted_vals)[distinct] < 0.0)))

    return DeltaConditionReport(r0, m, factor, n_points, failures)


def random_positive_fn(rng) -> CPlusFn:
    """A random member of C+: floor + amplitude * 2^(-b*|x|_inf).

    Strictly positive, bounded, strictly decreasing in the norm.  Used to
    exercise adversarial constructions against arbitrary slacks.
    """
    floor = float(rng.uniform(0.02, 0.3))
    amp = float(rng.uniform(0.1, 2.0))
    b = float(rng.uniform(0.2, 2.0))
    return Add(Const(floor), Mul(Const(amp), Exp2Neg(Mul(Const(b), Norm(MetricKind.SUP)))))
