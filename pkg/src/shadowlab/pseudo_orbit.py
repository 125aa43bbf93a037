"""Construction, validation, and classification of delta-pseudo-orbits.

A pseudo-orbit is a finite window of a bi-indexed sequence {x_n} governed by
a map f and a slack function delta through the strict step condition

    d(f(x_n), x_{n+1}) < delta(f(x_n)).

Two rules generate windows:

* ``Explicit``: a stored list of points with a start index.
* ``Spliced``: two seeds anchored at index 0; points are f^n(forward_seed)
  for n >= splice index and f^n(backward_seed) for n < it.  Every step is a
  true orbit step except the single jump into the splice, so the window can
  be extended on demand by the map's closed forms without storing points.
  This is the universal adversarial pattern: glue the future of one orbit to
  the past of another with one small jump.

Classification targets the homothety dichotomy: a window is ``bounded`` if
all its points stay in the closed ball of a reference radius r0, and
``escaping`` when, past the first exit, norms grow by a fixed ratio every
step ((1+k)/2 for expansion factor k, i.e. 3/2 at k=2).  ``unclassified`` is
a first-class outcome: it is the empirical signal that a slack function
violates the synthesis conditions, not an error.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .cplus import CPlusFn
from .errors import ContractViolation
from .geometry import MetricKind, as_point, distance, metric_norm, uniform_ball
from .maps import DiagonalAffine, MapSpec, map_to_dict

__all__ = [
    "ExplicitRule",
    "SplicedRule",
    "PseudoOrbitSpec",
    "OrbitWindow",
    "realize",
    "validate",
    "ValidationReport",
    "max_splice_jump",
    "OrbitClass",
    "classify_pseudo_orbit",
    "random_pseudo_orbit",
    "generate_orbit_ensemble",
    "transport_pseudo_orbit",
    "orbit_to_csv",
]


@dataclass(frozen=True)
class ExplicitRule:
    points: np.ndarray  # (L, d)
    start: int = 0

    def __post_init__(self):
        object.__setattr__(self, "points", np.atleast_2d(np.asarray(self.points, dtype=float)))


@dataclass(frozen=True)
class SplicedRule:
    forward_seed: np.ndarray
    backward_seed: np.ndarray
    splice: int = 0

    def __post_init__(self):
        object.__setattr__(self, "forward_seed", as_point(self.forward_seed))
        object.__setattr__(self, "backward_seed", as_point(self.backward_seed))


@dataclass(frozen=True)
class PseudoOrbitSpec:
    rule: ExplicitRule | SplicedRule
    window: tuple[int, int]
    map: MapSpec

    def __post_init__(self):
        n_min, n_max = self.window
        if not (n_min <= 0 <= n_max) or n_min == n_max:
            raise ContractViolation("window must be a nonempty range containing 0")


class OrbitWindow:
    """A realized window: points[i] sits at index start + i."""

    def __init__(self, start: int, points: np.ndarray):
        self.start = int(start)
        self.points = np.atleast_2d(np.asarray(points, dtype=float))

    def __len__(self):
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.start, self.start + len(self))

    @property
    def stop(self) -> int:
        return self.start + len(self) - 1

    def point_at(self, n: int) -> np.ndarray:
        if not self.start <= n <= self.stop:
            raise ContractViolation(f"index {n} outside window [{self.start}, {self.stop}]")
        return self.points[n - self.start]

    def __repr__(self):
        return f"<OrbitWindow [{self.start}, {self.stop}] d={self.dimension}>"


def _spliced_points(rule: SplicedRule, m: MapSpec, ns: np.ndarray) -> np.ndarray:
    fwd_mask = ns >= rule.splice
    if isinstance(m, DiagonalAffine):
        out = np.empty((len(ns), m.dimension))
        if np.any(fwd_mask):
            out[fwd_mask] = m.orbit(rule.forward_seed, ns[fwd_mask])
        if np.any(~fwd_mask):
            out[~fwd_mask] = m.orbit(rule.backward_seed, ns[~fwd_mask])
        return out
    return np.stack([
        m.iterate(rule.forward_seed if n >= rule.splice else rule.backward_seed, int(n))
        for n in ns
    ])


def realize(spec: PseudoOrbitSpec, window: tuple[int, int] | None = None) -> OrbitWindow:
    """Materialize the points of the window (or of an override window).

    Spliced rules extend to any window through the map's closed forms;
    explicit rules are cut to their stored range.
    """
    n_min, n_max = window if window is not None else spec.window
    ns = np.arange(n_min, n_max + 1)
    if isinstance(spec.rule, ExplicitRule):
        lo = spec.rule.start
        hi = spec.rule.start + spec.rule.points.shape[0] - 1
        if n_min < lo or n_max > hi:
            raise ContractViolation(
                f"explicit rule covers [{lo}, {hi}], cannot realize [{n_min}, {n_max}]"
            )
        return OrbitWindow(n_min, spec.rule.points[n_min - lo : n_max - lo + 1])
    return OrbitWindow(n_min, _spliced_points(spec.rule, spec.map, ns))


@dataclass
class ValidationReport:
    """Per-step slack audit of the pseudo-orbit condition."""

    start: int                 # index n of the first step n -> n+1
    gaps: np.ndarray           # d(f(x_n), x_{n+1})
    bounds: np.ndarray         # delta(f(x_n))
    passed: bool

    @property
    def step_ok(self) -> np.ndarray:
        return self.gaps < self.bounds

    def failing_steps(self) -> list[int]:
        return [int(self.start + i) for i in np.flatnonzero(~self.step_ok)]

    def to_obj(self) -> dict:
        return {
            "passed": bool(self.passed),
            "steps": [
                {"n": int(self.start + i), "gap": float(g), "bound": float(b), "ok": bool(g < b)}
                for i, (g, b) in enumerate(zip(self.gaps, self.bounds))
            ],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_obj(), sort_keys=True, **kwargs)


def validate(spec: PseudoOrbitSpec, delta: CPlusFn, metric: MetricKind = MetricKind.SUP,
             window: tuple[int, int] | None = None) -> ValidationReport:
    """Audit every step of the window; failures are data, not errors."""
    w = realize(spec, window)
    images = spec.map.apply(w.points[:-1])
    gaps = distance(metric, images, w.points[1:])
    bounds = np.atleast_1d(delta.eval(images))
    return ValidationReport(w.start, gaps, bounds, bool(np.all(gaps < bounds)))


def max_splice_jump(spec: PseudoOrbitSpec, delta: CPlusFn, metric: MetricKind = MetricKind.SUP,
                    direction: np.ndarray | None = None) -> float:
    """Largest admissible jump magnitude at the splice, times 0.99.

    The spliced sequence has exactly one nonzero step, from index splice-1
    into the splice; its size is controlled by how far the backward seed may
    sit from the forward seed.  The seeds are re-parameterized as
    ``backward = forward + q * u`` with u a metric-unit direction (taken from
    the spec's own seeds unless given), and q is located by doubling plus
    bisection against the strict step condition.  The returned value is
    multiplied by 0.99 so it stays strictly admissible under rounding.
    """
    rule = spec.rule
    if not isinstance(rule, SplicedRule):
        raise ContractViolation("max_splice_jump needs a spliced rule")
    if direction is None:
        direction = rule.backward_seed - rule.forward_seed
        if np.all(direction == 0.0):
            raise ContractViolation("seeds coincide; pass an explicit jump direction")
    direction = as_point(direction)
    if metric is MetricKind.POLAR_WARP:
        scale = float(np.linalg.norm(direction))
    else:
        scale = float(metric_norm(metric, direction))
    u = direction / scale

    def admissible(q: float) -> bool:
        bwd = rule.forward_seed + q * u
        # Step splice-1 -> splice: compare f^s(backward seed) to f^s(forward seed).
        left = spec.map.iterate(bwd, rule.splice)
        right = spec.map.iterate(rule.forward_seed, rule.splice)
        gap = float(distance(metric, left, right))
        bound = float(delta.eval(left))
        return gap < bound

    hi = float(delta.eval(rule.forward_seed))
    for _ in range(200):
        if not admissible(hi):
            break
        hi *= 2.0
    else:
        raise ContractViolation("no inadmissible jump found; slack appears unbounded")
    lo = 0.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if admissible(mid):
            lo = mid
        else:
            hi = mid
    q = 0.99 * lo
    while q > 0.0 and not admissible(q):
        q *= 0.5
    return q


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OrbitClass:
    kind: str                       # "bounded" | "escaping" | "unclassified"
    radius: float                   # the reference radius r0
    escape_index: int | None = None
    growth_ratio: float = 1.5

    @property
    def bounded(self) -> bool:
        return self.kind == "bounded"

    @property
    def escaping(self) -> bool:
        return self.kind == "escaping"


def classify_pseudo_orbit(window: OrbitWindow, r0: float,
                          metric: MetricKind = MetricKind.SUP,
                          growth_ratio: float = 1.5) -> OrbitClass:
    """Sort a realized window into the bounded/escaping dichotomy.

    ``bounded``: every point lies in the closed ball of radius r0.
    ``escaping``: past the first index i0 with |x_{i0}| > r0, norms grow by
    strictly more than ``growth_ratio`` at every step to the window's end.
    Anything else is ``unclassified``, which flags a slack function whose
    admissible perturbations are too large for the dichotomy.
    """
    norms = metric_norm(metric, window.points)
    outside = norms > r0
    if not np.any(outside):
        return OrbitClass("bounded", r0, None, growth_ratio)
    i0 = int(np.argmax(outside))
    tail = norms[i0:]
    if np.all(tail[1:] > growth_ratio * tail[:-1]):
        return OrbitClass("escaping", r0, int(window.start + i0), growth_ratio)
    return OrbitClass("unclassified", r0, int(window.start + i0), growth_ratio)


# ---------------------------------------------------------------------------
# Random generation
# ---------------------------------------------------------------------------


def _draw_in_ball(metric: MetricKind, dim: int, radius: float, rng) -> np.ndarray:
    return uniform_ball(metric, dim, rng, 1)[0] * radius


def random_pseudo_orbit(m: MapSpec, delta: CPlusFn, metric: MetricKind,
                        window: tuple[int, int], seed_point, rng,
                        keep_within: float | None = None) -> PseudoOrbitSpec:
    """Draw a random delta-pseudo-orbit around a seed at index 0.

    Forward steps perturb the exact image: x_{n+1} = f(x_n) + r with r drawn
    uniformly from the metric ball of radius 0.99 * delta(f(x_n)).  Backward
    steps pick r with |r| < 0.99 * delta(x_n - r) by halving a candidate draw
    until the strict condition holds (r = 0 always qualifies, so this stops).

    ``keep_within`` switches on anchored mode: draws are rejected until the
    next point stays inside the given radius, which manufactures members of
    the bounded class.  The rejection changes the sampling law, never the
    pseudo-orbit property: every accepted step still satisfies the strict
    slack condition.
    """
    n_min, n_max = window
    if not (n_min <= 0 <= n_max):
        raise ContractViolation("window must contain 0")
    x0 = as_point(seed_point)
    dim = x0.size
    forward: list[np.ndarray] = [x0]
    x = x0
    for _ in range(n_max):
        fx = m.apply(x)
        rad = 0.99 * float(delta.eval(fx))
        for _ in range(10_000):
            r = _draw_in_ball(metric, dim, rad, rng)
            nxt = fx + r
            # The stored step is what validation sees.  Once the slack drops
            # near the coordinate ulp (or to subnormal scales), fx + r can
            # round to an inadmissible point; halving the draw bottoms out at
            # the exact step, which is always admissible.
            for _ in range(200):
                if float(distance(metric, nxt, fx)) < rad:
                    break
                r = r * 0.5
                nxt = fx + r
            else:
                nxt = fx
            if keep_within is None or float(metric_norm(metric, nxt)) <= keep_within:
                break
        else:
            nxt = fx  # fall back to the exact step; always admissible
        forward.append(nxt)
        x = nxt
    backward: list[np.ndarray] = []
    x = x0
    for _ in range(-n_min):
        rad = 0.99 * float(delta.eval(x))
        r = _draw_in_ball(metric, dim, rad, rng)
        prev = None
        for _ in range(10_000):
            target = x - r
            # The perturbation is sized against delta at f(x_{n-1}) = target.
            if float(metric_norm(metric, r)) < 0.99 * float(delta.eval(target)):
                cand = m.apply_inverse(target)
                if keep_within is None or float(metric_norm(metric, cand)) <= keep_within:
                    prev = cand
                    break
                r = _draw_in_ball(metric, dim, rad, rng)
            else:
                r = r * 0.5
        if prev is None:
            prev = m.apply_inverse(x)  # exact step, always admissible
        backward.append(prev)
        x = prev
    points = np.stack(backward[::-1] + forward)
    return PseudoOrbitSpec(ExplicitRule(points, n_min), (n_min, n_max), m)


def generate_orbit_ensemble(m: MapSpec, delta: CPlusFn, metric: MetricKind,
                            window: tuple[int, int], count: int, seed: int,
                            r0: float, anchored_fraction: float = 0.2,
                            start_range: tuple[float, float] | None = None) -> list[PseudoOrbitSpec]:
    """A reproducible batch of random pseudo-orbits, mixed by class.

    Orbit i uses its own stream ``default_rng(seed + i)`` so batches are
    deterministic and order-independent.  A fixed fraction is generated in
    anchored mode near the origin (bounded class material); the rest start at
    log-uniform radii and escape on their own.
    """
    if start_range is None:
        start_range = (1e-2 * r0, 4.0 * r0)
    dim = getattr(m, "dimension", 2)
    delta0 = float(delta.eval(np.zeros(dim)))
    # Anchored orbits stay inside radius `keep`; that is only sustainable if
    # an admissible inward draw exists from everywhere inside, which needs
    # keep * (k - 1) comfortably below the slack near the origin.
    k = float(np.max(np.abs(m.scales))) if isinstance(m, DiagonalAffine) else 2.0
    keep = 0.45 * min(delta0, r0) / max(1.0, k - 1.0)
    specs = []
    n_anchored = int(round(anchored_fraction * count))
    for i in range(count):
        rng = np.random.default_rng(seed + i)
        if i < n_anchored:
            x0 = _draw_in_ball(metric, dim, 0.25 * keep, rng)
            specs.append(random_pseudo_orbit(m, delta, metric, window, x0, rng, keep_within=keep))
        else:
            lo, hi = start_range
            radius = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
            u = rng.standard_normal(dim)
            u /= max(float(metric_norm(metric, u)), 1e-300)
            specs.append(random_pseudo_orbit(m, delta, metric, window, radius * u, rng))
    return specs


# ---------------------------------------------------------------------------
# Transport and serialization
# ---------------------------------------------------------------------------


def transport_pseudo_orbit(window: OrbitWindow, change) -> OrbitWindow:
    """Push a realized window through a change of coordinates."""
    return OrbitWindow(window.start, change.apply(window.points))


def orbit_to_csv(window: OrbitWindow, meta: dict | None = None) -> str:
    """CSV with columns n, x1..xd; metadata rides in leading '#' lines."""
    buf = io.StringIO()
    if meta:
        for key in sorted(meta):
            buf.write(f"# {key}={json.dumps(meta[key], sort_keys=True)}\r\n")
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(["n"] + [f"x{j + 1}" for j in range(window.dimension)])
    for n, p in zip(window.indices, window.points):
        writer.writerow([int(n)] + [repr(float(v)) for v in p])
    return buf.getvalue()


def spec_meta(spec: PseudoOrbitSpec) -> dict:
    """Header metadata describing a pseudo-orbit spec."""
    if isinstance(spec.rule, SplicedRule):
        rule = {
            "kind": "spliced",
            "forward_seed": spec.rule.forward_seed.tolist(),
            "backward_seed": spec.rule.backward_seed.tolist(),
            "splice": spec.rule.splice,
        }
    else:
        rule = {"kind": "explicit", "start": spec.rule.start, "count": int(spec.rule.points.shape[0])}
    return {"map": map_to_dict(spec.map), "rule": rule, "window": list(spec.window)}
