"""Decision and construction core for finite-window shadowing.

Whether some orbit tracks a pseudo-orbit within a tolerance is, for a
diagonal-affine map under the sup norm, an exactly decidable question on any
finite window: the candidate position y at index 0 must satisfy, per window
index n and coordinate j,

    | a_j^n * y_j + drift_j(n) - (x_n)_j |  <=  epsilon(x_n) - margin

and each such constraint is an interval for y_j.  ``box_feasibility``
intersects them from the center of the window outward and returns either a
nonempty box with a witness or an emptiness certificate recording the first
window depth at which some coordinate's intersection vanished.

The strict inequalities of the shadowing definition become ``<= eps - margin``
with a configurable margin: emptiness verdicts are then robust to rounding at
the price of possibly misreporting nearly degenerate nonempty cases, which
are flagged (``near_degenerate``) so callers can fall back to the sampled
oracle.

For expanding homotheties the module also builds the shadowing orbit itself:
writing x_i = k*x_{i-1} + r_i for the realized perturbations r_i, the point

    w = x_start + sum_i r_i * k^(-i)

starts an orbit whose distance to the pseudo-orbit at offset l is exactly
the norm of the perturbation tail sum beyond l, hence bounded by the
geometric tail of the slack values.  ``forward_to_full_shadow`` upgrades a
forward-only shadower to the full window by shifting the sequence and
following the iterates f^k(y_{-k}), reporting non-convergence rather than
guessing a limit.

``sampled_search`` is the independent oracle: a brute-force grid scan over a
candidate box, valid for any map and metric, including warped metrics whose
balls are not boxes.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .cplus import CPlusFn
from .errors import (
    ContractViolation,
    DegenerateMarginError,
    NonConvergenceError,
    SearchSpaceError,
    UnsupportedMapError,
)
from .geometry import MetricKind, as_point, distance, metric_norm, sample_directions
from .maps import DiagonalAffine, MapSpec, is_diagonal_affine
from .pseudo_orbit import OrbitWindow, PseudoOrbitSpec, realize

__all__ = [
    "ShadowReport",
    "is_shadowed_by",
    "FeasibilityCertificate",
    "box_feasibility",
    "homothety_shadow_point",
    "shadow_tail_bound",
    "forward_to_full_shadow",
    "SearchResult",
    "sampled_search",
    "transported_epsilon_values",
]


# ---------------------------------------------------------------------------
# Shadow reports
# ---------------------------------------------------------------------------


@dataclass
class ShadowReport:
    """Per-index audit of d(f^n(y), x_n) against the tolerance."""

    start: int
    distances: np.ndarray
    tolerances: np.ndarray

    @property
    def slacks(self) -> np.ndarray:
        return self.tolerances - self.distances

    @property
    def passed(self) -> bool:
        return bool(np.all(self.slacks > 0.0))

    @property
    def worst_index(self) -> int:
        return int(self.start + np.argmin(self.slacks))

    def to_obj(self) -> dict:
        return {
            "passed": self.passed,
            "worst_index": self.worst_index,
            "indices": [int(self.start + i) for i in range(len(self.distances))],
            "distances": [float(v) for v in self.distances],
            "tolerances": [float(v) for v in self.tolerances],
        }

    def to_csv(self, extra: dict[str, np.ndarray] | None = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        header = ["n", "distance", "tolerance", "slack"]
        columns = []
        if extra:
            for name in sorted(extra):
                header.append(name)
                columns.append(np.asarray(extra[name]))
        writer.writerow(header)
        for i in range(len(self.distances)):
            row = [
                int(self.start + i),
                repr(float(self.distances[i])),
                repr(float(self.tolerances[i])),
                repr(float(self.slacks[i])),
            ]
            row += [repr(float(c[i])) for c in columns]
            writer.writerow(row)
        return buf.getvalue()


def _orbit_of(m: MapSpec, y: np.ndarray, start: int, count: int) -> np.ndarray:
    """f^n(y) for n = start..start+count-1, exact closed form when available."""
    ns = np.arange(start, start + count)
    if isinstance(m, DiagonalAffine):
        return m.orbit(y, ns)
    points = np.empty((count, y.size))
    # March outward from index 0 so inverses are only composed with inverses.
    if start <= 0 <= start + count - 1:
        points[-start] = y
    p = y
    for n in range(1, start + count):
        p = m.apply(p)
        if n >= start:
            points[n - start] = p
    p = y
    for n in range(-1, start - 1, -1):
        p = m.apply_inverse(p)
        if n <= start + count - 1:
            points[n - start] = p
    return points


def is_shadowed_by(window: OrbitWindow, y, m: MapSpec, epsilon,
                   metric: MetricKind = MetricKind.SUP) -> ShadowReport:
    """Compare the orbit of ``y`` to the window under the tolerance.

    ``epsilon`` may be a function or a precomputed per-index array (used for
    transported tolerances).
    """
    y = as_point(y)
    orbit = _orbit_of(m, y, window.start, len(window))
    dists = distance(metric, orbit, window.points)
    if isinstance(epsilon, CPlusFn):
        tols = np.atleast_1d(epsilon.eval(window.points))
    else:
        tols = np.asarray(epsilon, dtype=float)
        if tols.shape != (len(window),):
            raise ContractViolation("need one tolerance per window index")
    return ShadowReport(window.start, dists, tols)


# ---------------------------------------------------------------------------
# Exact feasibility for diagonal-affine maps
# ---------------------------------------------------------------------------


@dataclass
class FeasibilityCertificate:
    """Result of the exact finite-window decision.

    ``outcome`` is "nonempty" (with the feasibility box and a witness, the
    box center) or "empty" (with the first |n| at which some coordinate's
    interval intersection vanished).  ``trace`` records, in processing order,
    the per-coordinate intervals after each constraint.  ``near_degenerate``
    marks decisions within 4*margin of flipping; those should be cross-checked
    with the sampled oracle.
    """

    outcome: str
    window_limit: int
    margin: float
    lo: np.ndarray
    hi: np.ndarray
    witness: np.ndarray | None = None
    emptiness_window: int | None = None
    near_degenerate: bool = False
    trace: list = field(default_factory=list)  # (n, lo copy, hi copy)

    @property
    def empty(self) -> bool:
        return self.outcome == "empty"

    def to_obj(self) -> dict:
        dim = len(self.lo)
        obj = {
            "outcome": self.outcome,
            "window_limit": int(self.window_limit),
            "margin": float(self.margin),
            "near_degenerate": bool(self.near_degenerate),
            "box": [[float(a), float(b)] for a, b in zip(self.lo, self.hi)],
            # One intersection trace per coordinate: entries [n, lo, hi] in
            # processing order.
            "trace": [
                [[int(n), float(lo[j]), float(hi[j])] for n, lo, hi in self.trace]
                for j in range(dim)
            ],
        }
        if self.witness is not None:
            obj["witness"] = [float(v) for v in self.witness]
        if self.emptiness_window is not None:
            obj["emptiness_window"] = int(self.emptiness_window)
        return obj

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_obj(), sort_keys=True, **kwargs)

    def trace_to_csv(self) -> str:
        """Interval widths per processed constraint, one column per coordinate."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        dim = len(self.lo)
        writer.writerow(["order", "n"] + [f"width{j + 1}" for j in range(dim)])
        for i, (n, lo, hi) in enumerate(self.trace):
            widths = [repr(max(float(b - a), 0.0)) for a, b in zip(lo, hi)]
            writer.writerow([i, int(n)] + widths)
        return buf.getvalue()


def _constraint_order(n_min: int, n_max: int, limit: int) -> list[int]:
    order = [0]
    for k in range(1, limit + 1):
        if k <= n_max:
            order.append(k)
        if -k >= n_min:
            order.append(-k)
        if k > n_max and -k < n_min:
            break
    return order


def box_feasibility(spec: PseudoOrbitSpec, epsilon: CPlusFn, window_limit: int,
                    margin: float = 0.0) -> FeasibilityCertificate:
    """Decide finite-window shadowing feasibility exactly.

    Processes constraints for n = 0, +1, -1, ... out to ``window_limit``
    (clipped to the spec's window for explicit rules; spliced rules extend on
    demand).  Requires a diagonal-affine map and the sup norm, where tolerance
    balls are boxes and orbit maps are coordinatewise affine.

    Raises ``UnsupportedMapError`` for other maps (use ``sampled_search``) and
    ``DegenerateMarginError`` if a still-undecided run reaches a constraint
    whose tolerance does not exceed the margin.
    """
    m = spec.map
    if not is_diagonal_affine(m):
        raise UnsupportedMapError(
            f"{type(m).__name__} is not diagonal-affine; use sampled_search instead"
        )
    if margin < 0.0:
        raise ContractViolation("margin must be nonnegative")
    window_limit = int(window_limit)
    if window_limit < 0:
        raise ContractViolation("window_limit must be positive")

    from .pseudo_orbit import ExplicitRule

    if isinstance(spec.rule, ExplicitRule):
        n_min = max(spec.window[0], spec.rule.start)
        n_max = min(spec.window[1], spec.rule.start + len(spec.rule.points) - 1)
    else:
        n_min, n_max = -window_limit, window_limit
    order = _constraint_order(n_min, n_max, window_limit)

    dim = m.dimension
    lo = np.full(dim, -np.inf)
    hi = np.full(dim, np.inf)
    trace: list = []

    window = realize(spec, (min(order), max(order)))
    eps_all = np.atleast_1d(epsilon.eval(window.points))

    for n in order:
        x_n = window.point_at(n)
        eps_n = float(eps_all[n - window.start])
        radius = eps_n - margin
        if radius <= 0.0:
            raise DegenerateMarginError(n, eps_n, margin)
        pow_, drift = m.power_coefficients(n)
        center = x_n - drift
        end_a = (center - radius) / pow_
        end_b = (center + radius) / pow_
        lo_n = np.minimum(end_a, end_b)
        hi_n = np.maximum(end_a, end_b)
        lo = np.maximum(lo, lo_n)
        hi = np.minimum(hi, hi_n)
        trace.append((n, lo.copy(), hi.copy()))
        if np.any(lo > hi):
            gap = float(np.max(lo - hi))
            return FeasibilityCertificate(
                outcome="empty",
                window_limit=window_limit,
                margin=margin,
                lo=lo,
                hi=hi,
                emptiness_window=abs(n),
                near_degenerate=margin > 0.0 and gap <= 4.0 * margin,
                trace=trace,
            )

    witness = 0.5 * (lo + hi)
    min_width = float(np.min(hi - lo))
    return FeasibilityCertificate(
        outcome="nonempty",
        window_limit=window_limit,
        margin=margin,
        lo=lo,
        hi=hi,
        witness=witness,
        near_degenerate=margin > 0.0 and min_width <= 4.0 * margin,
        trace=trace,
    )


# ---------------------------------------------------------------------------
# Constructive shadowing for homotheties
# ---------------------------------------------------------------------------


def _linear_scales(factor, dim: int) -> np.ndarray:
    scales = np.atleast_1d(np.asarray(factor, dtype=float))
    if scales.size == 1:
        scales = np.full(dim, scales[0])
    if scales.shape != (dim,):
        raise ContractViolation("factor must be a scalar or one scale per coordinate")
    moduli = np.abs(scales)
    if not np.allclose(moduli, moduli[0]):
        raise ContractViolation("shadow series needs a single expansion modulus")
    if moduli[0] <= 1.0:
        raise ContractViolation("shadow series needs an expanding factor, |k| > 1")
    return scales


def homothety_shadow_point(window: OrbitWindow, factor=2.0, dtype=None) -> tuple[int, np.ndarray]:
    """Shadow-point series for an expanding linear diagonal map.

    With per-step perturbations r_i = x_{start+i} - A x_{start+i-1} the
    returned point is w = x_start + sum_{i=1..L} A^(-i) r_i, anchored at the
    window's start index: the orbit n -> f^(n-start)(w) is the shadowing
    candidate.  ``factor`` may be a scalar k or per-coordinate scales with a
    common modulus (which admits the orientation-reversing variant
    diag(k, -k)).

    ``dtype`` selects the accumulation precision; pass ``np.longdouble`` when
    the point will be iterated far forward, since k^n magnifies the storage
    rounding of w.
    """
    if len(window) < 2:
        raise ContractViolation("window too short: need at least one step")
    scales = _linear_scales(factor, window.dimension)
    if dtype is None:
        dtype = np.float64
    x = window.points.astype(dtype)
    residuals = x[1:] - x[:-1] * scales[None, :].astype(dtype)
    L = residuals.shape[0]
    inv_powers = np.cumprod(np.tile(1.0 / scales.astype(dtype), (L, 1)), axis=0)
    w = x[0] + np.sum(residuals * inv_powers, axis=0)
    return window.start, w


def homothety_shadow_report(window: OrbitWindow, epsilon, factor=2.0,
                            metric: MetricKind = MetricKind.SUP) -> tuple[np.ndarray, ShadowReport]:
    """Shadow point plus its report, with distances evaluated stably.

    The orbit of the series point w satisfies, identically,

        f^l(w) - x_{start+l} = sum_{i > l} A^(l-i) r_i

    so the per-index distance equals the norm of the perturbation tail sum.
    Evaluating the right-hand side (by the backward recurrence
    D_l = (r_{l+1} + D_{l+1}) / A) avoids the catastrophic cancellation of
    subtracting two nearly equal k^l-sized points, which matters once the
    window's far end exceeds about 2^50 times its start.
    """
    scales = _linear_scales(factor, window.dimension)
    start, w = homothety_shadow_point(window, factor)
    x = window.points
    residuals = x[1:] - x[:-1] * scales[None, :]
    L = residuals.shape[0]
    tails = np.zeros((L + 1, window.dimension))
    for i in range(L, 0, -1):
        tails[i - 1] = (residuals[i - 1] + tails[i]) / scales
    dists = metric_norm(metric, tails)
    if isinstance(epsilon, CPlusFn):
        tols = np.atleast_1d(epsilon.eval(window.points))
    else:
        tols = np.asarray(epsilon, dtype=float)
    return w, ShadowReport(window.start, dists, tols)


def shadow_tail_bound(window: OrbitWindow, m: MapSpec, delta: CPlusFn, factor=2.0) -> np.ndarray:
    """Geometric tail bound on the shadow-point distances, per window index.

    bound_l = sum_{i > l} delta(f(x_{i-1})) * k^(l-i), computed with the
    actual slack values along the window; the measured distance of the
    shadow-point orbit never exceeds it when every perturbation respects the
    strict slack condition.
    """
    scales = _linear_scales(factor, window.dimension)
    k = float(np.abs(scales[0]))
    images = m.apply(window.points[:-1])
    d_vals = np.atleast_1d(delta.eval(images))
    L = len(d_vals)
    bounds = np.zeros(L + 1)
    for i in range(L, 0, -1):
        bounds[i - 1] = (bounds[i] + d_vals[i - 1]) / k
    return bounds


def forward_to_full_shadow(spec: PseudoOrbitSpec, epsilon: CPlusFn, forward_shadower,
                           depth: int, tol: float,
                           metric: MetricKind = MetricKind.SUP) -> np.ndarray:
    """Upgrade a forward-only shadower to the whole window by shifting.

    For k = 0..depth the sequence is reindexed as z_n = x_{n-k} and handed to
    ``forward_shadower`` (a callable taking an OrbitWindow starting at 0 and
    returning a point whose forward orbit shadows it).  The iterates
    f^k(y_{-k}) must all fall in the closed ball around x_0 of radius
    epsilon(x_0); a violation is a contract breach of the shadower.  If the
    iterate sequence is Cauchy within ``tol`` over its last quarter the final
    iterate is returned, otherwise ``NonConvergenceError`` carries the
    trailing diameter trace; nothing is guessed.
    """
    if depth < 1:
        raise ContractViolation("depth must be positive")
    x0 = realize(spec, (0, 0)).points[0]
    eps0 = float(epsilon.eval(x0))
    n_max = spec.window[1]
    iterates = []
    for k in range(depth + 1):
        shifted = realize(spec, (-k, n_max))
        z_window = OrbitWindow(0, shifted.points)
        y = as_point(forward_shadower(z_window))
        fk = spec.map.iterate(y, k)
        gap = float(distance(metric, fk, x0))
        if gap > eps0:
            raise ContractViolation(
                f"forward shadower broke containment at shift {k}: d={gap!r} > {eps0!r}"
            )
        iterates.append(fk)
    pts = np.stack(iterates)
    tail_len = max(2, (depth + 1) // 4)
    tail = pts[-tail_len:]
    diffs = distance(metric, tail[:, None, :], tail[None, :, :])
    diameters = [float(np.max(distance(metric, pts[j:][:, None, :], pts[j:][None, :, :])))
                 for j in range(len(pts) - 1)]
    if float(np.max(diffs)) > tol:
        raise NonConvergenceError(
            f"iterates not Cauchy within {tol!r} over the last {tail_len} shifts",
            diameters,
        )
    return pts[-1]


# ---------------------------------------------------------------------------
# Sampled search oracle
# ---------------------------------------------------------------------------


@dataclass
class SearchResult:
    """Outcome of the brute-force grid oracle."""

    found: np.ndarray | None
    checked: int
    grid_step: float
    near_miss: np.ndarray | None = None
    refined: bool = False

    @property
    def absent(self) -> bool:
        return self.found is None

    def to_obj(self) -> dict:
        return {
            "found": None if self.found is None else [float(v) for v in self.found],
            "checked": int(self.checked),
            "grid_step": float(self.grid_step),
            "near_miss": None if self.near_miss is None else [float(v) for v in self.near_miss],
            "refined": bool(self.refined),
        }


_MAX_GRID = 100_000_000
_GRID_CACHE: dict[tuple, np.ndarray] = {}


def _grid_axes(search_box, grid_step: float) -> list[np.ndarray]:
    axes = []
    for lo, hi in search_box:
        if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
            raise ContractViolation("search box must be bounded with lo <= hi")
        count = int(np.floor((hi - lo) / grid_step + 0.5)) + 1
        axes.append(lo + grid_step * np.arange(count))
    return axes


def _selectivity_order(window: OrbitWindow, eps_vals: np.ndarray,
                       n_min: int, n_max: int) -> list[int]:
    # Tightest tolerance first (deep indices break ties): the live set then
    # collapses before the expensive full-set work can repeat.
    return sorted(range(n_min, n_max + 1),
                  key=lambda n: (eps_vals[n - window.start], -abs(n)))


def _scan_diagonal_chunks(spec: PseudoOrbitSpec, eps_vals: np.ndarray,
                          window: OrbitWindow, metric: MetricKind,
                          axes: list[np.ndarray]) -> tuple[np.ndarray | None, np.ndarray | None]:
    """Stream the virtual grid in row blocks; first surviving point wins.

    Chunks follow row-major index order; within a chunk all window
    constraints are applied (most restrictive first) with pruning.  The first
    chunk that keeps a survivor therefore contains the globally first passing
    grid point, and the scan stops there.  On absence the best near-miss at
    the killing constraints is carried across chunks.
    """
    m = spec.map
    n_min, n_max = spec.window
    order = _selectivity_order(window, eps_vals, n_min, n_max)
    coefficients = {n: m.power_coefficients(n) for n in order if n != 0}

    rest = axes[1:]
    rest_size = int(np.prod([len(a) for a in rest])) if rest else 1
    rows_per_chunk = max(1, 1_000_000 // max(rest_size, 1))
    best_gap = np.inf
    best_point = None

    for row_start in range(0, len(axes[0]), rows_per_chunk):
        block_axes = [axes[0][row_start:row_start + rows_per_chunk]] + rest
        mesh = np.meshgrid(*block_axes, indexing="ij")
        live = np.stack([b.ravel() for b in mesh], axis=-1)
        live_idx = np.arange(live.shape[0])
        dead = False
        for n in order:
            if n == 0:
                img = live
            else:
                pow_, drift = coefficients[n]
                img = live * pow_ + drift
            x_n = window.point_at(n)
            e_n = float(eps_vals[n - window.start])
            dist = distance(metric, img, x_n)
            ok = dist < e_n
            if not np.any(ok):
                gaps = dist - e_n
                j = int(np.argmin(gaps))
                if gaps[j] < best_gap:
                    best_gap = float(gaps[j])
                    best_point = live[j].copy()
                dead = True
                break
            if not np.all(ok):
                live = live[ok]
                live_idx = live_idx[ok]
        if not dead and live.shape[0] > 0:
            return live[int(np.argmin(live_idx))].copy(), None
    return None, best_point


def _scan(spec: PseudoOrbitSpec, epsilon: CPlusFn, metric: MetricKind,
          candidates: np.ndarray) -> tuple[np.ndarray | None, np.ndarray | None]:
    """(first passing candidate, near miss) for the spec's window constraints.

    The surviving set is an intersection, so constraints may be processed in
    any order.  Diagonal-affine maps admit constant-time jumps to any window
    index, so they are processed most-restrictive-tolerance-first, which
    collapses the live set (usually on the first pass) before the expensive
    full-grid work repeats; other maps are marched sequentially from index 0.
    """
    n_min, n_max = spec.window
    window = realize(spec)
    eps_vals = np.atleast_1d(epsilon.eval(window.points))

    m = spec.map
    live_idx = np.arange(candidates.shape[0])
    live = candidates

    def check(img, n):
        """(all_dead, mask_or_near_miss) for constraint n over the live set."""
        x_n = window.point_at(n)
        e_n = float(eps_vals[n - window.start])
        dist = distance(metric, img, x_n)
        ok = dist < e_n
        if not np.any(ok):
            return True, live[int(np.argmin(dist - e_n))].copy()
        return False, ok

    if isinstance(m, DiagonalAffine):
        order = _selectivity_order(window, eps_vals, n_min, n_max)
        for n in order:
            if n == 0:
                img = live
            else:
                pow_, drift = m.power_coefficients(n)
                img = live * pow_ + drift
            dead, out = check(img, n)
            if dead:
                return None, out
            if not np.all(out):
                live = live[out]
                live_idx = live_idx[out]
    else:
        sweeps = [(0, 0, 1), (1, n_max, 1), (-1, n_min, -1)]
        for begin, end, step in sweeps:
            if (end - begin) * step < 0:
                continue
            current = live.copy()
            for n in range(begin, end + step, step):
                if n != 0:
                    current = m.apply(current) if step > 0 else m.apply_inverse(current)
                dead, out = check(current, n)
                if dead:
                    return None, out
                if not np.all(out):
                    live = live[out]
                    live_idx = live_idx[out]
                    current = current[out]
    first = int(np.argmin(live_idx))
    return live[first].copy(), None


def sampled_search(spec: PseudoOrbitSpec, epsilon: CPlusFn, metric: MetricKind,
                   search_box, grid_step: float, refine: bool = True) -> SearchResult:
    """Grid-scan a box for a point whose whole-window report passes.

    The fallback decision procedure for maps without the diagonal-affine
    structure, and the independent oracle validating the exact one.  Scans in
    row-major order and returns the first passing grid point; on absence, one
    refinement pass halves the step in a one-cell neighborhood of the closest
    miss before giving up.
    """
    if grid_step <= 0.0:
        raise ContractViolation("grid_step must be positive")
    axes = _grid_axes(search_box, grid_step)
    total = int(np.prod([len(a) for a in axes]))
    if total > _MAX_GRID:
        raise SearchSpaceError(f"grid of {total} points exceeds the {_MAX_GRID} limit")

    if is_diagonal_affine(spec.map):
        window = realize(spec)
        eps_vals = np.atleast_1d(epsilon.eval(window.points))
        found, near = _scan_diagonal_chunks(spec, eps_vals, window, metric, axes)
    else:
        # Candidate grids are read-only; cache the few large ones that repeat.
        key = (tuple((float(lo), float(hi)) for lo, hi in search_box), float(grid_step))
        candidates = _GRID_CACHE.get(key)
        if candidates is None:
            mesh = np.meshgrid(*axes, indexing="ij")
            candidates = np.stack([m.ravel() for m in mesh], axis=-1)
            if len(_GRID_CACHE) < 4:
                _GRID_CACHE[key] = candidates
        found, near = _scan(spec, epsilon, metric, candidates)

    if found is not None:
        return SearchResult(found, total, grid_step)
    if refine and near is not None:
        sub_axes = [near[j] + (grid_step / 2.0) * np.arange(-2, 3) for j in range(len(axes))]
        sub_mesh = np.meshgrid(*sub_axes, indexing="ij")
        sub = np.stack([m.ravel() for m in sub_mesh], axis=-1)
        found2, _ = _scan(spec, epsilon, metric, sub)
        if found2 is not None:
            return SearchResult(found2, total + sub.shape[0], grid_step, refined=True)
        return SearchResult(None, total + sub.shape[0], grid_step, near_miss=near, refined=True)
    return SearchResult(None, total, grid_step, near_miss=near)


# ---------------------------------------------------------------------------
# Conjugacy transport
# ---------------------------------------------------------------------------


def transported_epsilon_values(window: OrbitWindow, eps_values, change,
                               metric: MetricKind = MetricKind.SUP,
                               boundary_samples: int = 64,
                               safety: float = 1.05) -> np.ndarray:
    """Tolerances for a transported window that cover the transported balls.

    For each window point x with tolerance e, samples the image under the
    change of coordinates of the sphere of radius e (plus a half-radius
    shell) around x and returns ``safety`` times the largest displacement
    from change(x).  By construction the ball around change(x) with the
    returned radius contains the sampled image of the ball around x, so a
    passing report transports to a passing report.
    """
    eps_values = np.asarray(eps_values, dtype=float)
    if eps_values.shape != (len(window),):
        raise ContractViolation("need one tolerance per window index")
    dirs = sample_directions(metric if metric is not MetricKind.POLAR_WARP else MetricKind.EUCLIDEAN,
                             window.dimension, boundary_samples)
    centers = window.points
    images = change.apply(centers)
    out = np.empty(len(window))
    shells = np.array([0.5, 1.0])
    for i in range(len(window)):
        offsets = (shells[:, None, None] * eps_values[i] * dirs[None, :, :]).reshape(-1, window.dimension)
        sampled = change.apply(centers[i] + offsets)
        out[i] = safety * float(np.max(distance(metric, sampled, images[i])))
    return out
