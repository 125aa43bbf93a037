import numpy as np
import pytest

from shadowlab.cplus import Const, delta_reference_levels, saddle_adversarial_epsilon, synthesize_delta_homothety
from shadowlab.errors import (
    ContractViolation,
    DegenerateMarginError,
    NonConvergenceError,
    SearchSpaceError,
    UnsupportedMapError,
)
from shadowlab.geometry import MetricKind
from shadowlab.maps import RadialRescale, conjugate_map, homothety, saddle, translation_map
from shadowlab.pseudo_orbit import (
    ExplicitRule,
    OrbitWindow,
    PseudoOrbitSpec,
    SplicedRule,
    generate_orbit_ensemble,
    realize,
    transport_pseudo_orbit,
)
from shadowlab.shadowing import (
    box_feasibility,
    forward_to_full_shadow,
    homothety_shadow_point,
    homothety_shadow_report,
    is_shadowed_by,
    sampled_search,
    shadow_tail_bound,
)

SUP = MetricKind.SUP


def true_orbit_spec(m, seed, window):
    seed = np.asarray(seed, dtype=float)
    return PseudoOrbitSpec(SplicedRule(seed, seed, 0), window, m)


def saddle_splice(q, window=(-32, 32)):
    return PseudoOrbitSpec(
        SplicedRule(np.array([1.0, 0.0]), np.array([1.0, q]), 0), window, saddle())


# ---------------------------------------------------------------------------
# Shadow reports
# ---------------------------------------------------------------------------


def test_true_orbit_shadowed_by_its_seed():
    spec = true_orbit_spec(homothety(2.0), [0.3, -0.1], (-8, 8))
    window = realize(spec)
    report = is_shadowed_by(window, [0.3, -0.1], spec.map, Const(1.0), SUP)
    assert report.passed
    assert np.all(report.distances == 0.0)
    assert np.all(report.slacks == 1.0)


def test_forward_seed_fails_backward_for_saddle_splice():
    eps = saddle_adversarial_epsilon()
    spec = saddle_splice(0.1, (-8, 8))
    window = realize(spec)
    report = is_shadowed_by(window, [1.0, 0.0], spec.map, eps, SUP)
    offsets = window.indices
    forward = offsets >= 0
    assert np.all(report.slacks[forward] > 0.0)
    assert not report.passed
    assert report.worst_index < 0


# ---------------------------------------------------------------------------
# Exact box feasibility
# ---------------------------------------------------------------------------


def test_true_orbit_box_contains_seed():
    spec = true_orbit_spec(homothety(2.0), [0.3, 0.2], (-8, 8))
    cert = box_feasibility(spec, Const(1.0), 8, 0.0)
    assert not cert.empty
    assert np.all(cert.lo <= [0.3, 0.2]) and np.all([0.3, 0.2] <= cert.hi)
    report = is_shadowed_by(realize(spec), cert.witness, spec.map, Const(1.0), SUP)
    assert report.passed and np.all(report.slacks > 0.0)


def test_saddle_splice_certified_empty_and_oracle_agrees():
    eps = saddle_adversarial_epsilon()
    spec = saddle_splice(0.1)
    cert = box_feasibility(spec, eps, 32, 0.0)
    assert cert.empty and cert.emptiness_window <= 32
    result = sampled_search(spec, eps, SUP, [(0.0, 2.0), (-1.0, 1.0)], 1e-2)
    assert result.absent


def test_translation_splice_certified_empty_and_oracle_agrees():
    from shadowlab.cplus import decaying_epsilon

    eps = decaying_epsilon(1.0)
    spec = PseudoOrbitSpec(
        SplicedRule(np.zeros(2), np.array([0.0, 0.5]), 0), (-64, 64), translation_map(2))
    cert = box_feasibility(spec, eps, 64, 1e-12)
    assert cert.empty and cert.emptiness_window <= 64
    result = sampled_search(spec, eps, SUP, [(-1.0, 1.0), (-1.0, 1.0)], 1e-2)
    assert result.absent
    # The two-sided pinch: forward constraints squeeze the second coordinate
    # toward 0 while backward constraints squeeze it toward the jump 0.5.
    widths = [hi - lo for _, lo, hi in cert.trace]
    assert np.all(np.diff([w[1] for w in widths]) <= 1e-12)


def test_box_monotone_under_window_growth():
    spec = true_orbit_spec(homothety(2.0), [0.25, -0.5], (-16, 16))
    small = box_feasibility(spec, Const(1.0), 4, 0.0)
    large = box_feasibility(spec, Const(1.0), 8, 0.0)
    assert np.all(large.lo >= small.lo - 1e-15)
    assert np.all(large.hi <= small.hi + 1e-15)


def test_nonempty_witness_passes_with_margin():
    spec = true_orbit_spec(saddle(), [0.5, 0.25], (-6, 6))
    cert = box_feasibility(spec, Const(0.75), 6, 1e-9)
    assert not cert.empty
    report = is_shadowed_by(realize(spec), cert.witness, spec.map, Const(0.75), SUP)
    assert np.all(report.slacks > 0)


def test_degenerate_margin_raises_with_index():
    eps = saddle_adversarial_epsilon()
    spec = true_orbit_spec(saddle(), [1.0, 0.0], (-32, 32))
    with pytest.raises(DegenerateMarginError) as err:
        box_feasibility(spec, eps, 32, 1e-6)
    assert abs(err.value.n) <= 32


def test_non_diagonal_map_directed_to_oracle():
    g = conjugate_map(homothety(2.0), RadialRescale(1.0, 1.0))
    spec = true_orbit_spec(g, [0.5, 0.0], (-4, 4))
    with pytest.raises(UnsupportedMapError):
        box_feasibility(spec, Const(1.0), 4, 0.0)


# ---------------------------------------------------------------------------
# Shadow point series
# ---------------------------------------------------------------------------


def test_shadow_point_of_true_orbit_is_the_start():
    spec = true_orbit_spec(homothety(2.0), [0.7, -0.4], (-5, 10))
    window = realize(spec)
    start, w = homothety_shadow_point(window, 2.0)
    assert start == -5
    assert np.allclose(w, window.points[0], atol=0)


def test_shadow_point_single_perturbation_geometric_sum():
    # x0 = (1, 0) with one perturbation r1 = (0.1, 0): exact from step 1 on.
    m = homothety(2.0)
    pts = [np.array([1.0, 0.0])]
    pts.append(m.apply(pts[-1]) + np.array([0.1, 0.0]))
    for _ in range(6):
        pts.append(m.apply(pts[-1]))
    window = OrbitWindow(0, np.stack(pts))
    start, w = homothety_shadow_point(window, 2.0)
    assert np.allclose(w, [1.05, 0.0], atol=0)
    orbit = np.stack([m.iterate(w, n) for n in range(len(pts))])
    assert np.allclose(orbit[1:], window.points[1:], atol=1e-14)
    assert not np.allclose(orbit[0], window.points[0])


def test_residual_report_agrees_with_direct_evaluation_on_short_windows():
    eps = Const(1.0)
    delta = synthesize_delta_homothety(eps)
    r0, _ = delta_reference_levels(eps)
    specs = generate_orbit_ensemble(homothety(2.0), delta, SUP, (-6, 8), 20, 5150, r0,
                                    anchored_fraction=0.0, start_range=(1.05 * r0, 4 * r0))
    for spec in specs:
        window = realize(spec)
        w, stable = homothety_shadow_report(window, eps, 2.0, SUP)
        w0 = spec.map.iterate(w, -window.start)
        direct = is_shadowed_by(window, w0, spec.map, eps, SUP)
        assert np.allclose(stable.distances, direct.distances, atol=1e-9)


def test_measured_distance_within_tail_bound():
    eps = Const(1.0)
    delta = synthesize_delta_homothety(eps)
    r0, _ = delta_reference_levels(eps)
    specs = generate_orbit_ensemble(homothety(2.0), delta, SUP, (-10, 30), 50, 777, r0,
                                    anchored_fraction=0.0, start_range=(1.05 * r0, 4 * r0))
    for spec in specs:
        window = realize(spec)
        w, report = homothety_shadow_report(window, eps, 2.0, SUP)
        bounds = shadow_tail_bound(window, spec.map, delta, 2.0)
        assert report.passed
        assert np.all(report.distances <= bounds)


def test_shadow_series_supports_sign_flipped_scales():
    m = np.array([2.0, -2.0])
    from shadowlab.maps import DiagonalAffine

    flip = DiagonalAffine(m)
    spec = true_orbit_spec(flip, [0.4, 0.3], (-4, 8))
    window = realize(spec)
    start, w = homothety_shadow_point(window, m)
    assert np.allclose(w, window.points[0])
    with pytest.raises(ContractViolation):
        homothety_shadow_point(window, np.array([2.0, -3.0]))
    with pytest.raises(ContractViolation):
        homothety_shadow_point(window, 0.5)


# ---------------------------------------------------------------------------
# Forward-to-full
# ---------------------------------------------------------------------------


def _series_shadower(z_window):
    return homothety_shadow_point(z_window, 2.0, dtype=np.longdouble)[1]


def test_forward_to_full_true_orbit_returns_anchor():
    spec = true_orbit_spec(homothety(2.0), [0.6, -0.2], (-12, 12))
    out = forward_to_full_shadow(spec, Const(1.0), _series_shadower, 10, 1e-9, SUP)
    assert np.allclose(np.asarray(out, dtype=float), [0.6, -0.2], atol=1e-12)


def test_forward_to_full_constant_origin_shadower():
    eps = Const(1.0)
    delta = synthesize_delta_homothety(eps)
    rng = np.random.default_rng(4)
    from shadowlab.pseudo_orbit import random_pseudo_orbit

    spec = random_pseudo_orbit(homothety(2.0), delta, SUP, (-10, 10), np.zeros(2), rng,
                               keep_within=0.2)
    out = forward_to_full_shadow(spec, eps, lambda zw: np.zeros(2), 8, 1e-9, SUP)
    assert np.all(out == 0.0)


def test_forward_to_full_matches_direct_series():
    eps = saddle_adversarial_epsilon()
    delta = synthesize_delta_homothety(eps)
    r0, _ = delta_reference_levels(eps)
    specs = generate_orbit_ensemble(homothety(2.0), delta, SUP, (-20, 30), 10, 2024, r0,
                                    anchored_fraction=0.0, start_range=(1.05 * r0, 4 * r0))
    for spec in specs:
        limit = forward_to_full_shadow(spec, eps, _series_shadower, 20, 1e-9, SUP)
        window = realize(spec)
        _, w = homothety_shadow_point(window, 2.0, dtype=np.longdouble)
        direct = spec.map.iterate(w, -window.start)
        assert float(np.max(np.abs(np.asarray(limit - direct, dtype=float)))) <= 1e-8


def test_forward_to_full_reports_contract_breach():
    spec = true_orbit_spec(homothety(2.0), [0.5, 0.5], (-8, 8))
    with pytest.raises(ContractViolation):
        forward_to_full_shadow(spec, Const(1.0), lambda zw: zw.points[0] + 50.0, 5, 1e-9, SUP)


def test_forward_to_full_reports_non_convergence():
    spec = true_orbit_spec(homothety(2.0), [0.5, 0.5], (-8, 8))

    def wobbly(z_window):
        # Stays inside the containment ball at every shift, but the iterates
        # alternate by 0.6 and never settle.
        x = z_window.points[0]
        k = round(float(np.log2(0.5 / x[0])))
        return x + (0.3 * (-1.0) ** k) * (2.0 ** -k)

    with pytest.raises(NonConvergenceError) as err:
        forward_to_full_shadow(spec, Const(1.0), wobbly, 8, 1e-9, SUP)
    assert len(err.value.diameters) > 0


# ---------------------------------------------------------------------------
# Sampled search
# ---------------------------------------------------------------------------


def test_search_finds_seed_of_true_orbit():
    spec = true_orbit_spec(homothety(2.0), [0.5, -0.5], (-4, 4))
    result = sampled_search(spec, Const(1.0), SUP, [(-2.0, 2.0), (-2.0, 2.0)], 0.5)
    assert result.found is not None
    assert np.allclose(result.found, [0.5, -0.5])


def test_search_absence_matches_empty_certificate():
    from shadowlab.cplus import decaying_epsilon

    spec = PseudoOrbitSpec(
        SplicedRule(np.zeros(2), np.array([0.0, 0.5]), 0), (-32, 32), translation_map(2))
    cert = box_feasibility(spec, decaying_epsilon(1.0), 32, 0.0)
    result = sampled_search(spec, decaying_epsilon(1.0), SUP, [(-1.0, 1.0), (-1.0, 1.0)], 1e-2)
    assert cert.empty and result.absent


def test_search_on_conjugated_map_finds_transported_shadow():
    change = RadialRescale(1.0, 0.5)
    g = conjugate_map(homothety(2.0), change)
    base = true_orbit_spec(homothety(2.0), [0.75, 0.5], (-6, 10))
    window = realize(base)
    _, w = homothety_shadow_point(window, 2.0)
    w0 = homothety(2.0).iterate(w, -window.start)
    target = change.apply(w0)
    moved = transport_pseudo_orbit(window, change)
    spec = PseudoOrbitSpec(ExplicitRule(moved.points, moved.start), base.window, g)
    box = [(target[0] - 0.5, target[0] + 0.5), (target[1] - 0.5, target[1] + 0.5)]
    result = sampled_search(spec, Const(1.0), SUP, box, 0.125)
    assert result.found is not None
    assert np.allclose(result.found, target, atol=1e-12)


def test_search_grid_size_limit():
    spec = true_orbit_spec(homothety(2.0), [0.0, 0.0], (-1, 1))
    with pytest.raises(SearchSpaceError):
        sampled_search(spec, Const(1.0), SUP, [(-1.0, 1.0), (-1.0, 1.0)], 1e-5)


def test_certificate_json_schema():
    import json

    eps = saddle_adversarial_epsilon()
    cert = box_feasibility(saddle_splice(0.1), eps, 16, 0.0)
    payload = json.loads(cert.to_json())
    assert payload["outcome"] == "empty"
    assert payload["window_limit"] == 16 and payload["margin"] == 0.0
    assert payload["emptiness_window"] == cert.emptiness_window
    assert len(payload["trace"]) == 2  # one trace per coordinate
    for coord_trace in payload["trace"]:
        for n, lo, hi in coord_trace:
            assert isinstance(n, int)
    spec = true_orbit_spec(homothety(2.0), [0.25, 0.5], (-4, 4))
    payload = json.loads(box_feasibility(spec, Const(1.0), 4, 0.0).to_json())
    assert payload["outcome"] == "nonempty" and len(payload["witness"]) == 2


def test_exact_and_oracle_agree_on_nonempty_case():
    spec = true_orbit_spec(saddle(), [0.5, 0.25], (-6, 6))
    cert = box_feasibility(spec, Const(1.0), 6, 0.0)
    result = sampled_search(spec, Const(1.0), SUP, [(-2.0, 2.0), (-2.0, 2.0)], 0.25)
    assert not cert.empty and result.found is not None
    assert np.all(result.found >= cert.lo - 1e-12) and np.all(result.found <= cert.hi + 1e-12)
