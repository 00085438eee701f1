import math

import numpy as np
import pytest

from pass_uav import activation as act
from pass_uav import link_budget as lb
from pass_uav import propagation as prop
from pass_uav import scenario as scen


@pytest.fixture(scope="module")
def reference():
    return scen.generate_scenario(7, 10)


def _problem(reference, pos):
    return act.ActivationProblem.from_scenario(reference, pos)


def _random_positions(n, seed):
    rng = np.random.default_rng(seed)
    return [
        (rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(2.5, 7.5)) for _ in range(n)
    ]


def test_objective_zero_activation(reference):
    pr = _problem(reference, (30.0, 40.0, 5.0))
    assert pr.objective(np.zeros(10, dtype=int)) == 0.0


def test_objective_proportional_to_gain(reference):
    pr = _problem(reference, (30.0, 40.0, 5.0))
    bits = np.array([1, 0, 1, 0, 0, 1, 0, 0, 0, 1])
    assert pr.objective(bits) == pytest.approx(pr.rho * pr.gain(bits), rel=1e-12)


def test_objective_argmax_equals_power_argmin(reference):
    # cross-check on K=8: the objective maximizer minimizes required power
    base = scen.generate_scenario(7, 1, pa_count=8)
    pr = act.ActivationProblem.from_scenario(base, (37.0, 22.0, 5.0))
    best_by_power = None
    for word in range(1, 1 << 8):
        bits = np.array([(word >> i) & 1 for i in range(8)], dtype=int)
        p = lb.required_power(pr.gain(bits), 5.0, base.physics.noise_power_w)
        if best_by_power is None or p < best_by_power[0]:
            best_by_power = (p, bits)
    ex = act.exhaustive_best(pr)
    assert pr.gain(ex) == pytest.approx(pr.gain(best_by_power[1]), rel=1e-12)


def test_exhaustive_single_antenna():
    s = scen.generate_scenario(7, 1, pa_count=1)
    pr = act.ActivationProblem.from_scenario(s, (10.0, 10.0, 5.0))
    assert act.exhaustive_best(pr).tolist() == [1]


def test_exhaustive_aligned_phases_take_everything():
    # all phasors equal: every additional coupler adds amplitude
    phasors = np.ones(3, dtype=complex) * 1e-4
    pr = act.ActivationProblem(phasors=phasors, delta=0.3, rho=1.0)
    assert act.exhaustive_best(pr).tolist() == [1, 1, 1]


def test_exhaustive_beats_singles(reference):
    pr = _problem(reference, (61.0, 18.0, 6.0))
    best = pr.objective(act.exhaustive_best(pr))
    for k in range(10):
        bits = np.zeros(10, dtype=int)
        bits[k] = 1
        assert best >= pr.objective(bits) - 1e-15


def test_exhaustive_guard():
    pr = act.ActivationProblem(phasors=np.ones(21, dtype=complex), delta=0.3, rho=1.0)
    with pytest.raises(ValueError, match="20"):
        act.exhaustive_best(pr)


def test_relax_bound_fixed_box_is_true_objective(reference):
    pr = _problem(reference, (44.0, 33.0, 5.0))
    bits = np.array([1, 0, 1, 1, 0, 0, 0, 1, 0, 0], dtype=np.int8)
    value, a_relax = act.relax_upper_bound(pr, bits, bits)
    assert value == pytest.approx(pr.objective(bits), rel=1e-12)
    assert np.array_equal(a_relax, bits.astype(float))


def test_relax_bound_nested_boxes(reference):
    pr = _problem(reference, (44.0, 33.0, 5.0))
    root_lo = np.zeros(10, dtype=np.int8)
    root_hi = np.ones(10, dtype=np.int8)
    root, _ = act.relax_upper_bound(pr, root_lo, root_hi)
    sub_lo = root_lo.copy()
    sub_hi = root_hi.copy()
    sub_lo[0] = sub_hi[0] = 1
    sub_lo[3] = sub_hi[3] = 0
    sub, _ = act.relax_upper_bound(pr, sub_lo, sub_hi)
    assert root >= sub - 1e-9 * abs(root)


def test_relax_bound_dominates_uniform_ratio_binary_points():
    # K=6 random instances: the bound must cover every equal-ratio binary value
    # inside the box (the quantity the envelope relaxes)
    s = scen.generate_scenario(3, 1, pa_count=6)
    for pos in _random_positions(8, seed=17):
        pr = act.ActivationProblem.from_scenario(s, pos)
        lo = np.array([0, 0, 1, 0, 0, 0], dtype=np.int8)
        hi = np.array([1, 0, 1, 1, 0, 1], dtype=np.int8)
        bound, _ = act.relax_upper_bound(pr, lo, hi)
        scale = pr.rho * pr.delta**2
        for word in range(1 << 6):
            bits = np.array([(word >> i) & 1 for i in range(6)], dtype=np.int8)
            if np.any(bits < lo) or np.any(bits > hi):
                continue
            uniform = scale * abs(np.sum(pr.phasors * bits)) ** 2
            assert bound >= uniform - 1e-9 * max(1.0, abs(bound))


def test_bnb_matches_exhaustive_sweep(reference):
    for pos in _random_positions(25, seed=42):
        pr = _problem(reference, pos)
        ex_obj = pr.objective(act.exhaustive_best(pr))
        bn_obj = pr.objective(act.bnb_optimize(pr, 0.0))
        assert bn_obj == pytest.approx(ex_obj, rel=1e-9)


def test_bnb_bound_traces_are_monotone(reference):
    pr = _problem(reference, (52.0, 47.0, 4.0))
    trace = act.BnbTrace()
    act.bnb_optimize(pr, 0.0, trace=trace)
    assert all(a >= b - 1e-12 for a, b in zip(trace.gub, trace.gub[1:]))
    assert all(a <= b + 1e-12 for a, b in zip(trace.glb, trace.glb[1:]))
    assert all(g >= l - 1e-12 for g, l in zip(trace.gub, trace.glb))


def test_bnb_explored_boxes_within_tree_bound(reference):
    k = 10
    for pos in _random_positions(5, seed=3):
        pr = _problem(reference, pos)
        trace = act.BnbTrace()
        act.bnb_optimize(pr, 0.0, trace=trace)
        assert trace.boxes_created <= 2 ** (k + 1) - 1


def test_bnb_pruned_boxes_hold_nothing_better():
    # audit on K=8: enumerate every pruned box and compare against the incumbent
    s = scen.generate_scenario(7, 1, pa_count=8)
    for pos in _random_positions(6, seed=11):
        pr = act.ActivationProblem.from_scenario(s, pos)
        trace = act.BnbTrace()
        incumbent = act.bnb_optimize(pr, 0.0, trace=trace)
        best = pr.objective(incumbent)
        for lo, hi in trace.pruned_boxes:
            free = np.flatnonzero(lo != hi)
            for word in range(1 << free.size):
                bits = lo.copy()
                for i, f in enumerate(free):
                    bits[f] = (word >> i) & 1
                assert pr.objective(bits) <= best * (1.0 + 1e-9) + 1e-15


def test_bnb_epsilon_zero_on_k12():
    s = scen.generate_scenario(5, 1, pa_count=12)
    for pos in _random_positions(6, seed=23):
        pr = act.ActivationProblem.from_scenario(s, pos)
        ex_obj = pr.objective(act.exhaustive_best(pr))
        bn_obj = pr.objective(act.bnb_optimize(pr, 0.0))
        assert bn_obj == pytest.approx(ex_obj, rel=1e-9)


def test_bnb_single_antenna():
    s = scen.generate_scenario(7, 1, pa_count=1)
    pr = act.ActivationProblem.from_scenario(s, (10.0, 10.0, 5.0))
    assert act.bnb_optimize(pr, 0.0).tolist() == [1]


def test_islr_single_antenna():
    s = scen.generate_scenario(7, 1, pa_count=1)
    pr = act.ActivationProblem.from_scenario(s, (10.0, 10.0, 5.0))
    assert act.islr_optimize(pr).tolist() == [1]


def test_islr_never_beats_bnb(reference):
    for pos in _random_positions(20, seed=8):
        pr = _problem(reference, pos)
        bn = pr.objective(act.bnb_optimize(pr, 0.0))
        isl = pr.objective(act.islr_optimize(pr))
        assert isl <= bn * (1.0 + 1e-9)


def test_islr_feasible_and_dominates_full(reference):
    phys = reference.physics
    for pos in _random_positions(20, seed=9):
        pr = _problem(reference, pos)
        bits = act.islr_optimize(pr)
        assert bits.any()
        gain = pr.gain(bits)
        power = lb.required_power(gain, phys.rate_threshold_bps_hz, phys.noise_power_w)
        assert math.isfinite(power)
        rate = lb.achievable_rate(power, gain, phys.noise_power_w)
        assert rate == pytest.approx(phys.rate_threshold_bps_hz, rel=1e-9)
        full_power = lb.required_power(
            pr.gain(act.full_activation(10)), phys.rate_threshold_bps_hz, phys.noise_power_w
        )
        assert power <= full_power


def test_islr_high_count_validation(reference):
    pr = _problem(reference, (10.0, 10.0, 6.0))
    with pytest.raises(ValueError):
        act.islr_optimize(pr, high_count=0)
    with pytest.raises(ValueError):
        act.islr_optimize(pr, high_count=11)


def test_islr_deterministic(reference):
    pr = _problem(reference, (77.0, 13.0, 3.0))
    a = act.islr_optimize(pr)
    b = act.islr_optimize(pr)
    assert np.array_equal(a, b)


def test_full_activation_vector():
    bits = act.full_activation(10)
    assert bits.tolist() == [1] * 10
    beta = prop.radiation_ratios(bits, 0.3)
    assert float(np.sum(beta**2)) == pytest.approx(1.0 - (1.0 - 0.09) ** 10, rel=1e-12)


def test_full_activation_never_beats_bnb(reference):
    for pos in _random_positions(10, seed=14):
        pr = _problem(reference, pos)
        assert pr.objective(act.full_activation(10)) <= pr.objective(
            act.bnb_optimize(pr, 0.0)
        ) * (1.0 + 1e-9)


def test_strategies_deterministic(reference):
    pos = (66.0, 29.0, 5.5)
    pr = _problem(reference, pos)
    assert np.array_equal(act.bnb_optimize(pr, 0.0), act.bnb_optimize(pr, 0.0))
    assert np.array_equal(act.exhaustive_best(pr), act.exhaustive_best(pr))
