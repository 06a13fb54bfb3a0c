import pytest
from hypothesis import given, settings, strategies as st

from gossipaudit import (
    Cause,
    QuadraticLoss,
    calibrate_bounds,
    check_source_component,
    complete,
    local_validate,
    ring,
    validated_broadcast,
)
from gossipaudit.adversary import (
    AttackSpec,
    BenignStrategy,
    BroadcastTamperStrategy,
    EquivocateStrategy,
    GaussianNoiseStrategy,
    build_strategy,
    calibrate_sigma_strong,
    solve_step_preimage,
)
from gossipaudit.fixed import mul_round, to_raw
from gossipaudit.learning import StepSchedule
from gossipaudit.topology import Graph
from tests.conftest import make_run


def test_attack_spec_validation():
    with pytest.raises(ValueError):
        AttackSpec(kind="mystery")
    with pytest.raises(ValueError):
        AttackSpec(kind="gaussian")  # byzantine set required
    with pytest.raises(ValueError):
        AttackSpec(kind="none", byzantine=(1,))
    with pytest.raises(ValueError):
        AttackSpec(kind="gaussian", byzantine=(1,), sigma=-1.0)


def test_build_strategy_kinds():
    assert build_strategy(AttackSpec(), 0).byzantine == frozenset()
    s = build_strategy(AttackSpec(kind="gaussian", byzantine=(2,), sigma=0.1), 0)
    assert isinstance(s, GaussianNoiseStrategy)
    s = build_strategy(
        AttackSpec(kind="benign", byzantine=(1,), substituted_means={1: (0.5,)}), 0)
    assert isinstance(s, BenignStrategy)
    assert s.substituted_sources() == {1: (0.5,)}


@given(st.integers(1, 2**32 - 1), st.integers(-(2**38), 2**38))
@settings(max_examples=200)
def test_solve_step_preimage(coeff_raw, target):
    g = solve_step_preimage(coeff_raw, target)
    assert mul_round(coeff_raw, g) == target


def test_gaussian_sigma_zero_is_honest(small_quadratic):
    graph, loss = small_quadratic
    honest, _ = make_run(graph, loss, seed=50, rounds=12)
    attacked, _ = make_run(graph, loss, seed=50, rounds=12,
                           strategy=GaussianNoiseStrategy([1], 0.0, seed=50))
    assert honest.trajectory == attacked.trajectory
    for e in graph.directed_edges():
        assert honest.transcript.xs[e] == attacked.transcript.xs[e]
        assert honest.transcript.gs[e] == attacked.transcript.gs[e]


def test_gaussian_attack_passes_local_validation(small_quadratic):
    # the noisy trajectory is re-fitted with a consistent gradient stream,
    # so the transcript audit cannot see it
    graph, loss = small_quadratic
    honest, _ = make_run(graph, loss, seed=51, rounds=15)
    bounds = calibrate_bounds([honest], margin=50.0)  # bounds out of the way
    attacked, _ = make_run(graph, loss, seed=51, rounds=15,
                           strategy=GaussianNoiseStrategy([1], 0.05, seed=51))
    states = local_validate(attacked, bounds, seed=51)
    assert all(st.ok for st in states)


def test_gaussian_attack_same_message_to_all_neighbors(small_quadratic):
    graph, loss = small_quadratic
    attacked, _ = make_run(graph, loss, seed=52, rounds=10,
                           strategy=GaussianNoiseStrategy([2], 0.1, seed=52))
    tr = attacked.transcript
    first = graph.neighbors[2][0]
    for u in graph.neighbors[2][1:]:
        assert tr.xs[(2, u)] == tr.xs[(2, first)]
        assert tr.gs[(2, u)] == tr.gs[(2, first)]


def test_equivocation_detected_by_hash_audit(small_quadratic):
    graph, loss = small_quadratic
    honest, _ = make_run(graph, loss, seed=53, rounds=15)
    bounds = calibrate_bounds([honest], margin=4.0)
    strat = EquivocateStrategy([0], rounds=[7], magnitude_raw=1)
    attacked, _ = make_run(graph, loss, seed=53, rounds=15, strategy=strat)
    states = local_validate(attacked, bounds, seed=53)
    for v in range(graph.n):
        if v == 0:
            continue
        assert not states[v].ok
        assert states[v].cause is Cause.HASH


def test_equivocation_in_gradient_detected(small_quadratic):
    graph, loss = small_quadratic
    honest, _ = make_run(graph, loss, seed=54, rounds=15)
    bounds = calibrate_bounds([honest], margin=4.0)
    strat = EquivocateStrategy([0], rounds=[3], magnitude_raw=to_raw(1.0), target="g")
    attacked, _ = make_run(graph, loss, seed=54, rounds=15, strategy=strat)
    states = local_validate(attacked, bounds, seed=54)
    assert all(not states[v].ok and states[v].cause is Cause.HASH
               for v in range(1, graph.n))


def test_equivocation_zero_magnitude_rejected():
    with pytest.raises(ValueError):
        EquivocateStrategy([0], rounds=[1], magnitude_raw=0)


def test_benign_equals_honest_when_distribution_unchanged(small_quadratic):
    graph, loss = small_quadratic
    honest, _ = make_run(graph, loss, seed=55, rounds=12)
    strat = BenignStrategy([1], {1: loss.means[1]})
    attacked, _ = make_run(graph, loss, seed=55, rounds=12, strategy=strat)
    assert honest.trajectory == attacked.trajectory


def test_broadcast_tamper_detected_with_redundant_paths():
    g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    strat = BroadcastTamperStrategy([1])
    assert check_source_component(g, [1])
    msgs, flags = validated_broadcast(g, 0, 100, relay=strat.relay,
                                      byzantine=strat.byzantine)
    honest = [0, 2, 3]
    assert any(flags[v] for v in honest)
    for v in honest:
        assert msgs[v] == 100 or flags[v]


def test_broadcast_tamper_cut_vertex_evades():
    # assumption violated: the relay separates the victim from the source
    g = Graph.from_edges(3, [(0, 1), (1, 2)])
    assert not check_source_component(g, [1])
    strat = BroadcastTamperStrategy([1])
    msgs, flags = validated_broadcast(g, 0, 100, relay=strat.relay,
                                      byzantine=strat.byzantine)
    assert msgs[2] != 100 and not flags[2]


def test_broadcast_tamper_identity_transform_is_noop():
    g = ring(4)
    strat = BroadcastTamperStrategy([2], transform=lambda v: v)
    msgs, flags = validated_broadcast(g, 0, "m", relay=strat.relay,
                                      byzantine=strat.byzantine)
    assert msgs == ["m"] * 4 and not any(flags)


def test_sigma_strong_positive_and_decreasing_in_horizon():
    s1 = calibrate_sigma_strong(StepSchedule(1.0, 0.1, 50), 0.9, 1.0, 0.1, 20, 2)
    s2 = calibrate_sigma_strong(StepSchedule(1.0, 0.1, 200), 0.9, 1.0, 0.1, 20, 2)
    assert s1 > s2 > 0  # longer horizons amplify reported noise more
