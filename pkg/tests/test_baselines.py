import itertools
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mtuc import baselines as B
from mtuc import routing
from mtuc.economics import audit, evaluate
from mtuc.routing import RoutePlan
from mtuc.scenario import Constants, Device, DeviceGroup, Geometry, Scenario, Task, Vortex, generate_random

SCHEMES = [
    B.SchemeSpec("full", cache="none"),
    B.SchemeSpec("full", cache="full"),
    B.SchemeSpec("none"),
    B.SchemeSpec("random", 0.5, "random", 0.5),
    B.SchemeSpec("partial", 0.5, "partial", 0.5),
    B.SchemeSpec("random", 0.5, "full", routing="random"),
    B.SchemeSpec("full", cache="full", routing="nearest"),
    B.SchemeSpec("partial", 0.75, "full", routing="aware"),
]


@pytest.fixture(scope="module")
def tiny():
    return generate_random(3, 2, devices_per_dg=[2, 1, 2], seed=4, extent=1500.0)


def test_none_scheme_pays_movement_only(single_auv_scenario):
    bd = B.run_scheme(single_auv_scenario, B.SchemeSpec("none")).breakdown
    assert bd.profit == -bd.movement_cost


def test_full_offload_beats_none_on_default_scenario():
    sc = generate_random(15, 4, seed=0)
    plan = B.env_agnostic_plan(sc)
    full = B.run_scheme(sc, B.SchemeSpec("full", cache="full"), plan=plan).breakdown.profit
    none = B.run_scheme(sc, B.SchemeSpec("none"), plan=plan).breakdown.profit
    assert full > none


def test_random_scheme_is_reproducible(small_scenario):
    spec = B.SchemeSpec("random", 0.5, "random", 0.5, routing="random")
    a, b = B.run_scheme(small_scenario, spec, 7), B.run_scheme(small_scenario, spec, 7)
    assert a.breakdown.profit == b.breakdown.profit and a.decisions.same_as(b.decisions)


@pytest.mark.parametrize("spec", SCHEMES, ids=lambda s: f"{s.name}-{s.routing}")
def test_scheme_outputs_are_feasible(small_scenario, spec):
    res = B.run_scheme(small_scenario, spec, 1)
    assert audit(small_scenario, res.decisions).hard_ok


def test_scheme_validation():
    with pytest.raises(ValueError):
        B.SchemeSpec("sometimes")
    with pytest.raises(ValueError):
        B.SchemeSpec("random", 1.5)
    with pytest.raises(ValueError):
        B.SchemeSpec(routing="teleport")


def test_planners_produce_valid_plans(small_scenario):
    for plan in (B.env_agnostic_plan(small_scenario), B.env_aware_plan(small_scenario),
                 B.nearest_neighbor_plan(small_scenario), B.random_order_plan(small_scenario, np.random.default_rng(0))):
        plan.check(small_scenario.K, small_scenario.M)


def test_planners_agree_in_still_water():
    sc = replace(generate_random(6, 2, devices_per_dg=1, seed=8), vortices=())
    tab = routing.travel_tables(sc)
    cost = lambda p: sum(routing.tour_travel(t, tab)[0] for t in p.tours)
    assert cost(B.env_agnostic_plan(sc)) == pytest.approx(cost(B.env_aware_plan(sc)), rel=1e-12)


def two_group_scenario(strength):
    dev = lambda x, y: Device((x, y, 10.0), 2e9, Task(1e5, 1500.0, 0), 10.0, 1.0)
    groups = (DeviceGroup((1000.0, 300.0, 10.0), (dev(1000.0, 300.0),)),
              DeviceGroup((1000.0, -300.0, 10.0), (dev(1000.0, -300.0),)))
    return Scenario(Geometry(), groups, 1, vortices=(Vortex((1000.0, 0.0, 20.0), strength, 250.0),)).validate()


def test_vortex_across_route_favours_aware_plan():
    gains = []
    for strength in (2000.0, -2000.0):
        sc = two_group_scenario(strength)
        tab = routing.travel_tables(sc)
        cost = lambda p: sum(routing.tour_travel(t, tab)[0] for t in p.tours)
        agn, awa = cost(B.env_agnostic_plan(sc)), cost(B.env_aware_plan(sc))
        best = min(routing.tour_travel(t, tab)[0] for t in ((0, 1), (1, 0)))
        assert awa == pytest.approx(best)
        assert awa <= agn
        gains.append(agn - awa)
    assert max(gains) > 0


def offload_friendly_scenario():
    dev = Device((310.0, 0.0, 10.0), 1e8, Task(2e4, 15000.0, 0), 1e4, 1.0)
    consts = Constants(storage_cap=0.0, cost_station=1e-9)
    return Scenario(Geometry(), (DeviceGroup((300.0, 0.0, 10.0), (dev,)),), 1, constants=consts).validate()


def test_oracle_offloads_when_it_dominates():
    res = B.oracle(offload_friendly_scenario(), 0.25)
    d = res.decisions
    assert d.offload.tolist() == [True] and d.cache.tolist() == [False]
    assert d.bandwidth.tolist() == [1.0] and d.compute.tolist() == [1.0]


def test_oracle_dominates_schemes_and_refines(tiny):
    coarse = B.oracle(tiny, 0.5)
    fine = B.oracle(tiny, 0.25)
    assert fine.profit >= coarse.profit
    assert audit(tiny, fine.decisions).hard_ok
    assert fine.profit == pytest.approx(evaluate(tiny, fine.decisions, strict=True).profit)
    for spec in SCHEMES:
        for seed in range(3):
            assert B.run_scheme(tiny, spec, seed).breakdown.profit <= coarse.profit + 1e-9


def test_oracle_matches_brute_force_routes(tiny):
    # with every device local, only the route matters
    res = B.oracle(tiny, 0.5, caching=False)
    local_best = -np.inf
    n = tiny.arrays.n
    for owner in itertools.product(range(2), repeat=3):
        groups = [[k for k in range(3) if owner[k] == j] for j in range(2)]
        for p0 in itertools.permutations(groups[0]):
            for p1 in itertools.permutations(groups[1]):
                d = B.DecisionSet.all_local(n, RoutePlan.of([p0, p1]))
                local_best = max(local_best, evaluate(tiny, d).profit)
    assert res.profit >= local_best - 1e-9


def test_oracle_parallel_matches_serial(tiny):
    a, b = B.oracle(tiny, 0.5), B.oracle(tiny, 0.5, workers=3)
    assert a.profit == b.profit and a.decisions.same_as(b.decisions)


def test_oracle_limits():
    with pytest.raises(B.InstanceTooLargeError, match="K=7"):
        B.oracle(generate_random(7, 1, devices_per_dg=1, seed=0))
    with pytest.raises(B.InstanceTooLargeError, match="M=3"):
        B.oracle(generate_random(3, 3, devices_per_dg=1, seed=0))
    with pytest.raises(B.InstanceTooLargeError, match="devices"):
        B.oracle(generate_random(2, 1, devices_per_dg=4, seed=0))
    with pytest.raises(ValueError):
        B.oracle(generate_random(2, 1, devices_per_dg=1, seed=0), grid_step=0.3)


def test_simplex_lattice():
    pts = B.simplex_lattice(3, 0.25)
    assert len(pts) == 4
    assert all(sum(p) <= 1 + 1e-12 and min(p) > 0 for p in pts)


@given(st.lists(st.tuples(st.floats(-50, 50), st.floats(-1e3, 1e3)), min_size=1, max_size=40),
       st.floats(-60, 60), st.floats(0.1, 20))
def test_pruning_keeps_the_penalized_optimum(points, offset, rho):
    G = np.array([p[0] for p in points])
    V = np.array([p[1] for p in points])
    keep = B._prune(G, V, rho)
    score = V - rho * np.maximum(0.0, np.abs(offset + G) - 2.0)
    assert score[keep].max() == pytest.approx(score.max(), abs=1e-9)
