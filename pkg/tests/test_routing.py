import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mtuc import routing
from mtuc.routing import InfeasiblePlanError, RoutePlan, validate_assignment


@st.composite
def plans(draw, K=5, M=2):
    perm = draw(st.permutations(range(K)))
    cut = sorted(draw(st.lists(st.integers(0, K), min_size=M - 1, max_size=M - 1)))
    bounds = [0, *cut, K]
    return RoutePlan.of([perm[bounds[j]:bounds[j + 1]] for j in range(M)])


@given(plans())
def test_assignment_round_trip(plan):
    verdict = validate_assignment(plan.to_y(5), 2, 5)
    assert verdict.ok and verdict.plan == plan


def test_assignment_violations():
    y = np.zeros((2, 3, 3), dtype=int)
    y[0, 0, 0] = y[0, 0, 1] = 1
    y[1, 0, 1] = 1
    v = validate_assignment(y, 2, 3)
    assert not v.ok
    text = " ".join(v.violations)
    assert "hop_count" in text and "dg_coverage" in text
    y2 = np.zeros((1, 3, 2), dtype=int)
    y2[0, 1, 0] = y2[0, 2, 1] = 1
    assert any("gaps" in m for m in validate_assignment(y2, 1, 2).violations)


def test_plan_check():
    RoutePlan.of([[0, 2], [1]]).check(3, 2)
    with pytest.raises(InfeasiblePlanError):
        RoutePlan.of([[0, 0], [1]]).check(3, 2)
    with pytest.raises(InfeasiblePlanError):
        RoutePlan.of([[0, 1]]).check(3, 1)


@given(plans(K=4, M=2))
def test_timing_adds_up(plan):
    from mtuc.scenario import generate_random

    sc = generate_random(4, 2, devices_per_dg=1, seed=2)
    tab = routing.travel_tables(sc)
    a = np.arange(1.0, 5.0)
    timing = routing.route_timing(plan, a, sc)
    for j, t in enumerate(plan.tours):
        nodes = routing.tour_nodes(t)
        travel = sum(tab.time[x, y] for x, y in zip(nodes[:-1], nodes[1:]))
        assert timing.travel[j] == pytest.approx(travel)
        assert timing.cycle[j] == pytest.approx(travel + a[list(t)].sum())
    energy = routing.route_energy(plan, a, sc)
    assert energy.sum() >= sum(routing.tour_travel(t, tab)[0] for t in plan.tours)


def test_still_water_tables_scale_with_distance(small_scenario):
    tab = routing.travel_tables(small_scenario, still_water=True)
    dist = np.linalg.norm(tab.nodes[:, None] - tab.nodes[None], axis=2)
    off = ~np.eye(len(dist), dtype=bool)
    ratio = tab.energy[off] / dist[off]
    assert np.ptp(ratio) <= 1e-9 * ratio.max()
    assert np.all(tab.hover_power == 0.0)


def test_plan_csv(small_scenario):
    text = routing.plan_to_csv(RoutePlan.of([[1, 0], [2, 3]]), small_scenario)
    lines = text.splitlines()
    assert lines[0] == "auv_id,hop_index,dg_id,x,y"
    assert len(lines) == 1 + 2 * 4
    assert not text.endswith("\r\n")
