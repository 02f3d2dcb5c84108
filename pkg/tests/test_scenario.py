import dataclasses
import json

import numpy as np
import pytest

from mtuc.scenario import (
    Constants, Device, DeviceGroup, Geometry, Scenario, ScenarioError, ScenarioParseError, Task,
    from_dict, generate_random, load_scenario, save_scenario, to_dict,
)


def test_geometry_defaults_follow_heights():
    g = Geometry()
    assert (g.device_depth, g.auv_depth) == (190.0, 180.0)
    assert g.depot == (0.0, 0.0, 20.0)
    assert g.station_pos == (0.0, 0.0, 200.0)


@pytest.mark.parametrize("kw", [dict(device_height=250.0), dict(auv_height=0.0), dict(device_depth=10.0)])
def test_geometry_validation(kw):
    with pytest.raises(ScenarioError):
        Geometry(**kw).validate()


def test_generator_is_deterministic():
    a = generate_random(5, 2, devices=20, seed=11)
    b = generate_random(5, 2, devices=20, seed=11)
    assert a == b
    assert a.digest() == b.digest()
    assert generate_random(5, 2, devices=20, seed=12).digest() != a.digest()


def test_generator_counts():
    sc = generate_random(4, 2, devices_per_dg=[1, 2, 3, 1], seed=0)
    assert [len(g.devices) for g in sc.groups] == [1, 2, 3, 1]
    assert sc.arrays.n == 7
    assert sc.arrays.slice(2) == slice(3, 6)
    assert sc.max_devices == 3


def test_round_trip(tmp_path, small_scenario):
    path = tmp_path / "s.json"
    save_scenario(small_scenario, path)
    back = load_scenario(path)
    assert back == small_scenario
    assert from_dict(to_dict(small_scenario)) == small_scenario


def test_malformed_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ScenarioParseError):
        load_scenario(bad)


def test_content_reuse_must_match_size():
    dev = lambda z: Device((0.0, 0.0, 10.0), 2e9, Task(z, 1500.0, content_id=3), 10.0, 1.0)
    sc = Scenario(Geometry(), (DeviceGroup((0.0, 0.0, 10.0), (dev(1e5), dev(2e5))),), 1)
    with pytest.raises(ScenarioError):
        sc.validate()


def test_fleet_larger_than_groups_rejected(small_scenario):
    with pytest.raises(ScenarioError):
        small_scenario.with_auvs(small_scenario.K + 1)


def test_constants_validation():
    with pytest.raises(ScenarioError):
        Constants(shipping=2.0).validate()
    with pytest.raises(ScenarioError):
        Constants(auv_speed=0.0).validate()
    with pytest.raises(ScenarioError):
        Constants(bandwidth_low=float("nan")).validate()


def test_devices_sit_on_device_plane(small_scenario):
    assert np.allclose(small_scenario.arrays.pos[:, 2], small_scenario.geometry.device_height)
