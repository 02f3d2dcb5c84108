import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mtuc.acoustics import channel_table
from mtuc.scenario import Constants, Device, Geometry, Task
from mtuc.service import (
    AllocationError, cache_capacity_check, cached_bits, dg_service_time, device_outcomes, local_outcome,
    offload_outcome,
)

C, G = Constants(), Geometry()
TASK = Task(2e5, 1800.0, content_id=1)
DEV = Device((0.0, 0.0, 10.0), 2e9, TASK, 15.0, 2.0)


def test_local_outcome():
    t, e = local_outcome(TASK, DEV, C)
    assert t == pytest.approx(1800.0 * 2e5 / 2e9)
    assert e == pytest.approx(1.25e-26 * (2e9) ** 3 * t)


def test_cached_task_has_no_transmission():
    out = offload_outcome(TASK, DEV, 0.0, 0.5, True, 0.0, 0.0, C, G)
    assert (out.tx_time_da, out.tx_time_as, out.device_energy, out.auv_tx_energy) == (0.0, 0.0, 0.0, 0.0)
    assert out.total_time == out.station_time


def test_uncached_offload_terms():
    out = offload_outcome(TASK, DEV, 1.0, 1.0, False, 1e-8, 1e-8, C, G)
    assert out.total_time == pytest.approx(out.tx_time_da + out.tx_time_as + out.station_time)
    # the exponent reproduces the nominal transmit power
    assert out.device_energy == pytest.approx(C.tx_power_device * out.tx_time_da, rel=1e-9)
    assert out.auv_tx_energy == pytest.approx(C.tx_power_auv * out.tx_time_as, rel=1e-9)


@pytest.mark.parametrize("r,f,snr", [(0.0, 0.5, 1e-8), (0.5, 0.0, 1e-8), (0.5, 0.5, 0.0)])
def test_offload_requires_resources(r, f, snr):
    with pytest.raises(AllocationError):
        offload_outcome(TASK, DEV, r, f, False, snr, 1e-8, C, G)


def test_service_time_is_slowest_member():
    a = offload_outcome(TASK, DEV, 1.0, 0.5, True, 0.0, 0.0, C, G)
    b = offload_outcome(TASK, DEV, 1.0, 0.25, True, 0.0, 0.0, C, G)
    assert dg_service_time([a, b]) == b.total_time
    with pytest.raises(ValueError):
        dg_service_time([])


def test_cache_storage_counts_content_once():
    h = np.array([1, 1, 1, 0], bool)
    z = np.array([1e5, 1e5, 2e5, 3e5])
    cid = np.array([4, 4, 5, 6])
    assert cached_bits(h, z) == 4e5
    assert cached_bits(h, z, cid) == 3e5
    v = cache_capacity_check(h, z, 2.5e5, cid)
    assert not v.ok and v.over == pytest.approx(0.5e5)


@given(st.lists(st.tuples(st.booleans(), st.booleans(), st.floats(0.05, 1.0), st.floats(0.05, 1.0)),
                min_size=1, max_size=3))
def test_vectorized_matches_scalar(decisions):
    from mtuc.scenario import generate_random

    sc = generate_random(1, 1, devices_per_dg=3, seed=5)
    arr, ch = sc.arrays, channel_table(sc)
    n = len(decisions)
    o = np.array([d[0] for d in decisions])
    h = np.array([d[0] and d[1] for d in decisions])
    r = np.array([d[2] if d[0] and not d[1] else 0.0 for d in decisions])
    f = np.array([d[3] if d[0] else 0.0 for d in decisions])
    out = device_outcomes(arr.data_bits[:n], arr.complexity[:n], arr.cpu_hz[:n], ch.snr_da[:n],
                          ch.snr_as[0], o, h, r, f, sc.constants, sc.geometry)
    devs = sc.groups[0].devices
    for i in range(n):
        if o[i]:
            ref = offload_outcome(devs[i].task, devs[i], r[i], f[i], h[i], ch.snr_da[i], ch.snr_as[0],
                                  sc.constants, sc.geometry)
            assert out.total_time[i] == pytest.approx(ref.total_time, rel=1e-12)
            assert out.e_da[i] == pytest.approx(ref.device_energy, rel=1e-9, abs=1e-30)
            assert out.e_station[i] == pytest.approx(ref.station_energy, rel=1e-12)
        else:
            assert out.total_time[i] == pytest.approx(local_outcome(devs[i].task, devs[i], sc.constants)[0])


def test_nonstrict_marks_bad_entries_infinite():
    out = device_outcomes([1e5], [1500.0], [2e9], [1e-8], 1e-8, [True], [False], [0.0], [0.5], C, G, strict=False)
    assert np.isinf(out.total_time[0])
    with pytest.raises(AllocationError):
        device_outcomes([1e5], [1500.0], [2e9], [1e-8], 1e-8, [True], [False], [0.0], [0.5], C, G)
