"""
Boxes and the simulation memo
"""

import numpy as np
import pytest

from src.cache.expansion_cache import SimulationCache
from src.sim.boxes import Box


def test_box_geometry():
    box = Box.from_bounds([[-3.0, 3.0], [0.0, 1.0]])
    assert box.dim == 2
    assert box.center.tolist() == [0.0, 0.5]
    assert box.side_lengths().tolist() == [6.0, 1.0]
    assert len(box.corners()) == 4
    assert box.as_bounds() == [[-3.0, 3.0], [0.0, 1.0]]


def test_inflate_and_scale():
    box = Box.from_bounds([[-2.0, 2.0], [0.0, 4.0]])
    assert box.inflate(0.5).as_bounds() == [[-2.5, 2.5], [-0.5, 4.5]]
    assert box.scale(0.25).as_bounds() == [[-2.5, 2.5], [-0.5, 4.5]]
    with pytest.raises(ValueError):
        box.inflate(-1.0)


def test_containment_and_clip():
    box = Box.from_bounds([[-1.0, 1.0], [-1.0, 1.0]])
    assert box.contains([1.0, -1.0])
    assert not box.contains([1.1, 0.0])
    assert box.contains([1.1, 0.0], tol=0.2)
    rows = np.array([[0.0, 0.0], [2.0, 0.0], [0.5, -0.5]])
    assert box.contains_rows(rows).tolist() == [True, False, True]
    assert box.clip([3.0, -0.2]).tolist() == [1.0, -0.2]


def test_sample_and_bounding():
    box = Box.from_bounds([[-1.0, 1.0], [2.0, 5.0]])
    points = box.sample(np.random.default_rng(0), 500)
    assert np.all(box.contains_rows(points))
    tight = Box.bounding(points)
    assert np.all(tight.lo_array >= box.lo_array) and np.all(tight.hi_array <= box.hi_array)


@pytest.mark.parametrize("bounds", [[[1.0, 0.0]], [], [[0.0, np.inf]]])
def test_invalid_boxes(bounds):
    with pytest.raises(ValueError):
        Box.from_bounds(bounds)


def test_cache_memoizes():
    cache = SimulationCache("test")
    calls = []

    def compute():
        calls.append(1)
        return 1.25

    key = cache.cache_key(T=0.15, seed=0, W0=[[-3.0, 3.0]])
    assert cache.get_or_compute(key, compute) == 1.25
    assert cache.get_or_compute(key, compute) == 1.25
    assert len(calls) == 1
    stats = cache.get_stats()
    assert (stats["hits"], stats["misses"], stats["total_entries"]) == (1, 1, 1)


def test_cache_key_is_order_independent():
    cache = SimulationCache("test")
    assert cache.cache_key(a=1, b=0.1) == cache.cache_key(b=0.1, a=1)
    assert cache.cache_key(T=0.15) != cache.cache_key(T=0.150001)


def test_cache_invalidate_and_clear():
    cache = SimulationCache("test")
    cache.set("k", 2.0)
    assert cache.invalidate("k")
    assert not cache.invalidate("k")
    assert cache.get("k") is None
    cache.set("j", 3.0)
    cache.clear()
    assert cache.get_stats()["total_entries"] == 0
