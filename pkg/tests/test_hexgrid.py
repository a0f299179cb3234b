"""Geometry, ring structure, and symmetry-orbit aggregation."""

import math
from collections import Counter, deque

import numpy as np
import pytest

from edgemig import hexgrid as hg


# --- independent oracles -------------------------------------------------

def bfs_distance(cell, radius=12):
    """Hop distance from the origin via BFS over the neighbor graph."""
    if cell == hg.ORIGIN:
        return 0
    seen = {hg.ORIGIN}
    frontier = deque([(hg.ORIGIN, 0)])
    while frontier:
        cur, d = frontier.popleft()
        if d >= radius:
            continue
        for nb in hg.neighbors(cur):
            if nb == cell:
                return d + 1
            if nb not in seen:
                seen.add(nb)
                frontier.append((nb, d + 1))
    raise AssertionError("cell outside search radius")


def ring_walk(i):
    """Cells of ring i in cyclic order, starting at corner (i, 0)."""
    cur = hg.HexCell(i, 0)
    out = []
    for side in range(6):
        # each side of the ring hexagon runs i steps in one direction
        direction = hg.DIRECTIONS[(side + 2) % 6]
        for _ in range(i):
            out.append(cur)
            cur = hg.HexCell(cur.q + direction.q, cur.r + direction.r)
    return out


# --- ring_of / neighbors -------------------------------------------------

def test_origin_ring_zero():
    assert hg.ring_of(hg.ORIGIN) == 0


def test_origin_neighbors_are_ring_one():
    nbs = hg.neighbors(hg.ORIGIN)
    assert len(set(nbs)) == 6
    assert all(hg.ring_of(c) == 1 for c in nbs)


def test_ring_of_matches_bfs_oracle():
    for cell in hg.disc_cells(6):
        assert hg.ring_of(cell) == bfs_distance(cell)


def test_ring_three_has_18_cells():
    # brute-force enumeration over a bounded lattice
    cells = [
        hg.HexCell(q, r)
        for q in range(-5, 6)
        for r in range(-5, 6)
        if hg.ring_of(hg.HexCell(q, r)) == 3
    ]
    assert len(cells) == 18
    assert set(cells) == set(hg.ring_cells(3))


@pytest.mark.parametrize("i", range(1, 9))
def test_ring_cardinality(i):
    assert len(hg.ring_cells(i)) == 6 * i


def test_neighbor_symmetry():
    for cell in hg.disc_cells(5):
        for nb in hg.neighbors(cell):
            assert cell in hg.neighbors(nb)


def test_ring1_neighbor_profile():
    for cell in hg.ring_cells(1):
        rings = Counter(hg.ring_of(nb) for nb in hg.neighbors(cell))
        assert rings == {0: 1, 1: 2, 2: 3}


def test_ring2_corner_neighbor_profile():
    corners = [c for c in hg.ring_cells(2) if hg.agg_state_of(c).is_corner]
    assert len(corners) == 6
    for cell in corners:
        rings = Counter(hg.ring_of(nb) for nb in hg.neighbors(cell))
        assert rings == {1: 1, 2: 2, 3: 3}


# --- orbit partition ------------------------------------------------------

def test_orbit_partition_k2():
    part = hg.orbit_partition(2)
    assert len(part) == 7
    assert set(part.values()) == {hg.AggState(0, 0), hg.AggState(1, 0)}


def test_orbit_partition_k3_classes():
    part = hg.orbit_partition(3)
    states = sorted(set(part.values()))
    assert states == [
        hg.AggState(0, 0),
        hg.AggState(1, 0),
        hg.AggState(2, 0),
        hg.AggState(2, 1),
    ]
    sizes = Counter(part.values())
    assert sizes[hg.AggState(2, 0)] == 6
    assert sizes[hg.AggState(2, 1)] == 6


@pytest.mark.parametrize("i", range(2, 9))
def test_class_count_per_ring(i):
    part = hg.orbit_partition(i + 1)
    classes = {s for s in part.values() if s.ring == i}
    assert len(classes) == 1 + math.ceil((i - 1) / 2)


def test_k5_aggregate_state_count():
    # 1 + 1 + 2 + 2 + 3 states for rings 0..4, the node count of the
    # aggregated-walk diagram for a 5-ring service area
    assert len(hg.agg_states(5)) == 9


def test_partition_equals_dihedral_orbits():
    part = hg.orbit_partition(7)
    for cell, state in part.items():
        orbit = hg.symmetry_orbit(cell)
        assert {part[c] for c in orbit} == {state}
    # distinct classes are distinct orbits
    by_state = {}
    for cell, state in part.items():
        by_state.setdefault(state, set()).add(cell)
    for state, members in by_state.items():
        assert members == set(hg.symmetry_orbit(next(iter(members))))


def test_class_id_is_distance_to_nearest_corner():
    # position m along a ring side sits min(m, i-m) cells from a corner
    for i in range(1, 9):
        walk = ring_walk(i)
        for pos, cell in enumerate(walk):
            m = pos % i if i else 0
            expected = min(m, i - m)
            assert hg.agg_state_of(cell) == hg.AggState(i, expected)


def test_orbit_partition_rejects_bad_k():
    with pytest.raises(ValueError):
        hg.orbit_partition(0)


# --- outward probabilities & lumpability ---------------------------------

@pytest.mark.parametrize("k", range(2, 9))
def test_outward_jump_counts(k):
    part = hg.orbit_partition(k)
    for cell, state in part.items():
        if state.ring == 0:
            continue
        outward = sum(1 for nb in hg.neighbors(cell) if hg.ring_of(nb) == state.ring + 1)
        assert outward == (3 if state.is_corner else 2)


@pytest.mark.parametrize("k", range(2, 9))
def test_strong_lumpability_exact(k):
    """Same-class cells have identical integer destination-class counts."""
    part = hg.orbit_partition(k)
    row_of = {}
    for cell, state in part.items():
        counts = Counter()
        for nb in hg.neighbors(cell):
            target = part[nb] if hg.ring_of(nb) < k else hg.AggState(0, 0)
            counts[target] += 1
        if state in row_of:
            assert row_of[state] == counts, f"class {state} not lumpable"
        else:
            row_of[state] = counts


# --- full walk chain ------------------------------------------------------

def test_build_full_walk_k2():
    chain = hg.build_full_walk(2)
    assert len(chain.states) == 7
    origin_row = chain.P[chain.index_of(hg.ORIGIN)]
    assert origin_row[chain.index_of(hg.ORIGIN)] == 0.0
    assert np.count_nonzero(origin_row) == 6
    np.testing.assert_allclose(origin_row[origin_row > 0], 1 / 6)
    for cell in hg.ring_cells(1):
        row = chain.P[chain.index_of(cell)]
        assert row[chain.index_of(hg.ORIGIN)] == pytest.approx(4 / 6, abs=1e-15)


def test_build_full_walk_rows_stochastic():
    for k in (2, 3, 5):
        chain = hg.build_full_walk(k)
        np.testing.assert_allclose(chain.P.sum(axis=1), 1.0, atol=1e-12)


def test_build_full_walk_k5_size():
    assert len(hg.build_full_walk(5).states) == 1 + 6 + 12 + 18 + 24


def test_build_full_walk_rejects_small_k():
    with pytest.raises(ValueError):
        hg.build_full_walk(1)


def test_walk_params_validation():
    with pytest.raises(ValueError):
        hg.WalkParams(p_step=0.0)
    with pytest.raises(ValueError):
        hg.WalkParams(mu=0.0)
