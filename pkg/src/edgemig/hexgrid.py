"""Hexagonal-lattice geometry and the bounded mobility random walk.

Cells use axial coordinates (q, r) with the serving data center at the
origin; a cell's ring is its hex distance from the origin.  Ring i >= 1
holds 6i cells: 6 corner cells on the lattice axes (three outward
neighbors each) and 6(i-1) edge cells between them (two outward
neighbors each).  Aggregating cells into orbits of the lattice's
12-element dihedral symmetry group is exactly the lumping under which
the walk stays Markovian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import MarkovChain


@dataclass(frozen=True, order=True)
class HexCell:
    q: int
    r: int

    @property
    def s(self) -> int:
        return -self.q - self.r

    @property
    def ring(self) -> int:
        return (abs(self.q) + abs(self.r) + abs(self.s)) // 2


ORIGIN = HexCell(0, 0)

# Axial steps to the six neighbors.
DIRECTIONS = (
    HexCell(1, 0),
    HexCell(1, -1),
    HexCell(0, -1),
    HexCell(-1, 0),
    HexCell(-1, 1),
    HexCell(0, 1),
)


@dataclass(frozen=True, order=True)
class AggState:
    """One symmetry class of a ring: class 0 is the corner orbit, m >= 1 the
    edge orbit m cells in from the nearest corner."""

    ring: int
    class_id: int

    def __post_init__(self):
        if self.ring < 0 or self.class_id < 0:
            raise ValueError("ring and class_id must be >= 0")

    @property
    def is_corner(self) -> bool:
        return self.class_id == 0


@dataclass(frozen=True)
class WalkParams:
    """Uniform nearest-neighbor walk: 1/6 per neighbor, exp(mu) residence."""

    p_step: float = 1.0 / 6.0
    mu: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.p_step <= 1.0:
            raise ValueError("p_step must be in (0, 1]")
        if self.mu <= 0:
            raise ValueError("mu must be positive")


def neighbors(cell: HexCell) -> tuple[HexCell, ...]:
    """The six cells at hex distance 1."""
    return tuple(HexCell(cell.q + d.q, cell.r + d.r) for d in DIRECTIONS)


def ring_of(cell: HexCell) -> int:
    """Hex distance from the origin."""
    return cell.ring


def step(cell: HexCell, direction: int) -> HexCell:
    """Neighbor of `cell` in one of the six directions (index mod 6)."""
    d = DIRECTIONS[direction % 6]
    return HexCell(cell.q + d.q, cell.r + d.r)


def ring_cells(i: int) -> tuple[HexCell, ...]:
    """All cells at hex distance exactly i, in deterministic (q, r) order."""
    if i < 0:
        raise ValueError("ring index must be >= 0")
    if i == 0:
        return (ORIGIN,)
    cells = [
        HexCell(q, r)
        for q in range(-i, i + 1)
        for r in range(-i, i + 1)
        if HexCell(q, r).ring == i
    ]
    return tuple(sorted(cells))


def disc_cells(k: int) -> tuple[HexCell, ...]:
    """All cells in rings 0..k-1, ring-major then (q, r) order."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return tuple(c for i in range(k) for c in ring_cells(i))


def _cube(cell: HexCell) -> tuple[int, int, int]:
    return (cell.q, cell.r, cell.s)


def _rot60(c: tuple[int, int, int]) -> tuple[int, int, int]:
    x, y, z = c
    return (-z, -x, -y)


def _mirror(c: tuple[int, int, int]) -> tuple[int, int, int]:
    x, y, z = c
    return (x, z, y)


def symmetry_orbit(cell: HexCell) -> frozenset[HexCell]:
    """Images of a cell under the 12 lattice symmetries fixing the origin."""
    images = set()
    c = _cube(cell)
    for _ in range(6):
        images.add(c)
        images.add(_mirror(c))
        c = _rot60(c)
    return frozenset(HexCell(x, y) for x, y, _ in images)


def agg_state_of(cell: HexCell) -> AggState:
    """Symmetry class of a cell.

    The smallest |cube coordinate| of a ring-i cell equals its distance to
    the nearest corner of the ring, which indexes the dihedral orbits:
    0 for corners, 1..ceil((i-1)/2) for edge positions.
    """
    x, y, z = _cube(cell)
    return AggState(cell.ring, min(abs(x), abs(y), abs(z)))


def orbit_partition(k: int) -> dict[HexCell, AggState]:
    """Map every cell in rings 0..k-1 to its dihedral-symmetry orbit class."""
    if k < 1:
        raise ValueError("k must be >= 1")
    mapping: dict[HexCell, AggState] = {}
    for cell in disc_cells(k):
        orbit = symmetry_orbit(cell)
        labels = {agg_state_of(c) for c in orbit}
        if len(labels) != 1:  # the closed-form label must be orbit-invariant
            raise AssertionError(f"orbit of {cell} maps to multiple labels {labels}")
        mapping[cell] = labels.pop()
    return mapping


def agg_states(k: int) -> list[AggState]:
    """Sorted aggregate states of rings 0..k-1."""
    return sorted(set(orbit_partition(k).values()))


def build_full_walk(k: int, params: WalkParams | None = None) -> MarkovChain:
    """Embedded jump chain of the walk on rings 0..k-1 with reset-on-exit.

    A jump that would reach ring k triggers migration plus anchor
    relocation, so it lands on the origin; this keeps the chain
    irreducible on the bounded disc.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    params = params or WalkParams()
    cells = list(disc_cells(k))
    index = {c: i for i, c in enumerate(cells)}
    n = len(cells)
    P = np.zeros((n, n))
    for i, cell in enumerate(cells):
        for nb in neighbors(cell):
            target = nb if nb.ring < k else ORIGIN
            P[i, index[target]] += params.p_step
    return MarkovChain(states=cells, P=P, sojourn_rate=params.mu)
