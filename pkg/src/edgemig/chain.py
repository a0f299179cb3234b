"""Jump-chain aggregation, steady-state solving, and service-level metrics.

All cell sojourn times share one exponential rate, so the stationary
distribution of the continuous-time mobility process equals that of the
embedded jump chain; everything here therefore works on row-stochastic
jump matrices.  Chains are small (tens of states), so a direct dense
solve is used throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LumpabilityViolation(ValueError):
    """A proposed partition is not strongly lumpable for the chain."""


class SingularSystem(ValueError):
    """The balance system has no unique solution (reducible chain)."""


def state_ring(state) -> int:
    """Distance-from-origin of a state label.

    Aggregate states and hex cells expose `.ring`; plain integers are read
    as distances directly (the 1D service-area model).
    """
    ring = getattr(state, "ring", state)
    if isinstance(ring, (bool,)) or not isinstance(ring, (int, np.integer)):
        raise TypeError(f"state {state!r} has no integer ring/distance")
    return int(ring)


@dataclass
class MarkovChain:
    """Embedded jump chain: ordered state labels plus a row-stochastic matrix."""

    states: list
    P: np.ndarray
    sojourn_rate: float = 1.0

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=float)
        n = len(self.states)
        if self.P.shape != (n, n):
            raise ValueError(f"P shape {self.P.shape} does not match {n} states")
        if (self.P < 0).any():
            raise ValueError("transition matrix has negative entries")
        row_err = np.max(np.abs(self.P.sum(axis=1) - 1.0)) if n else 0.0
        if row_err > 1e-12:
            raise ValueError(f"rows must sum to 1 (max deviation {row_err:.3e})")
        if self.sojourn_rate <= 0:
            raise ValueError("sojourn_rate must be positive")

    def index_of(self, state) -> int:
        return self.states.index(state)


@dataclass
class StationaryDist:
    """Stationary probability vector aligned with its chain's state labels."""

    states: list
    pi: np.ndarray

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=float)
        if self.pi.shape != (len(self.states),):
            raise ValueError("pi length does not match states")
        if (self.pi < -1e-12).any():
            raise ValueError("pi has negative entries")
        if abs(self.pi.sum() - 1.0) > 1e-12:
            raise ValueError("pi must sum to 1")

    def prob(self, state) -> float:
        return float(self.pi[self.states.index(state)])


@dataclass(frozen=True)
class DelayModel:
    """End-to-end delay as a function of hop distance, D_i = coeff * i**2."""

    coeff: float = 0.02  # seconds per hop^2

    def __post_init__(self):
        if self.coeff < 0:
            raise ValueError("coeff must be >= 0")

    def delay_at(self, ring: int) -> float:
        return self.coeff * ring * ring


def aggregate(full: MarkovChain, partition: dict) -> MarkovChain:
    """Lump a chain under a partition, verifying strong lumpability.

    The partition maps each state label to a class label; class labels must be
    orderable so the aggregated state order is deterministic.  Raises
    LumpabilityViolation if two members of a class disagree (beyond 1e-12)
    on any aggregated destination probability.
    """
    try:
        labels = [partition[s] for s in full.states]
    except KeyError as missing:
        raise ValueError(f"partition does not cover state {missing}") from None
    classes = sorted(set(labels))
    cidx = {c: j for j, c in enumerate(classes)}
    n, m = len(full.states), len(classes)
    indicator = np.zeros((n, m))
    for i, lab in enumerate(labels):
        indicator[i, cidx[lab]] = 1.0
    lumped_rows = full.P @ indicator  # per-state probability into each class

    P_agg = np.zeros((m, m))
    seen = [False] * m
    for i, lab in enumerate(labels):
        j = cidx[lab]
        if not seen[j]:
            P_agg[j] = lumped_rows[i]
            seen[j] = True
        else:
            dev = np.max(np.abs(lumped_rows[i] - P_agg[j]))
            if dev > 1e-12:
                raise LumpabilityViolation(
                    f"class {lab!r}: member rows disagree by {dev:.3e}"
                )
    return MarkovChain(states=classes, P=P_agg, sojourn_rate=full.sojourn_rate)


def _irreducible(P: np.ndarray) -> bool:
    """Every state reachable from state 0 and vice versa (strong connectivity)."""
    adj = P > 0

    def reach(mat):
        seen = {0}
        frontier = [0]
        while frontier:
            i = frontier.pop()
            for j in np.nonzero(mat[i])[0]:
                if j not in seen:
                    seen.add(int(j))
                    frontier.append(int(j))
        return seen

    n = P.shape[0]
    return len(reach(adj)) == n and len(reach(adj.T)) == n


def steady_state(chain: MarkovChain, residual_tol: float = 1e-10) -> StationaryDist:
    """Solve pi = pi P, sum(pi) = 1 by replacing one balance row with normalization."""
    n = len(chain.states)
    if n == 1:
        return StationaryDist(list(chain.states), np.ones(1))
    if not _irreducible(chain.P):
        raise SingularSystem("chain is reducible; stationary distribution not unique")
    A = chain.P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"balance system is singular: {exc}") from None
    residual = float(np.max(np.abs(pi @ chain.P - pi)))
    if residual > residual_tol:
        raise SingularSystem(f"solver residual {residual:.3e} exceeds {residual_tol}")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    return StationaryDist(list(chain.states), pi)


def prob_optimal(dist: StationaryDist) -> float:
    """Long-run probability of being served by the optimal (distance-0) DC."""
    return float(sum(p for s, p in zip(dist.states, dist.pi) if state_ring(s) == 0))


def avg_distance(dist: StationaryDist) -> float:
    """Mean hop distance to the serving DC: sum of ring * pi over all states."""
    return float(sum(state_ring(s) * p for s, p in zip(dist.states, dist.pi)))


def avg_delay(dist: StationaryDist, model: DelayModel | None = None) -> float:
    """Mean end-to-end delay in seconds under a per-ring delay model."""
    model = model or DelayModel()
    return float(
        sum(model.delay_at(state_ring(s)) * p for s, p in zip(dist.states, dist.pi))
    )
