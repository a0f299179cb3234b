"""Scenario runner: user mobility, the migration decision hook, metric
assembly, and log-based measurement helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .. import mdp
from ..hexgrid import ORIGIN, HexCell, agg_state_of, step
from .engine import EventLog, IncompleteLog, Network, Simulator
from .lisp import LispPlane
from .scenario import ScenarioConfig
from .sdn import SdnPlane


@dataclass
class SimMetrics:
    """Empirical counterparts of the analytic metrics plus timing records."""

    handovers: int = 0
    migrations_count: int = 0
    empirical_pi0: float = math.nan
    empirical_mean_distance: float = math.nan
    rtt_trace: list = field(default_factory=list)  # (t_sent, rtt) pairs
    downtime: list = field(default_factory=list)  # seconds per migration
    migration_duration: list = field(default_factory=list)

    @property
    def mean_downtime(self) -> float:
        return sum(self.downtime) / len(self.downtime) if self.downtime else math.nan

    @property
    def mean_migration_duration(self) -> float:
        if not self.migration_duration:
            return math.nan
        return sum(self.migration_duration) / len(self.migration_duration)


class _NonePlane:
    """Instant migrations, no control traffic, no probes."""

    def __init__(self, sim: Simulator):
        self.sim = sim
        self.busy = False
        self.migrations = []
        self.vm_dc = 1

    def notify_user_attach(self, subnet: int) -> None:
        pass

    def migrate(self, dst: int) -> None:
        self.sim.emit("MIGRATE_DONE", "CTRL", dst=f"DC{dst}", role="commit",
                      downtime=0.0, duration=0.0)
        self.vm_dc = dst


class _Mobility:
    """Distance process of the user relative to the serving anchor.

    hex: uniform walk over cells, anchored at the last migration target.
    1d: the user drifts along a ray of service areas, moving away with
    probability p_fwd; the attachment subnet is the position modulo the
    subnet count.
    """

    def __init__(self, config: ScenarioConfig, sim: Simulator):
        self.config = config
        self.sim = sim
        self.model = config.mobility.model
        self.rel = ORIGIN  # hex: cell relative to the anchor
        self.dist = 0  # 1d distance
        self.pos = 0  # 1d absolute position
        self.anchor_pos = 0

    def move(self) -> int:
        """One handover; returns the new distance to the serving anchor."""
        rng = self.sim.rng
        if self.model == "hex":
            self.rel = step(self.rel, rng.randrange(6))
            return self.rel.ring
        if self.dist == 0 or rng.random() < self.config.mobility.p_fwd:
            self.pos += 1
        else:
            self.pos -= 1
        self.dist = abs(self.pos - self.anchor_pos)
        return self.dist

    def reset_anchor(self) -> None:
        self.rel = ORIGIN
        self.anchor_pos = self.pos
        self.dist = 0

    def subnet(self, n_subnets: int) -> int:
        """Attachment point index in 1..n_subnets."""
        if self.model == "hex":
            return (self.rel.q * 31 + self.rel.r) % n_subnets + 1
        return self.pos % n_subnets + 1

    @property
    def distance(self) -> int:
        return self.rel.ring if self.model == "hex" else self.dist


def _decision_hook(config: ScenarioConfig):
    """Returns migrate_now(distance_state) -> bool for the configured policy."""
    from ..chain import state_ring

    kind = config.decision.policy
    if kind == "never":
        return lambda state: False
    if kind == "always":
        return lambda state: True
    if kind == "always-at-k":
        k = config.mobility.k
        return lambda state: state_ring(state) >= k
    # mdp: solve once, act by the policy's letters; beyond thr is forced
    d = config.decision
    rewards = mdp.RewardParams(q_max=d.q_max, k_factor=d.k_factor, c_m=d.tau * d.q_max)
    if config.mobility.model == "hex":
        spec = mdp.build_2d_mdp(d.thr, config.mobility.mu, rewards, gamma_at_mu=d.gamma)
    else:
        spec = mdp.build_1d_mdp(
            config.mobility.p_fwd, config.mobility.mu, rewards=rewards,
            thr=d.thr, gamma_at_mu=d.gamma,
        )
    _, policy = mdp.value_iteration(mdp.uniformize(spec))
    migrate_at = {
        mdp_state
        for mdp_state, action in zip(policy.states, policy.actions)
        if action == mdp.MIGRATE
    }
    thr = d.thr

    def hook(state):
        if state_ring(state) > thr:
            return True
        key = agg_state_of(state) if isinstance(state, HexCell) else state
        return key in migrate_at

    return hook


def _make_plane(config: ScenarioConfig, sim: Simulator, net: Network):
    kind = config.control_plane.kind
    if kind == "none":
        return _NonePlane(sim)
    if kind == "lisp":
        return LispPlane(
            sim, net,
            n_dcs=config.control_plane.subnets,
            correspondents=config.control_plane.correspondents,
            bandwidth=config.bandwidth,
            transfer_params=config.transfer,
        )
    return SdnPlane(
        sim, net,
        n_dcs=config.control_plane.subnets,
        bandwidth=config.bandwidth,
        transfer_params=config.transfer,
        controller_delay=config.control_plane.controller_delay,
    )


def run(config: ScenarioConfig) -> tuple[EventLog, SimMetrics]:
    """Execute a scenario; deterministic for a fixed seed."""
    sim = Simulator(config.seed)
    net = Network(sim, config.links)
    plane = _make_plane(config, sim, net)
    mobility = _Mobility(config, sim)
    hook = _decision_hook(config)
    metrics = SimMetrics()
    occupancy: dict[int, int] = {}
    n_subnets = config.control_plane.subnets
    state = {"moves_left": config.horizon_handovers, "live": True}

    def mobility_state():
        return mobility.rel if config.mobility.model == "hex" else mobility.dist

    def on_handover():
        if state["moves_left"] is not None and state["moves_left"] <= 0:
            state["live"] = False
            return
        if state["moves_left"] is not None:
            state["moves_left"] -= 1
        mobility.move()
        migrated = False
        if not plane.busy and hook(mobility_state()):
            target = mobility.subnet(n_subnets)
            if isinstance(plane, _NonePlane):
                plane.migrate(target)
                mobility.reset_anchor()
                migrated = True
            elif plane.vm_dc != target:
                if isinstance(plane, LispPlane):
                    plane.migrate_vm(target)
                else:
                    plane.migrate_vm("VM", target)
                mobility.reset_anchor()
                migrated = True
        post_distance = mobility.distance
        occupancy[post_distance] = occupancy.get(post_distance, 0) + 1
        metrics.handovers += 1
        if migrated:
            metrics.migrations_count += 1
        if config.log_handovers:
            sim.emit("HANDOVER", "UE", distance=post_distance, migrated=int(migrated))
        if not isinstance(plane, _NonePlane):
            plane.notify_user_attach(mobility.subnet(n_subnets))
        arm_handover()

    def arm_handover():
        if state["moves_left"] is not None and state["moves_left"] <= 0:
            state["live"] = False
            return
        sim.schedule(sim.rng.expovariate(config.mobility.mu), on_handover)

    def on_sample(t_sent, rtt):
        metrics.rtt_trace.append((t_sent, rtt))

    period = config.control_plane.probe_period
    probes_possible = period > 0 and not isinstance(plane, _NonePlane)

    def arm_probe():
        if not probes_possible:
            return
        if config.horizon_time is not None:
            # observe until the time horizon
            if sim.now + period > config.horizon_time:
                return
        elif not state["live"] and not plane.busy:
            # handover-count horizon: stop once mobility is exhausted and
            # nothing is converging
            return
        sim.schedule(period, fire_probe)

    def fire_probe():
        plane.probe(mobility.subnet(n_subnets), on_sample)
        arm_probe()

    arm_handover()
    arm_probe()
    sim.run(until=config.horizon_time)

    if metrics.handovers:
        total = metrics.handovers
        metrics.empirical_pi0 = occupancy.get(0, 0) / total
        metrics.empirical_mean_distance = (
            sum(d * c for d, c in occupancy.items()) / total
        )
    # control planes report completed migrations only; instant-migration
    # runs keep the decision count (every decision completes on the spot)
    if not isinstance(plane, _NonePlane):
        done = [r for r in plane.migrations if r.t_done is not None]
        metrics.downtime = [r.downtime for r in done]
        metrics.migration_duration = [r.duration for r in done]
        metrics.migrations_count = len(done)
    return sim.log, metrics


def measure_downtime(log: EventLog) -> list[float]:
    """Per-migration downtime recomputed from the event log alone.

    Downtime runs from the switch-over record to the last redirect record of
    the same migration id; migrations with no commit before the log ends are
    skipped.  Structurally broken logs raise IncompleteLog.
    """
    switchover: dict[str, float] = {}
    redirects: dict[str, float] = {}
    committed: dict[str, float] = {}
    started: set[str] = set()
    for rec in log.records:
        mig = rec.get("mig")
        if mig is None:
            continue
        if rec.kind == "MIGRATE_START":
            started.add(mig)
        elif rec.get("role") == "switchover":
            if mig not in started:
                raise IncompleteLog(f"switch-over without start for migration {mig}")
            switchover[mig] = rec.time
        elif rec.get("role") == "redirect":
            if mig not in switchover:
                raise IncompleteLog(f"redirect before switch-over for migration {mig}")
            redirects[mig] = max(redirects.get(mig, rec.time), rec.time)
        elif rec.kind == "MIGRATE_DONE":
            if mig not in switchover:
                raise IncompleteLog(f"commit without switch-over for migration {mig}")
            committed[mig] = rec.time
    out = []
    for mig in sorted(committed, key=float):
        end = max(redirects.get(mig, switchover[mig]), switchover[mig])
        out.append(end - switchover[mig])
    return out


def migration_conservation(log: EventLog) -> bool:
    """Every migration start has exactly one commit or abort (tail excluded)."""
    starts = [r.get("mig") for r in log.of_kind("MIGRATE_START")]
    ends: dict[str, int] = {}
    for rec in log.of_kind("MIGRATE_DONE", "MIGRATE_ABORT"):
        mig = rec.get("mig")
        if mig is not None:
            ends[mig] = ends.get(mig, 0) + 1
    if any(count > 1 for count in ends.values()):
        return False
    unfinished = [m for m in starts if m not in ends]
    return len(unfinished) <= 1  # at most the one cut off by the horizon


def rtt_probe(log: EventLog) -> list[tuple[float, float]]:
    """Echo samples recorded in a log: (receive time, round trip seconds)."""
    out = []
    for rec in log.of_kind("PROBE_RTT"):
        out.append((rec.time, float(rec.get("rtt"))))
    return out
