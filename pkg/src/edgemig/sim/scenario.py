"""Scenario configuration: dataclasses, the key = value config file format,
and the two-DC presets used by the testbed-style experiments."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields

from ..costs import TransferParams
from .engine import ConfigError, LinkLatencies

MOBILITY_MODELS = ("hex", "1d")
DECISIONS = ("always-at-k", "never", "always", "mdp")
CONTROL_PLANES = ("none", "lisp", "sdn")


@dataclass
class MobilityConfig:
    model: str = "hex"
    k: int = 5  # ring (or 1d distance) that forces migration under always-at-k
    p_fwd: float = 0.5
    mu: float = 1.0

    def __post_init__(self):
        if self.model not in MOBILITY_MODELS:
            raise ConfigError(f"unknown mobility model {self.model!r}")
        if self.k < 1:
            raise ConfigError("mobility k must be >= 1")
        if not 0.0 <= self.p_fwd <= 1.0:
            raise ConfigError("p_fwd must be in [0, 1]")
        if self.mu <= 0:
            raise ConfigError("mu must be positive")


@dataclass
class DecisionConfig:
    policy: str = "always-at-k"
    thr: int = 10
    tau: float = 0.1
    gamma: float = 0.95
    q_max: float = 10.0
    k_factor: float = 1.0

    def __post_init__(self):
        if self.policy not in DECISIONS:
            raise ConfigError(f"unknown decision policy {self.policy!r}")
        if self.thr < 1:
            raise ConfigError("thr must be >= 1")
        if self.tau < 0:
            raise ConfigError("tau must be >= 0")


@dataclass
class ControlPlaneConfig:
    kind: str = "none"
    subnets: int = 2
    correspondents: int = 0
    probe_period: float = 1.0  # 0 disables echo probes
    controller_delay: float = 0.0

    def __post_init__(self):
        if self.kind not in CONTROL_PLANES:
            raise ConfigError(f"unknown control plane {self.kind!r}")
        if self.subnets < 1:
            raise ConfigError("need at least one subnet")
        if self.correspondents < 0 or self.probe_period < 0 or self.controller_delay < 0:
            raise ConfigError("control plane delays/counts must be >= 0")


@dataclass
class ScenarioConfig:
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    decision: DecisionConfig = field(default_factory=DecisionConfig)
    control_plane: ControlPlaneConfig = field(default_factory=ControlPlaneConfig)
    links: LinkLatencies = field(default_factory=lambda: LinkLatencies(default=0.0))
    bandwidth: float = 1e8  # bits/s on the DC-DC transfer path
    transfer: TransferParams = field(default_factory=TransferParams)
    seed: int = 0
    horizon_handovers: int | None = 1000
    horizon_time: float | None = None
    log_handovers: bool = True

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ConfigError("bandwidth must be positive")
        if self.horizon_handovers is None and self.horizon_time is None:
            raise ConfigError("one of horizon_handovers / horizon_time is required")
        if self.horizon_handovers is not None and self.horizon_handovers < 0:
            raise ConfigError("horizon_handovers must be >= 0")


def _coerce(raw: str, target_type):
    if target_type is bool:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    return target_type(raw)


def _fill(cls, section, context: str):
    """Build a section dataclass, coercing each value to its default's type."""
    kwargs = {}
    known = {f.name: f for f in fields(cls)}
    for key, raw in section.items():
        if key not in known:
            raise ConfigError(f"{context}: unknown key {key!r}")
        try:
            kwargs[key] = _coerce(raw, type(known[key].default))
        except ValueError as exc:
            raise ConfigError(f"{context}: bad value for {key!r}: {exc}") from None
    return cls(**kwargs)


def load_config(path) -> ScenarioConfig:
    """Parse a sectioned key = value scenario file.

    Sections: [mobility], [decision], [control_plane], [links], [transfer],
    [sim].  Link keys are endpoint pairs like `UE-XTR_SUB1`; the special
    key `default` fills unlisted pairs.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # endpoint names are case-sensitive
    try:
        with open(path) as fh:
            parser.read_file(fh, source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None

    known_sections = {"mobility", "decision", "control_plane", "links", "transfer", "sim"}
    unknown = set(parser.sections()) - known_sections
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    def lowered(name):
        return {k.lower(): v for k, v in parser[name].items()} if parser.has_section(name) else {}

    mobility = _fill(MobilityConfig, lowered("mobility"), "[mobility]")
    decision = _fill(DecisionConfig, lowered("decision"), "[decision]")
    control = _fill(ControlPlaneConfig, lowered("control_plane"), "[control_plane]")

    links = LinkLatencies(default=None)
    bandwidth = 1e8
    if parser.has_section("links"):
        for key, raw in parser["links"].items():
            try:
                value = float(raw)
            except ValueError:
                raise ConfigError(f"[links]: bad latency for {key!r}") from None
            if key.lower() == "default":
                links.default = value
            else:
                a, sep, b = key.partition("-")
                if not sep or not a or not b:
                    raise ConfigError(f"[links]: keys must be A-B pairs, got {key!r}")
                links.set(a, b, value)

    transfer_kwargs = {}
    if parser.has_section("transfer"):
        for key, raw in lowered("transfer").items():
            if key == "bandwidth":
                bandwidth = float(raw)
                continue
            valid = {f.name for f in fields(TransferParams)}
            if key not in valid:
                raise ConfigError(f"[transfer]: unknown key {key!r}")
            transfer_kwargs[key] = int(raw) if key in ("mss", "w_max") else float(raw)
    transfer = TransferParams(**transfer_kwargs)

    sim_kwargs = {}
    simsec = lowered("sim")
    if "seed" in simsec:
        sim_kwargs["seed"] = int(simsec.pop("seed"))
    if "horizon_handovers" in simsec:
        sim_kwargs["horizon_handovers"] = int(simsec.pop("horizon_handovers"))
    if "horizon_time" in simsec:
        sim_kwargs["horizon_time"] = float(simsec.pop("horizon_time"))
        sim_kwargs.setdefault("horizon_handovers", None)
    if "log_handovers" in simsec:
        sim_kwargs["log_handovers"] = _coerce(simsec.pop("log_handovers"), bool)
    if simsec:
        raise ConfigError(f"[sim]: unknown keys {sorted(simsec)}")

    return ScenarioConfig(
        mobility=mobility,
        decision=decision,
        control_plane=control,
        links=links,
        bandwidth=bandwidth,
        transfer=transfer,
        **sim_kwargs,
    )


# --- presets mirroring the two-DC testbed ----------------------------------

def preset_lisp(
    *,
    dc_dc: float = 0.005,  # one-way DC1-DC2, i.e. 10 ms RTT
    fmcc_xtr1: float = 0.0005,
    fmcc_xtr2: float = 0.005,
    correspondents: int = 1,
    seed: int = 7,
) -> ScenarioConfig:
    """Two-subnet, two-DC LISP scenario with the testbed-style latencies."""
    links = LinkLatencies(default=0.0005)
    links.set("DC1", "DC2", dc_dc)
    links.set("FMCC", "XTR_DC1", fmcc_xtr1)
    links.set("FMCC", "XTR_DC2", fmcc_xtr2)
    links.set("FMCC", "DC1", fmcc_xtr1)
    links.set("FMCC", "DC2", fmcc_xtr2)
    links.set("UE", "XTR_SUB1", 0.0005)
    links.set("UE", "XTR_SUB2", 0.0005)
    links.set("XTR_SUB1", "XTR_DC1", 0.001)
    links.set("XTR_SUB1", "XTR_DC2", 0.12)
    links.set("XTR_SUB2", "XTR_DC1", 0.12)
    links.set("XTR_SUB2", "XTR_DC2", 0.001)
    return ScenarioConfig(
        mobility=MobilityConfig(model="1d", k=1, p_fwd=0.5, mu=0.02),
        decision=DecisionConfig(policy="always-at-k"),
        control_plane=ControlPlaneConfig(
            kind="lisp", subnets=2, correspondents=correspondents, probe_period=1.0
        ),
        links=links,
        bandwidth=1e8,
        transfer=TransferParams(objects_size=1e8, sig_size=800.0),
        seed=seed,
        horizon_handovers=None,
        horizon_time=200.0,
    )


def preset_sdn(*, suboptimal: float = 0.02475, optimal: float = 0.00025, seed: int = 11) -> ScenarioConfig:
    """Two-network SDN scenario: 50 ms RTT suboptimal path, 1 ms optimal."""
    links = LinkLatencies(default=0.00025)
    links.set("UE", "AR1", optimal)
    links.set("UE", "AR2", optimal)
    links.set("AR1", "OFDC1", optimal)
    links.set("AR1", "OFDC2", suboptimal)
    links.set("AR2", "OFDC1", suboptimal)
    links.set("AR2", "OFDC2", optimal)
    links.set("OFDC1", "DC1", 0.0)
    links.set("OFDC2", "DC2", 0.0)
    links.set("DC1", "DC2", 0.005)
    return ScenarioConfig(
        mobility=MobilityConfig(model="1d", k=1, p_fwd=0.5, mu=0.02),
        decision=DecisionConfig(policy="always-at-k"),
        control_plane=ControlPlaneConfig(kind="sdn", subnets=2, probe_period=1.0),
        links=links,
        bandwidth=1e9,
        transfer=TransferParams(objects_size=1e8),
        seed=seed,
        horizon_handovers=None,
        horizon_time=200.0,
    )


def preset_validate(k: int, samples: int, seed: int) -> ScenarioConfig:
    """Bare hex walk with instant migrations, for Monte-Carlo validation."""
    return ScenarioConfig(
        mobility=MobilityConfig(model="hex", k=k),
        decision=DecisionConfig(policy="always-at-k"),
        control_plane=ControlPlaneConfig(kind="none", probe_period=0.0),
        links=LinkLatencies(default=0.0),
        seed=seed,
        horizon_handovers=samples,
        log_handovers=False,
    )
