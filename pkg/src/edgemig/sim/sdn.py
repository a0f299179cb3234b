"""Simulated SDN control plane: controller-maintained location state,
match-action flow tables at access and micro-DC switches, and an
address-rewrite tunnel that keeps sessions alive across migration.

Topology: the UE reaches the fabric through AR{i} (one OpenFlow access
router per client network); each data center DC{i} sits behind its switch
OFDC{i}.  Packets are abstract (src, dst, flow) records.  Rewrites happen
only between the two switches, so endpoints always observe the original
addresses, even when private ranges overlap across DCs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..costs import transfer_time
from .engine import Network, Simulator
from .lisp import MigrationAbort, MigrationRecord

CONTROLLER = "CTRL"


class RuleConflict(ValueError):
    """A higher-priority rule with the same match but different actions
    already occupies the table."""


@dataclass(frozen=True)
class FlowRule:
    """Match on (src, dst) with None as wildcard; actions run in order."""

    match_src: str | None
    match_dst: str | None
    actions: tuple  # ("set_src"|"set_dst", addr) | ("fwd", endpoint) | ("deliver",)
    priority: int = 0
    tag: str = ""

    def matches(self, src: str, dst: str) -> bool:
        return (self.match_src is None or self.match_src == src) and (
            self.match_dst is None or self.match_dst == dst
        )


@dataclass
class Switch:
    name: str
    rules: list[FlowRule] = field(default_factory=list)

    def install(self, rule: FlowRule) -> None:
        """Same-match rules at lower or equal priority are replaced; a
        higher-priority conflicting rule rejects the install."""
        kept = []
        for r in self.rules:
            same_match = (r.match_src, r.match_dst) == (rule.match_src, rule.match_dst)
            if same_match and r.priority > rule.priority and r.actions != rule.actions:
                raise RuleConflict(
                    f"{self.name}: ({rule.match_src}, {rule.match_dst}) shadowed "
                    f"at priority {r.priority}"
                )
            if not (same_match and r.priority <= rule.priority):
                kept.append(r)
        kept.append(rule)
        self.rules = kept

    def remove_tagged(self, tag: str) -> int:
        before = len(self.rules)
        self.rules = [r for r in self.rules if r.tag != tag]
        return before - len(self.rules)

    def lookup(self, src: str, dst: str) -> FlowRule | None:
        """Highest priority wins; insertion order breaks ties."""
        best = None
        for rule in self.rules:
            if rule.matches(src, dst) and (best is None or rule.priority > best.priority):
                best = rule
        return best


@dataclass
class Packet:
    src: str
    dst: str
    flow: str
    orig_src: str
    orig_dst: str
    kind: str = "data"  # data | attach
    created: float = 0.0


@dataclass
class Vm:
    name: str
    addr: str
    home_dc: int
    dc: int


@dataclass
class FlowSpec:
    flow: str
    ue_addr: str
    vm: str


class SdnPlane:
    """Centralized controller plus switch state, driven by the event loop."""

    def __init__(self, sim: Simulator, net: Network, *, n_dcs: int,
                 vm_home_dc: int = 1, bandwidth: float = 1e8,
                 transfer_params=None, controller_delay: float = 0.0,
                 tunneling_enabled: bool = True):
        self.sim = sim
        self.net = net
        self.n_dcs = n_dcs
        self.bandwidth = bandwidth
        self.transfer_params = transfer_params
        self.controller_delay = controller_delay
        self.tunneling_enabled = tunneling_enabled

        self.switches: dict[str, Switch] = {}
        for i in range(1, n_dcs + 1):
            self.switches[f"AR{i}"] = Switch(f"AR{i}")
            self.switches[f"OFDC{i}"] = Switch(f"OFDC{i}")
        net.latencies.register("UE", CONTROLLER, *self.switches)
        net.latencies.register(*(f"DC{i}" for i in range(1, n_dcs + 1)))

        self.ue_addr = "192.168.0.9"
        self.ue_home_subnet = 1
        self.ue_subnet = 1
        self.vms: dict[str, Vm] = {}
        self.flows: dict[str, FlowSpec] = {}
        self.decision_hook = None  # callable() -> int | None
        self.busy = False
        self.migrations: list[MigrationRecord] = []
        self._next_mig = 0
        self._packet_ins: dict[str, int] = {}
        self._local_pool: dict[int, int] = {i: 0 for i in range(1, n_dcs + 1)}
        self._tunnel_addr: dict[str, str] = {}
        # per-DC delivery fabric: on-segment address -> (vm, restore addr);
        # the restore models the last-hop header rewrite back to the original
        self.fabric: dict[int, dict[str, tuple[str, str]]] = {
            i: {} for i in range(1, n_dcs + 1)
        }
        self._on_sample = None

        self.add_vm("VM", f"10.{vm_home_dc}.0.5", vm_home_dc)

    @property
    def vm_dc(self) -> int:
        """Current data center of the primary service VM."""
        return self.vms["VM"].dc

    # -- inventory -----------------------------------------------------------

    def add_vm(self, name: str, addr: str, dc: int) -> Vm:
        if addr in self.fabric[dc]:
            raise ValueError(f"address {addr} already used inside DC{dc}")
        vm = Vm(name, addr, dc, dc)
        self.vms[name] = vm
        self.net.latencies.register(name)
        self.fabric[dc][addr] = (name, addr)
        self.switches[f"OFDC{dc}"].install(
            FlowRule(None, addr, (("deliver",),), priority=0, tag=f"local:{name}")
        )
        return vm

    def add_flow(self, flow: str, ue_addr: str, vm_name: str) -> FlowSpec:
        spec = FlowSpec(flow, ue_addr, vm_name)
        self.flows[flow] = spec
        return spec

    def _alloc_local_addr(self, dc: int) -> str:
        while True:
            self._local_pool[dc] += 1
            cand = f"10.{dc}.0.{199 + self._local_pool[dc]}"
            if cand not in self.fabric[dc]:
                return cand

    # -- packet walk -----------------------------------------------------------

    def inject(self, packet: Packet, at: str) -> None:
        if at in self.switches:
            self._at_switch(self.switches[at], packet)
        else:
            self._deliver(packet, at)

    def _at_switch(self, switch: Switch, packet: Packet) -> None:
        rule = switch.lookup(packet.src, packet.dst)
        if rule is None:
            self._packet_in(switch, packet)
            return
        for action in rule.actions:
            op = action[0]
            if op == "set_src":
                packet.src = action[1]
            elif op == "set_dst":
                packet.dst = action[1]
            elif op == "fwd":
                nxt = action[1]
                self.net.send(switch.name, nxt, "PKT",
                              lambda p=packet, n=nxt: self.inject(p, n),
                              flow=packet.flow)
                return
            elif op == "deliver":
                self._fabric_deliver(switch, packet)
                return
        self.sim.emit("DROP", switch.name, flow=packet.flow, reason="no-forward-action")

    def _fabric_deliver(self, switch: Switch, packet: Packet) -> None:
        """Resolve the on-segment address, restore the original header at the
        last hop, and present the packet to the VM."""
        if not switch.name.startswith("OFDC"):
            self.sim.emit("DROP", switch.name, flow=packet.flow, reason="not-a-dc")
            return
        dc = int(switch.name[4:])
        entry = self.fabric[dc].get(packet.dst)
        if entry is None:
            self.sim.emit("DROP", switch.name, flow=packet.flow,
                          reason="no-local-endpoint", dst=packet.dst)
            return
        vm_name, restore = entry
        if self.vms[vm_name].dc != dc:
            self.sim.emit("DROP", switch.name, flow=packet.flow, reason="vm-moved")
            return
        packet.dst = restore
        self._deliver(packet, vm_name)

    def _deliver(self, packet: Packet, entity: str) -> None:
        self.sim.emit(
            "DELIVER", entity, flow=packet.flow, src=packet.src, dst=packet.dst,
            orig_src=packet.orig_src, orig_dst=packet.orig_dst,
        )
        if entity in self.vms and packet.kind == "data":
            # the VM answers with the header it observed; its vSwitch port
            # adds no propagation delay
            vm = self.vms[entity]
            reply = Packet(src=packet.dst, dst=packet.src, flow=packet.flow,
                           orig_src=packet.orig_dst, orig_dst=packet.orig_src,
                           created=packet.created)
            sw = f"OFDC{vm.dc}"
            self.sim.schedule(0.0, lambda: self.inject(reply, sw))
        elif entity == "UE":
            rtt = self.sim.now - packet.created
            self.sim.emit("PROBE_RTT", "UE", rtt=rtt, flow=packet.flow)
            if self._on_sample is not None:
                self._on_sample(packet.created, rtt)

    # -- controller ----------------------------------------------------------

    def _packet_in(self, switch: Switch, packet: Packet) -> None:
        self._packet_ins[packet.flow] = self._packet_ins.get(packet.flow, 0) + 1

        def _at_controller():
            self.sim.emit("PACKET_IN", CONTROLLER, sw=switch.name, flow=packet.flow,
                          pkt_src=packet.src, pkt_dst=packet.dst)
            self.sim.schedule(self.controller_delay,
                              lambda: self.on_packet_in(switch, packet))

        self.net.send(switch.name, CONTROLLER, "PKT_TO_CTRL", _at_controller,
                      flow=packet.flow)

    def on_packet_in(self, switch: Switch, packet: Packet) -> None:
        """Location upkeep and decision hook for attach packets; route setup
        plus deferred release for unmatched data packets."""
        if packet.kind == "attach":
            subnet = int(switch.name[2:])
            self.ue_subnet = subnet
            visited = "yes" if subnet != self.ue_home_subnet else "no"
            self.sim.emit("ATTACH", CONTROLLER, subnet=subnet, visited=visited)
            self._run_decision()
            return
        flow = self.flows.get(packet.flow)
        if flow is None:
            self.sim.emit("DROP", CONTROLLER, flow=packet.flow, reason="unknown-flow")
            return
        rules = self._flow_rules(flow, tag=f"flow:{packet.flow}")
        targets = self._send_rules(rules)
        # release only if the fresh path covers this packet where it waits;
        # packets stranded by a mobility event mid-flight are lost
        if not any(sw == switch.name and rule.matches(packet.src, packet.dst)
                   for sw, rule in rules):
            self.sim.emit("DROP", CONTROLLER, flow=packet.flow, reason="stale-path")
            return
        settle = max((self.net.latencies.latency(CONTROLLER, sw) for sw in targets),
                     default=0.0)
        self.sim.schedule(settle, lambda: self.inject(packet, switch.name))

    def _run_decision(self) -> None:
        if self.decision_hook is None or self.busy:
            return
        target = self.decision_hook()
        vm = self.vms["VM"]
        if target is not None and target != vm.dc:
            self.migrate_vm("VM", target)

    def _flow_rules(self, flow: FlowSpec, tag: str) -> list[tuple[str, FlowRule]]:
        """Bidirectional rule set toward the VM's current location; a VM away
        from home gets the rewrite tunnel between access router and DC switch."""
        vm = self.vms[flow.vm]
        ar = f"AR{self.ue_subnet}"
        ofdc = f"OFDC{vm.dc}"
        if vm.dc != vm.home_dc and self.tunneling_enabled:
            local = self._tunnel_addr.get(flow.vm)
            if local is None:
                local = self._alloc_local_addr(vm.dc)
                self._tunnel_addr[flow.vm] = local
                self.fabric[vm.dc][local] = (flow.vm, vm.addr)
            return [
                (ar, FlowRule(flow.ue_addr, vm.addr,
                              (("set_dst", local), ("fwd", ofdc)), 10, tag)),
                (ofdc, FlowRule(flow.ue_addr, local, (("deliver",),), 10, tag)),
                (ofdc, FlowRule(vm.addr, flow.ue_addr,
                                (("set_src", local), ("fwd", ar)), 10, tag)),
                (ar, FlowRule(local, flow.ue_addr,
                              (("set_src", vm.addr), ("fwd", "UE")), 10, tag)),
            ]
        return [
            (ar, FlowRule(flow.ue_addr, vm.addr, (("fwd", ofdc),), 10, tag)),
            (ofdc, FlowRule(flow.ue_addr, vm.addr, (("deliver",),), 10, tag)),
            (ofdc, FlowRule(vm.addr, flow.ue_addr, (("fwd", ar),), 10, tag)),
            (ar, FlowRule(vm.addr, flow.ue_addr, (("fwd", "UE"),), 10, tag)),
        ]

    def _send_rules(self, rules: list[tuple[str, FlowRule]],
                    mig: int | None = None, on_each=None) -> list[str]:
        """Send RULE_INSTALLs; returns the switch names touched."""
        touched = []
        for sw_name, rule in rules:
            touched.append(sw_name)

            def _apply(sw_name=sw_name, rule=rule):
                self.switches[sw_name].install(rule)
                if on_each is not None:
                    on_each()

            payload = dict(sw=sw_name, match_src=str(rule.match_src),
                           match_dst=str(rule.match_dst), tag=rule.tag)
            if mig is not None:
                payload.update(mig=mig, role="redirect")
            self.net.send(CONTROLLER, sw_name, "RULE_INSTALL", _apply, **payload)
        return touched

    def _install_flow_path(self, flow: FlowSpec, tag: str,
                           mig: int | None = None, on_each=None) -> list[str]:
        return self._send_rules(self._flow_rules(flow, tag), mig=mig, on_each=on_each)

    def setup_rewrite_tunnel(self, vm_name: str) -> str:
        """Install rewrite rules for every flow of a VM hosted away from home
        and return the allocated segment-local address."""
        vm = self.vms[vm_name]
        if vm.dc == vm.home_dc:
            raise ValueError("tunnel only applies to a VM in a visited segment")
        for flow in self.flows.values():
            if flow.vm == vm_name:
                self._install_flow_path(flow, tag=f"flow:{flow.flow}")
        return self._tunnel_addr[vm_name]

    # -- mobility + migration ---------------------------------------------------

    def notify_user_attach(self, subnet: int) -> None:
        """DHCP-style attach: one control packet raises a PacketIn carrying
        the mobility event."""
        ar = f"AR{subnet}"
        pkt = Packet(self.ue_addr, "attach", "attach", self.ue_addr, "attach",
                     kind="attach", created=self.sim.now)
        self.net.send("UE", ar, "PKT",
                      lambda: self._packet_in(self.switches[ar], pkt), flow="attach")

    def migrate_vm(self, vm_name: str, dst_dc: int, on_done=None) -> MigrationRecord:
        """Transfer the VM, then flip the access path toward the new
        location and retire source-side rules.  Downtime runs from
        switch-over to the last rule activation."""
        vm = self.vms[vm_name]
        src = f"DC{vm.dc}"
        dst = f"DC{dst_dc}"
        if not 1 <= dst_dc <= self.n_dcs:
            self.sim.emit("MIGRATE_ABORT", CONTROLLER, dst=dst, reason="unknown-dc")
            raise MigrationAbort(f"unknown target {dst}")
        if self.busy:
            raise MigrationAbort("migration already in flight")
        self._next_mig += 1
        rec = MigrationRecord(self._next_mig, src, dst, self.sim.now)
        self.migrations.append(rec)
        self.busy = True
        src_dc_idx = vm.dc
        self.sim.emit("MIGRATE_START", CONTROLLER, mig=rec.mig_id, src=src, dst=dst)

        def _begin_transfer():
            self.sim.emit("XFER_START", src, mig=rec.mig_id)
            params = replace(self.transfer_params, rtt=self.net.latencies.rtt(src, dst))
            seconds = max(params.objects_size / self.bandwidth, transfer_time(params))
            self.sim.schedule(seconds, _switchover)

        moved = {"old_local": None}

        def _switchover():
            rec.t_switchover = self.sim.now
            vm.dc = dst_dc
            # a fresh local address is allocated in the new segment
            moved["old_local"] = self._tunnel_addr.pop(vm_name, None)
            self.sim.emit("XFER_DONE", dst, mig=rec.mig_id, role="switchover")
            self.net.send(dst, CONTROLLER, "XFER_NOTIFY", _at_controller,
                          mig=rec.mig_id)

        def _at_controller():
            flows = [f for f in self.flows.values() if f.vm == vm_name]
            pending = {"count": 0}

            def _one_applied():
                self.sim.emit("RULE_ACTIVE", CONTROLLER, mig=rec.mig_id,
                              role="redirect")
                pending["count"] -= 1
                if pending["count"] == 0:
                    _done()

            def _done():
                rec.t_done = self.sim.now
                self.busy = False
                self.sim.emit("MIGRATE_DONE", CONTROLLER, mig=rec.mig_id,
                              role="commit", downtime=rec.downtime,
                              duration=rec.duration)
                if on_done is not None:
                    on_done(rec)

            removal = dst_dc != src_dc_idx
            returning_home = dst_dc == vm.home_dc
            pending["count"] = 4 * len(flows) + (1 if removal else 0) + (
                1 if returning_home else 0
            )
            if pending["count"] == 0:
                _done()
                return
            if returning_home:
                # re-establish the plain local delivery the VM had at home
                self.fabric[dst_dc][vm.addr] = (vm_name, vm.addr)

                def _rehome():
                    self.switches[f"OFDC{dst_dc}"].install(
                        FlowRule(None, vm.addr, (("deliver",),), 0,
                                 tag=f"local:{vm_name}")
                    )
                    _one_applied()

                self.net.send(CONTROLLER, f"OFDC{dst_dc}", "RULE_INSTALL", _rehome,
                              mig=rec.mig_id, sw=f"OFDC{dst_dc}",
                              match_src="None", match_dst=vm.addr, role="redirect")
            for flow in flows:
                self._install_flow_path(flow, tag=f"flow:{flow.flow}",
                                        mig=rec.mig_id, on_each=_one_applied)
            if removal:
                old_sw = f"OFDC{src_dc_idx}"
                self.fabric[src_dc_idx] = {
                    a: e for a, e in self.fabric[src_dc_idx].items()
                    if e[0] != vm_name
                }

                def _remove():
                    sw = self.switches[old_sw]
                    sw.remove_tagged(f"local:{vm_name}")
                    # stale per-flow rules toward the old location
                    stale = {vm.addr, moved["old_local"]} - {None}
                    sw.rules = [
                        r for r in sw.rules
                        if not (r.tag.startswith("flow:")
                                and stale & {r.match_src, r.match_dst})
                    ]
                    _one_applied()

                self.net.send(CONTROLLER, old_sw, "RULE_REMOVE", _remove,
                              mig=rec.mig_id, sw=old_sw, tag=f"local:{vm_name}",
                              role="redirect")

        self.net.send(CONTROLLER, src, "MIGRATE_CMD", _begin_transfer,
                      mig=rec.mig_id, dst_dc=dst)
        return rec

    # -- probes -------------------------------------------------------------------

    def probe(self, subnet: int, on_sample=None) -> None:
        """UE echo toward the VM through the current access router."""
        self._on_sample = on_sample
        vm = self.vms["VM"]
        if "probe" not in self.flows:
            self.add_flow("probe", self.ue_addr, "VM")
        pkt = Packet(self.ue_addr, vm.addr, "probe", self.ue_addr, vm.addr,
                     created=self.sim.now)
        ar = f"AR{subnet}"
        self.net.send("UE", ar, "PKT", lambda: self.inject(pkt, ar), flow="probe")

    def packet_in_count(self, flow: str) -> int:
        return self._packet_ins.get(flow, 0)
