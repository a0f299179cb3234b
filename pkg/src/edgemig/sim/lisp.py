"""Simulated LISP control plane: xTR map-caches, the MR/MS mapping system,
controller-orchestrated migration, and /32 host-route override.

Entity naming: client subnets sit behind XTR_SUB{i}, data centers behind
XTR_DC{i}; DC{i} is the hypervisor endpoint.  The VM keeps its EID (an IP
from its home DC's /24) across migrations; reachability moves by
registering the EID as a /32 at the target xTR, which beats the /24 on
longest-prefix match.
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass, field, replace

from ..costs import transfer_time
from .engine import Network, Simulator


class Unresolvable(LookupError):
    """Mapping system returned a negative reply for the EID."""


class MigrationAbort(RuntimeError):
    """Migration could not run; state stays at the source."""


@dataclass(frozen=True)
class MapEntry:
    eid_prefix: ipaddress.IPv4Network
    rloc: str
    registered_at: float


class MapSystem:
    """MR/MS: authoritative EID-prefix to RLOC database."""

    name = "MRMS"

    def __init__(self):
        self.db: dict[ipaddress.IPv4Network, MapEntry] = {}

    def register(self, prefix: str, rloc: str, at: float) -> MapEntry:
        net = ipaddress.ip_network(prefix)
        entry = MapEntry(net, rloc, at)
        self.db[net] = entry  # one entry per prefix
        return entry

    def withdraw(self, prefix: str) -> None:
        self.db.pop(ipaddress.ip_network(prefix), None)

    def lookup(self, eid: str) -> str | None:
        """Longest-prefix match; /32 host routes beat covering subnets."""
        addr = ipaddress.ip_address(eid)
        best = None
        for net, entry in self.db.items():
            if addr in net and (best is None or net.prefixlen > best.eid_prefix.prefixlen):
                best = entry
        return best.rloc if best else None

    def owners_of_host_route(self, eid: str) -> list[str]:
        addr = ipaddress.ip_address(eid)
        return [
            e.rloc
            for net, e in self.db.items()
            if net.prefixlen == 32 and addr in net
        ]


@dataclass
class Xtr:
    """Tunneling router: local registrations, map-cache, correspondent lists."""

    name: str
    cache: dict[str, str] = field(default_factory=dict)  # eid -> rloc
    cache_filled_at: dict[str, float] = field(default_factory=dict)
    local_registrations: set[str] = field(default_factory=set)  # prefixes
    correspondents: dict[str, set[str]] = field(default_factory=dict)  # eid -> xtr names

    def note_correspondent(self, eid: str, other: str) -> None:
        if other != self.name:
            self.correspondents.setdefault(eid, set()).add(other)


@dataclass
class MigrationRecord:
    mig_id: int
    src: str
    dst: str
    t_start: float
    t_switchover: float | None = None
    t_done: float | None = None

    @property
    def duration(self) -> float:
        """Start of the orchestration until the copy completes."""
        return self.t_switchover - self.t_start

    @property
    def downtime(self) -> float:
        """Switch-over until traffic is deliverable again."""
        return self.t_done - self.t_switchover


class LispPlane:
    """Control-plane state machines driven by the simulator event loop."""

    def __init__(self, sim: Simulator, net: Network, *, n_dcs: int,
                 vm_home_dc: int = 1, correspondents: int = 0,
                 bandwidth: float = 1e8, transfer_params=None):
        self.sim = sim
        self.net = net
        self.n_dcs = n_dcs
        self.bandwidth = bandwidth
        self.transfer_params = transfer_params
        self.mrms = MapSystem()
        self.fmcc_name = "FMCC"
        self.xtrs: dict[str, Xtr] = {}
        for i in range(1, n_dcs + 1):
            self.xtrs[f"XTR_SUB{i}"] = Xtr(f"XTR_SUB{i}")
            self.xtrs[f"XTR_DC{i}"] = Xtr(f"XTR_DC{i}")
        for j in range(1, correspondents + 1):
            self.xtrs[f"CORR{j}"] = Xtr(f"CORR{j}")
        net.latencies.register("UE", self.fmcc_name, self.mrms.name, *self.xtrs)
        net.latencies.register(*(f"DC{i}" for i in range(1, n_dcs + 1)))

        # FMCC state: user locations, DC-to-xTR map learned from the MR/MS
        # once at startup, and the runner-injected decision hook.
        self.user_xtr: dict[str, str] = {}
        self.dc_xtr = {f"DC{i}": f"XTR_DC{i}" for i in range(1, n_dcs + 1)}
        self.xtr_dc = {v: k for k, v in self.dc_xtr.items()}
        self.decision_hook = None  # callable() -> int | None (target dc index)

        self.vm_eid = f"10.{vm_home_dc}.0.5"
        self.vm_dc = vm_home_dc
        self.ue_eid = "172.16.0.9"
        self.busy = False
        self.migrations: list[MigrationRecord] = []
        self._next_mig = 0

        # initial registrations: each DC xTR owns its /24; correspondents
        # hold warm caches toward the VM's home xTR
        home_xtr = f"XTR_DC{vm_home_dc}"
        for i in range(1, n_dcs + 1):
            prefix = f"10.{i}.0.0/24"
            self.mrms.register(prefix, f"XTR_DC{i}", 0.0)
            self.xtrs[f"XTR_DC{i}"].local_registrations.add(prefix)
        for j in range(1, correspondents + 1):
            name = f"CORR{j}"
            self.xtrs[name].cache[self.vm_eid] = home_xtr
            self.xtrs[home_xtr].note_correspondent(self.vm_eid, name)

    # -- resolution ---------------------------------------------------------

    def resolve(self, xtr_name: str, eid: str, on_result) -> None:
        """Cache hit answers immediately; a miss round-trips the MR/MS.

        on_result receives the RLOC, or None after a negative reply.
        """
        xtr = self.xtrs[xtr_name]
        if eid in xtr.cache:
            on_result(xtr.cache[eid])
            return

        def _at_mrms():
            rloc = self.mrms.lookup(eid)
            kind = "MAP_REPLY" if rloc else "NEG_MAP_REPLY"

            def _back():
                if rloc:
                    xtr.cache[eid] = rloc
                    xtr.cache_filled_at[eid] = self.sim.now
                on_result(rloc)

            self.net.send(self.mrms.name, xtr_name, kind, _back, eid=eid)

        self.net.send(xtr_name, self.mrms.name, "MAP_REQUEST", _at_mrms, eid=eid)

    def resolve_blocking(self, xtr_name: str, eid: str) -> str:
        """Run the resolution to completion on the event loop (test helper)."""
        result: list = []
        self.resolve(xtr_name, eid, result.append)
        self.sim.run()
        if not result or result[0] is None:
            raise Unresolvable(eid)
        return result[0]

    # -- mobility notifications ----------------------------------------------

    def notify_user_attach(self, subnet: int) -> None:
        """New-subnet xTR registers the UE and the MR/MS informs the
        controller, which runs the migration decision hook."""
        xtr_name = f"XTR_SUB{subnet}"
        self.xtrs[xtr_name].local_registrations.add(f"{self.ue_eid}/32")

        def _at_mrms():
            self.mrms.register(f"{self.ue_eid}/32", xtr_name, self.sim.now)

            def _at_fmcc():
                self.user_xtr["UE"] = xtr_name
                self._run_decision()

            self.net.send(self.mrms.name, self.fmcc_name, "FMCC_NOTIFY", _at_fmcc,
                          ue=self.ue_eid, xtr=xtr_name)

        self.net.send(xtr_name, self.mrms.name, "MAP_REGISTER", _at_mrms,
                      eid=f"{self.ue_eid}/32")

    def _run_decision(self):
        if self.decision_hook is None or self.busy:
            return
        target = self.decision_hook()
        if target is not None and target != self.vm_dc:
            self.migrate_vm(target)

    # -- migration -------------------------------------------------------------

    def migrate_vm(self, dst_dc: int, on_done=None) -> MigrationRecord:
        """Orchestrated move of the VM, returning its timing record.

        Sequence: transfer command to the source hypervisor, timed copy,
        switch-over at the target, RLOC change to both DC xTRs, /32
        registration at the MR/MS, cache erase plus correspondent redirect
        from the source xTR.  Downtime spans switch-over to the last
        redirect.
        """
        src, dst = f"DC{self.vm_dc}", f"DC{dst_dc}"
        if dst not in self.dc_xtr:
            self.sim.emit("MIGRATE_ABORT", self.fmcc_name, dst=dst, reason="unknown-dc")
            raise MigrationAbort(f"target {dst} unknown to the controller")
        if self.busy:
            raise MigrationAbort("migration already in flight")
        self._next_mig += 1
        rec = MigrationRecord(self._next_mig, src, dst, self.sim.now)
        self.migrations.append(rec)
        self.busy = True
        src_xtr, dst_xtr = self.dc_xtr[src], self.dc_xtr[dst]
        eid = self.vm_eid
        host_route = f"{eid}/32"
        self.sim.emit("MIGRATE_START", self.fmcc_name, mig=rec.mig_id, src=src, dst=dst)

        pending = {"redirects": 0, "registered": False, "src_done": False}

        def _maybe_done():
            if pending["registered"] and pending["src_done"] and pending["redirects"] == 0:
                rec.t_done = self.sim.now
                self.busy = False
                self.sim.emit(
                    "MIGRATE_DONE", self.fmcc_name, mig=rec.mig_id, role="commit",
                    downtime=rec.downtime, duration=rec.duration,
                )
                if on_done is not None:
                    on_done(rec)

        def _begin_transfer():
            self.sim.emit("XFER_START", src, mig=rec.mig_id)
            dc_rtt = self.net.latencies.rtt(src, dst)
            seconds = self.transfer_seconds(dc_rtt)
            self.sim.schedule(seconds, _switchover)

        def _switchover():
            rec.t_switchover = self.sim.now
            self.vm_dc = int(dst[2:])
            self.sim.emit("XFER_DONE", dst, mig=rec.mig_id, role="switchover")
            self.net.send(dst, self.fmcc_name, "XFER_NOTIFY", _at_fmcc, mig=rec.mig_id)

        def _at_fmcc():
            self.net.send(self.fmcc_name, dst_xtr, "RLOC_UPDATE", _dst_side,
                          mig=rec.mig_id, eid=eid, rloc=dst_xtr)
            self.net.send(self.fmcc_name, src_xtr, "RLOC_UPDATE", _src_side,
                          mig=rec.mig_id, eid=eid, rloc=dst_xtr)

        def _dst_side():
            self.xtrs[dst_xtr].local_registrations.add(host_route)

            def _registered():
                self.mrms.register(host_route, dst_xtr, self.sim.now)
                pending["registered"] = True
                _maybe_done()

            self.net.send(dst_xtr, self.mrms.name, "MAP_REGISTER", _registered,
                          mig=rec.mig_id, eid=host_route, role="redirect")

        def _src_side():
            source = self.xtrs[src_xtr]
            source.cache.pop(eid, None)
            source.local_registrations.discard(host_route)
            parties = sorted(source.correspondents.pop(eid, ()))
            target = self.xtrs[dst_xtr]
            for name in parties:
                if name == dst_xtr:
                    continue
                pending["redirects"] += 1
                target.note_correspondent(eid, name)

                def _redirected(name=name):
                    self.xtrs[name].cache[eid] = dst_xtr
                    self.xtrs[name].cache_filled_at[eid] = self.sim.now
                    pending["redirects"] -= 1
                    _maybe_done()

                self.net.send(src_xtr, name, "RLOC_UPDATE", _redirected,
                              mig=rec.mig_id, eid=eid, rloc=dst_xtr, role="redirect")
            pending["src_done"] = True
            _maybe_done()

        self.net.send(self.fmcc_name, src, "FMCC_MIGRATE", _begin_transfer,
                      mig=rec.mig_id, dst_dc=dst)
        return rec

    def transfer_seconds(self, dc_rtt: float) -> float:
        """Copy time: bandwidth floor vs the TCP latency model, whichever
        dominates."""
        params = replace(self.transfer_params, rtt=dc_rtt)
        floor = params.objects_size / self.bandwidth
        return max(floor, transfer_time(params))

    # -- data path (echo probes) -----------------------------------------------

    def probe(self, subnet: int, on_sample=None) -> None:
        """UE echo toward the VM via the current subnet xTR.

        The sample is the full round trip including any map-request detour;
        a stale path (VM no longer behind the resolved xTR) loses the probe.
        """
        t0 = self.sim.now
        ue_xtr = f"XTR_SUB{subnet}"
        eid = self.vm_eid

        def _at_ue_xtr():
            self.resolve(ue_xtr, eid, _resolved)

        def _resolved(rloc):
            if rloc is None:
                self.sim.emit("PROBE_LOST", ue_xtr, reason="unresolvable", eid=eid)
                return
            self.xtrs[rloc].note_correspondent(eid, ue_xtr)

            def _at_dc_xtr():
                dc = self.xtr_dc.get(rloc)
                if dc is None or int(dc[2:]) != self.vm_dc:
                    self.sim.emit("PROBE_LOST", rloc, reason="vm-not-here", eid=eid)
                    return
                back = (
                    self.net.latencies.latency(rloc, dc)
                    + self.net.latencies.latency(dc, rloc)
                    + self.net.latencies.latency(rloc, ue_xtr)
                    + self.net.latencies.latency(ue_xtr, "UE")
                )

                def _received():
                    rtt = self.sim.now - t0
                    self.sim.emit("PROBE_RTT", "UE", rtt=rtt)
                    if on_sample is not None:
                        on_sample(t0, rtt)

                self.sim.schedule(back, _received)

            self.net.send(ue_xtr, rloc, "DATA", _at_dc_xtr, eid=eid)

        self.net.send("UE", ue_xtr, "DATA", _at_ue_xtr, eid=eid)

    # -- invariants --------------------------------------------------------------

    def converged(self) -> bool:
        """MR/MS and every correspondent cache agree on the VM's location."""
        expect = self.dc_xtr[f"DC{self.vm_dc}"]
        if self.mrms.lookup(self.vm_eid) != expect:
            return False
        for xtr in self.xtrs.values():
            if self.vm_eid in xtr.cache and xtr.cache[self.vm_eid] != expect:
                return False
        return True

    def host_route_owners(self) -> list[str]:
        """xTRs holding a /32 registration for the VM EID (at most one)."""
        owners = [
            x.name
            for x in self.xtrs.values()
            if f"{self.vm_eid}/32" in x.local_registrations
        ]
        return owners
