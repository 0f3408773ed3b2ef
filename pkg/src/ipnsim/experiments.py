"""Experiment harnesses: connection establishment and key revocation.

``run_establishment`` measures, for ordered pairs of non-relay ground
endpoints, the latency and overhead of establishing an authenticated
connection under one validation protocol, against a plain delivery
baseline computed on the identical contact plan.

``run_revocation`` issues a revocation at t0 and measures, per victim
node, the protection threshold tau = sup{t : an attacker message sent at
t is accepted}, found by bisection over send time (valid because arrival
times are nondecreasing in send time and CA knowledge is monotone).
Coverage time per segment is the max of tau - t0; penetration is the
fraction of victims accepting a message sent exactly at t0 (cached-status
runs only).

All probes are independent engine instances sharing one routed contact
plan, so its shortest-path caches amortize across the sweep.
"""

from __future__ import annotations

import itertools
import math
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .pki import (CERT_STATUS, CertStatus, CRLDocument, InvalidConfig,
                  NoReachableCA, PkiConfig, PkiWorld, ProtocolMessage,
                  build_world)
from .routing import ContactPlan
from .scenarios import Scenario
from .simcore import Engine, RunConfig
from .topology import CandidateLink, Topology

BISECTION_TOL = 1e-3

# Contact plans are expensive to build and read-only once built; keep the
# most recent few so multi-protocol sweeps on one scenario share them.
_PLAN_CACHE: dict[tuple[str, int, float], ContactPlan] = {}
_PLAN_CACHE_LIMIT = 4


def _get_plan(scenario: Scenario, epoch_offset: float) -> ContactPlan:
    key = (scenario.name, scenario.seed, epoch_offset)
    plan = _PLAN_CACHE.get(key)
    if plan is None:
        plan = ContactPlan(scenario.build_topology(epoch_offset))
        if len(_PLAN_CACHE) >= _PLAN_CACHE_LIMIT:
            _PLAN_CACHE.pop(next(iter(_PLAN_CACHE)))
        _PLAN_CACHE[key] = plan
    return plan


@dataclass
class EstablishmentRecord:
    src: str
    dst: str
    t_send: float
    outcome: str  # "delivered" | "dropped"
    latency: Optional[float]  # t_accept - t_send
    overhead: Optional[float]  # t_accept - plain arrival; None if n/a
    hops: Optional[int]


@dataclass
class EstablishmentResult:
    scenario: str
    config: PkiConfig
    run_config: RunConfig
    records: list[EstablishmentRecord]
    trace: list[tuple[float, str, str, str, str, str]]


@dataclass
class RevocationRecord:
    scenario: str
    protocol: str
    ca_model: str
    subscribe: bool
    firewall: bool
    cached: bool
    attacker: str
    attacker_segment: str
    origin_ca: str
    origin_segment: str
    t0: float
    epoch_offset: float
    # per-segment results
    coverage_time: dict[str, float]
    covered: dict[str, bool]  # False: some victim accepted up to window end
    penetration: Optional[dict[str, float]]
    # per-victim protection thresholds (absolute send times) and flags
    tau: dict[str, float] = field(default_factory=dict)
    tau_flag: dict[str, str] = field(default_factory=dict)
    victim_segment: dict[str, str] = field(default_factory=dict)
    # raw CA revocation-receipt times, for post-hoc alternatives
    ca_receipt: dict[str, float] = field(default_factory=dict)
    trace: list = field(default_factory=list)


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


# ---------------------------------------------------------------------------
# Connection establishment


def run_establishment(scenario: Scenario, pki_config: PkiConfig,
                      run_config: RunConfig, *,
                      sources: Optional[list[str]] = None,
                      t_send: float = 0.0) -> EstablishmentResult:
    """Protocol establishment over ordered endpoint pairs at one epoch.

    ``sources`` restricts the sender side (every endpoint still appears as
    a recipient); default is all non-relay ground endpoints.
    """
    pki_config.validate()
    plan = _get_plan(scenario, run_config.epoch_offset)
    world = build_world(scenario, plan, pki_config)
    engine = Engine(world.handle_event)
    horizon = plan.horizon

    endpoints = scenario.establishment_endpoints()
    if sources is None:
        sources = endpoints
    else:
        unknown = set(sources) - set(endpoints)
        if unknown:
            raise ValueError(f"sources are not endpoints: {sorted(unknown)}")

    if pki_config.protocol == "crl-broadcast":
        world.schedule_broadcasts(engine, endpoints, horizon)

    pairs: list[tuple[str, str]] = []
    failed_init: set[int] = set()
    for src in sources:
        plan.query_all(plan.index_of[src], t_send)  # warm shared tree
        for dst in endpoints:
            if dst != src:
                pairs.append((src, dst))
    for ctx, (src, dst) in enumerate(pairs):
        try:
            world.initiate(engine, ctx, src, dst, t_send)
        except NoReachableCA:
            failed_init.add(ctx)
        if ctx % 20000 == 0:
            _progress(f"establishment: initiated {ctx}/{len(pairs)} pairs")
    engine.run_until(horizon)

    records: list[EstablishmentRecord] = []
    for ctx, (src, dst) in enumerate(pairs):
        decision = world.decisions.get(ctx)
        if ctx in failed_init or decision is None or not decision[0]:
            records.append(EstablishmentRecord(src, dst, t_send, "dropped",
                                               None, None, None))
            continue
        t_accept = decision[1]
        latency = t_accept - t_send
        if pki_config.protocol == "crl-broadcast":
            overhead = None
        else:
            ea = plan.query_all(plan.index_of[src], t_send)[0]
            t_plain = ea[plan.index_of[dst]]
            overhead = t_accept - t_plain
            if overhead < -1e-9:
                raise AssertionError(
                    f"negative establishment overhead {overhead} for "
                    f"{src}->{dst}")
            overhead = max(overhead, 0.0)
        records.append(EstablishmentRecord(
            src, dst, t_send, "delivered", latency, overhead,
            world.leg_hops.get(ctx)))
    _progress(f"establishment: {len(records)} records "
              f"({sum(r.outcome == 'dropped' for r in records)} dropped)")
    return EstablishmentResult(scenario.name, pki_config, run_config,
                               records, world.trace)


# ---------------------------------------------------------------------------
# Key revocation


def origin_ca_for(scenario: Scenario, pki_config: PkiConfig,
                  segment: str) -> str:
    if pki_config.ca_model == "centralized":
        return "ca:root"
    if segment not in scenario.segments:
        raise ValueError(f"unknown segment {segment!r}")
    return f"ca:{segment}"


def representative_attacker(scenario: Scenario, topo: Topology,
                            segment: str, t0: float) -> str:
    """The segment node farthest from the segment's CA anchor at t0
    (relays and the anchor itself excluded); ties break on node id."""
    anchor = scenario.designated_node(segment)
    anchor_pos = np.array(topo.position_of(anchor, t0))
    best: tuple[float, str] | None = None
    for n in scenario.nodes_in_segment(segment):
        if n.id == anchor or scenario.is_relay(n):
            continue
        d = float(np.linalg.norm(np.array(topo.position_of(n.id, t0))
                                 - anchor_pos))
        if best is None or (-d, n.id) < (-best[0], best[1]):
            best = (d, n.id)
    if best is None:
        raise ValueError(f"segment {segment!r} has no eligible attacker")
    return best[1]


def _clone_world(template: PkiWorld, ca_known: dict) -> PkiWorld:
    world = PkiWorld(
        template.plan, template.config,
        segment_of=template.segment_of,
        ca_nodes=template.ca_nodes,
        node_ca=template.node_ca,
        relay_ca_of_segment=template.relay_ca_of_segment,
        root_ca=template.root_ca,
        certs=template.certs,
    )
    world.ca_known = dict(ca_known)
    return world


class _RevocationProbe:
    """Shared pre-computation for accept(victim, t) probes."""

    def __init__(self, scenario: Scenario, plan: ContactPlan,
                 config: PkiConfig, attacker: str, origin_ca: str,
                 cached: bool, t0: float):
        self.plan = plan
        self.config = config
        self.attacker = attacker
        self.cached = cached
        self.t0 = t0
        self.horizon = plan.horizon
        self.template = build_world(scenario, plan, config)
        w = self.template
        if origin_ca not in w.ca_nodes:
            raise ValueError(f"no CA {origin_ca!r} under this configuration")
        self.origin_ca = origin_ca
        self.serial = w.serial_of[attacker]
        self.issuer = w.certs[attacker].issuer

        # CA revocation-receipt times: origin at t0, the rest when the
        # routed inter-CA notice arrives (centralized: root only).
        self.t_known: dict[str, float] = {origin_ca: t0}
        if config.ca_model == "distributed":
            src = plan.index_of[w.ca_nodes[origin_ca]]
            ea = plan.query_all(src, t0)[0]
            for ca, node in w.ca_nodes.items():
                if ca == origin_ca:
                    continue
                arrival = t0 if node == w.ca_nodes[origin_ca] \
                    else float(ea[plan.index_of[node]])
                if math.isfinite(arrival):
                    self.t_known[ca] = arrival
        self.ca_known = {(ca, self.serial): t
                         for ca, t in self.t_known.items()}
        self._push_cache: dict[str, Optional[tuple[float, float]]] = {}
        self._bcast_cache: dict[str, list] = {}

    def _push_arrival(self, victim: str) -> Optional[tuple[float, float]]:
        """(arrival, produced_at) of the subscription push to victim."""
        if victim in self._push_cache:
            return self._push_cache[victim]
        w, plan = self.template, self.plan
        ca = w.query_ca_of(victim)
        out = None
        t = self.t_known.get(ca)
        if t is not None:
            ca_node = w.ca_nodes[ca]
            if ca_node == victim:
                out = (t, t)
            else:
                ea = plan.query_all(plan.index_of[ca_node], t)[0]
                arrival = float(ea[plan.index_of[victim]])
                if math.isfinite(arrival):
                    out = (arrival, t)
        self._push_cache[victim] = out
        return out

    def _broadcasts(self, victim: str) -> list[tuple[float, str, CRLDocument]]:
        if victim in self._bcast_cache:
            return self._bcast_cache[victim]
        w, plan = self.template, self.plan
        out = []
        interval = self.config.broadcast_interval
        k = 0
        while k * interval <= self.horizon:
            issue = k * interval
            for ca, ca_node in w.ca_nodes.items():
                known = self.t_known.get(ca)
                revoked = frozenset([self.serial]) \
                    if known is not None and issue >= known else frozenset()
                crl = CRLDocument(ca, revoked, issue,
                                  self.config.crl_expiry)
                if ca_node == victim:
                    out.append((issue, ca, crl))
                    continue
                ea = plan.query_all(plan.index_of[ca_node], issue)[0]
                arrival = float(ea[plan.index_of[victim]])
                if math.isfinite(arrival):
                    out.append((arrival, ca, crl))
            k += 1
        out.sort(key=lambda e: e[0])
        self._bcast_cache[victim] = out
        return out

    def accept(self, victim: str, t: float,
               keep_trace: bool = False) -> tuple[bool, list]:
        """Does ``victim`` accept an attacker message sent at ``t``?"""
        world = _clone_world(self.template, self.ca_known)
        engine = Engine(world.handle_event)
        ctx = 0
        if self.cached:
            st = world.state(ctx, victim)
            st.status_cache[self.serial] = CertStatus(
                self.serial, "good", produced_at=self.t0,
                ttl=self.config.status_ttl)
            st.crl_cache[self.issuer] = CRLDocument(
                self.issuer, frozenset(), issued_at=self.t0,
                expiry=self.config.crl_expiry)
        if self.config.subscribe:
            push = self._push_arrival(victim)
            if push is not None:
                arrival, produced = push
                status = CertStatus(self.serial, "revoked",
                                    produced_at=produced,
                                    ttl=self.config.status_ttl)
                ca_node = self.template.ca_nodes[
                    self.template.query_ca_of(victim)]
                engine.schedule(arrival, victim, ("deliver", ProtocolMessage(
                    CERT_STATUS, ca_node, victim, self.serial, ctx,
                    status=status)))
        if self.config.protocol == "crl-broadcast":
            for arrival, ca, crl in self._broadcasts(victim):
                engine.schedule(arrival, victim,
                                ("bcast-arrive", victim, ca, crl))
        try:
            world.initiate(engine, ctx, self.attacker, victim, t)
        except NoReachableCA:
            return False, world.trace if keep_trace else []
        engine.run_until(self.horizon)
        decision = world.decisions.get(ctx)
        accepted = decision is not None and decision[0]
        return accepted, (world.trace if keep_trace else [])


def _bisect_tau(probe: _RevocationProbe, victim: str, lo: float, hi: float,
                tol: float) -> tuple[float, str]:
    """sup of accepted send times in [lo, hi]; flags the boundary cases."""
    if probe.accept(victim, hi)[0]:
        return hi, "not-covered-within-horizon"
    if not probe.accept(victim, lo)[0]:
        return lo, "fully-protected"
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if probe.accept(victim, mid)[0]:
            lo = mid
        else:
            hi = mid
    return lo, "covered"


def run_revocation(scenario: Scenario, pki_config: PkiConfig, attacker: str,
                   origin_ca: str, cached: bool, run_config: RunConfig, *,
                   victims: Optional[list[str]] = None,
                   t0: Optional[float] = None,
                   tol: float = BISECTION_TOL) -> RevocationRecord:
    pki_config.validate()
    plan = _get_plan(scenario, run_config.epoch_offset)
    horizon = plan.horizon
    if t0 is None:
        t0 = horizon / 2.0
    probe = _RevocationProbe(scenario, plan, pki_config, attacker, origin_ca,
                             cached, t0)
    if victims is None:
        victims = [n.id for n in scenario.nodes if n.id != attacker]
    else:
        known = {n.id for n in scenario.nodes}
        unknown = set(victims) - known
        if unknown:
            raise ValueError(f"unknown victims: {sorted(unknown)}")
        victims = [v for v in victims if v != attacker]

    lo, hi = t0 - horizon / 2.0, t0 + horizon / 2.0
    seg_of = probe.template.segment_of
    tau: dict[str, float] = {}
    tau_flag: dict[str, str] = {}
    penetration_hits: dict[str, list[bool]] = {}
    for i, victim in enumerate(victims):
        tau[victim], tau_flag[victim] = _bisect_tau(probe, victim, lo, hi,
                                                    tol)
        if cached:
            penetration_hits.setdefault(seg_of[victim], []).append(
                probe.accept(victim, t0)[0])
        if i % 50 == 0:
            _progress(f"revocation: victim {i}/{len(victims)}")

    coverage: dict[str, float] = {}
    covered: dict[str, bool] = {}
    for victim, t in tau.items():
        seg = seg_of[victim]
        if seg not in coverage or t - t0 > coverage[seg]:
            coverage[seg] = t - t0
        if tau_flag[victim] == "not-covered-within-horizon":
            covered[seg] = False
        covered.setdefault(seg, True)
    penetration = None
    if cached:
        penetration = {seg: sum(hits) / len(hits)
                       for seg, hits in penetration_hits.items()}
    origin_segment = seg_of[probe.template.ca_nodes[origin_ca]]
    return RevocationRecord(
        scenario=scenario.name, protocol=pki_config.protocol,
        ca_model=pki_config.ca_model, subscribe=pki_config.subscribe,
        firewall=pki_config.firewall, cached=cached,
        attacker=attacker, attacker_segment=seg_of[attacker],
        origin_ca=origin_ca, origin_segment=origin_segment,
        t0=t0, epoch_offset=run_config.epoch_offset,
        coverage_time=coverage, covered=covered, penetration=penetration,
        tau=tau, tau_flag=tau_flag,
        victim_segment={v: seg_of[v] for v in tau},
        ca_receipt=dict(probe.t_known))


# ---------------------------------------------------------------------------
# Relay availability and epoch offsets


def relay_link_topology(scenario: Scenario, horizon: Optional[float] = None,
                        dt: Optional[float] = None) -> Topology:
    """Topology restricted to relays and relay-capable ground stations,
    keeping only the candidate links between them.  Cheap to build over
    long horizons; used for availability timelines and epoch selection."""
    keep = [n for n in scenario.nodes
            if n.kind == "relay"
            or (n.kind == "ground" and n.meta.get("relay_capable"))]
    old_index = {n.id: i for i, n in enumerate(scenario.nodes)}
    remap = {old_index[n.id]: j for j, n in enumerate(keep)}
    cands = [CandidateLink(remap[c.a], remap[c.b], c.max_range,
                           c.min_elevation_deg)
             for c in scenario.candidates
             if c.a in remap and c.b in remap]
    return Topology(keep, scenario.body_geoms(0.0), cands,
                    dt if dt is not None else scenario.dt,
                    horizon if horizon is not None else scenario.horizon)


def relay_uptime(scenario: Scenario, horizon: Optional[float] = None,
                 dt: Optional[float] = None
                 ) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Per-relay boolean uptime (any ground contact) on the grid."""
    topo = relay_link_topology(scenario, horizon, dt)
    out: dict[str, np.ndarray] = {}
    for relay in scenario.relay_nodes():
        rows = [i for i, c in enumerate(topo.candidates)
                if relay in (topo.nodes[c.a].id, topo.nodes[c.b].id)]
        if not rows:
            continue
        out[relay] = topo.grid_up[rows].any(axis=0)
    return topo.times, out


def default_epoch_offsets(scenario: Scenario, count: int = 4) -> list[float]:
    """Start-time offsets giving distinct relay availability states at
    t=0 (first occurrence of each up/down combination).  Scenarios
    without relays fall back to evenly spread offsets."""
    times, uptime = relay_uptime(scenario, horizon=10 * scenario.horizon)
    if not uptime:
        return [k * scenario.horizon / count for k in range(count)]
    relays = sorted(uptime)
    states = np.stack([uptime[r] for r in relays])  # (R, W)
    seen: dict[tuple, float] = {}
    for j in range(states.shape[1]):
        combo = tuple(bool(x) for x in states[:, j])
        if combo not in seen:
            seen[combo] = float(times[j])
        if len(seen) == 2 ** len(relays):
            break
    # All-up first, then decreasing availability.
    ordered = sorted(seen, key=lambda c: (-sum(c), c))
    return [seen[c] for c in ordered[:count]]


# ---------------------------------------------------------------------------
# Config sweeps


def sweep(scenario: Scenario, config_grid: dict, run_config: RunConfig
          ) -> list[dict]:
    """Run every combination in the grid; invalid configurations are
    skipped and logged.  Returns one cell dict per combination with the
    realized parameters and the result (or skip reason)."""
    experiment = config_grid.get("experiment", "revocation")
    keys = [k for k in ("protocol", "ca_model", "subscribe", "firewall",
                        "cached", "attacker_segment", "origin_segment",
                        "epoch_offset") if k in config_grid]
    axes = [config_grid[k] if isinstance(config_grid[k], list)
            else [config_grid[k]] for k in keys]
    cells: list[dict] = []
    for combo in itertools.product(*axes):
        params = dict(zip(keys, combo))
        cell: dict = {"experiment": experiment, **params}
        config = PkiConfig(
            protocol=params.get("protocol", "ocsp"),
            ca_model=params.get("ca_model", "distributed"),
            subscribe=bool(params.get("subscribe", False)),
            firewall=bool(params.get("firewall", False)),
        )
        rc = RunConfig(seed=run_config.seed, horizon=run_config.horizon,
                       epoch_offset=float(params.get("epoch_offset", 0.0)))
        try:
            config.validate()
            if experiment == "establishment":
                cell["result"] = run_establishment(scenario, config, rc)
            else:
                attacker = representative_attacker(
                    scenario, _get_plan(scenario, rc.epoch_offset).topo,
                    params["attacker_segment"], rc.horizon / 2.0)
                origin = origin_ca_for(scenario, config,
                                       params["origin_segment"])
                cell["result"] = run_revocation(
                    scenario, config, attacker, origin,
                    bool(params.get("cached", False)), rc)
        except InvalidConfig as exc:
            cell["skipped"] = str(exc)
            _progress(f"sweep: skipped {params}: {exc}")
        cells.append(cell)
    return cells
