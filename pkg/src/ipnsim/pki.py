"""Certificates, CA placement, and the certificate-validation protocols.

Six validation systems are modeled, plus two extensions:

* ``crl``            — recipient pulls a revocation list from the sender's
                       issuing CA when its cached copy is missing/expired.
* ``crl-broadcast``  — CAs push revocation lists on a fixed interval; a
                       recipient never requests anything.
* ``ocsp``           — recipient queries a CA for the sender's certificate
                       status and caches the response.
* ``ocsp-stapling``  — sender fetches its own status first and attaches it.
* ``ocsp-validator`` — sender routes the message through a validator CA
                       which staples the current status in transit.
* ``ocsp-hybrid``    — stapling within a segment; validator-via-relay-CA
                       across segments (requires CAs at the relays).

Extensions: ``subscribe`` (CAs push status updates to nodes they have
answered before) and ``firewall`` (relay satellites drop in-transit
messages whose sender's certificate their co-located CA knows is revoked).

Message kinds and sequencing follow fixed sequence diagrams; the golden
trace tests pin them.  All cryptography is simulated metadata.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Optional

from .routing import ContactPlan
from .simcore import Engine

PROTOCOLS = (
    "crl",
    "crl-broadcast",
    "ocsp",
    "ocsp-stapling",
    "ocsp-validator",
    "ocsp-hybrid",
)

# Internal pseudo-protocol: deliver the signed message with validation
# disabled.  Used for the plain-delivery baseline.
PLAIN = "plain"

SIGNED = "SignedMessage"
CERT_QUERY = "CertificateQueryMessage"
CERT_STATUS = "CertificateStatusMessage"
STAPLED = "StapledMessage"
VALIDATOR_QUERY = "ValidatorQueryMessage"
CRL_REQUEST = "CRLRequestMessage"
CRL_DIRECT = "CRLDirectMessage"
CRL_BROADCAST = "CRLBroadcastMessage"


class InvalidConfig(ValueError):
    pass


class NoReachableCA(RuntimeError):
    pass


class MalformedMessage(RuntimeError):
    pass


class UnknownSerial(KeyError):
    pass


@dataclass
class PkiConfig:
    protocol: str
    ca_model: str = "distributed"  # "centralized" | "distributed"
    subscribe: bool = False
    firewall: bool = False
    status_ttl: float = 3600.0
    crl_expiry: float = 3600.0
    broadcast_interval: float = 600.0

    def validate(self) -> None:
        if self.protocol not in PROTOCOLS and self.protocol != PLAIN:
            raise InvalidConfig(f"unknown protocol {self.protocol!r}")
        if self.ca_model not in ("centralized", "distributed"):
            raise InvalidConfig(f"unknown ca_model {self.ca_model!r}")
        if self.subscribe and self.protocol == "ocsp-stapling":
            raise InvalidConfig(
                "subscribe is unavailable with ocsp-stapling: the CA does "
                "not know where the certificate status will be sent"
            )
        if self.protocol == "ocsp-hybrid" and self.ca_model != "distributed":
            raise InvalidConfig(
                "ocsp-hybrid requires the distributed CA model (CAs at relays)"
            )


@dataclass(frozen=True)
class Certificate:
    serial: str
    subject: str
    issuer: str
    chain: tuple[str, ...]  # issuer chain terminating at the root CA


@dataclass(frozen=True)
class CertStatus:
    serial: str
    state: str  # "good" | "revoked"
    produced_at: float
    ttl: float

    def fresh(self, now: float) -> bool:
        return now < self.produced_at + self.ttl


@dataclass(frozen=True)
class CRLDocument:
    issuer: str
    revoked: frozenset[str]
    issued_at: float
    expiry: float

    def fresh(self, now: float) -> bool:
        return now < self.issued_at + self.expiry


@dataclass
class ProtocolMessage:
    kind: str
    src: str
    dst: str
    serial: str  # the certificate serial under scrutiny
    ctx: int
    status: Optional[CertStatus] = None
    crl: Optional[CRLDocument] = None
    inner: Optional["ProtocolMessage"] = None
    final_dst: Optional[str] = None
    # Serial the relay firewall screens (the original signer); unset for
    # messages that do not carry attacker-signed content.
    fw_serial: Optional[str] = None


@dataclass
class NodePkiState:
    status_cache: dict[str, CertStatus] = field(default_factory=dict)
    crl_cache: dict[str, CRLDocument] = field(default_factory=dict)
    pending: list[ProtocolMessage] = field(default_factory=list)
    queried: set[str] = field(default_factory=set)
    # CA-side: serial -> requesters registered for push updates
    subscribers: dict[str, set[str]] = field(default_factory=dict)
    # Stapling sender-side: own serial -> final recipients awaiting staple
    awaiting_staple: dict[str, list[str]] = field(default_factory=dict)


class PkiWorld:
    """Protocol state and handlers bound to one contact plan.

    Establishment runs use one isolated context per node pair (messages do
    not interact under infinite bandwidth, but caches must stay cold per
    pair); revocation probes use a single context.  CA revocation
    knowledge is global (``ca_known``); broadcast arrivals are recorded
    once per node (``broadcast_log``) and consulted by every context.
    """

    def __init__(self, plan: ContactPlan, config: PkiConfig, *,
                 segment_of: dict[str, str],
                 ca_nodes: dict[str, str],
                 node_ca: dict[str, str],
                 relay_ca_of_segment: dict[str, str],
                 root_ca: str,
                 certs: Optional[dict[str, Certificate]] = None):
        config.validate()
        self.plan = plan
        self.config = config
        self.segment_of = segment_of
        self.ca_nodes = ca_nodes  # ca id -> hosting node id
        self.node_ca = node_ca    # node id -> the CA it queries
        self.relay_ca_of_segment = relay_ca_of_segment
        self.root_ca = root_ca
        self.ca_of_node = {node: ca for ca, node in ca_nodes.items()}
        if certs is None:
            certs = {
                node: Certificate(
                    serial=f"cert:{node}", subject=node,
                    issuer=node_ca.get(node, root_ca),
                    chain=(node_ca.get(node, root_ca), root_ca),
                )
                for node in segment_of
            }
        self.certs = certs
        self.serial_of = {n: c.serial for n, c in certs.items()}
        self.subject_of_serial = {c.serial: n for n, c in certs.items()}

        self.ca_known: dict[tuple[str, str], float] = {}
        self.states: dict[tuple[int, str], NodePkiState] = {}
        self.states_by_node: dict[str, list[NodePkiState]] = {}
        self.decisions: dict[int, tuple[bool, float, str]] = {}
        self.trace: list[tuple[float, str, str, str, str, str]] = []
        self.sent_counts: dict[str, int] = {}
        # ctx -> links traversed by the signed payload (detours included)
        self.leg_hops: dict[int, int] = {}
        # node -> sorted broadcast arrivals (arrival, issuer_ca, CRLDocument)
        self.broadcast_log: dict[str, list[tuple[float, str, CRLDocument]]] = {}

    # -- small helpers -----------------------------------------------------

    def state(self, ctx: int, node: str) -> NodePkiState:
        key = (ctx, node)
        st = self.states.get(key)
        if st is None:
            st = NodePkiState()
            self.states[key] = st
            self.states_by_node.setdefault(node, []).append(st)
        return st

    def ca_knows_revoked(self, ca: str, serial: str, now: float) -> bool:
        t = self.ca_known.get((ca, serial))
        return t is not None and now >= t

    def mark_revoked(self, ca: str, serial: str, t: float) -> None:
        if serial not in self.subject_of_serial:
            raise UnknownSerial(serial)
        prev = self.ca_known.get((ca, serial))
        if prev is None or t < prev:
            self.ca_known[(ca, serial)] = t

    def query_ca_of(self, node: str) -> str:
        if self.config.ca_model == "centralized":
            return self.root_ca
        return self.node_ca[node]

    def validator_ca_for(self, sender: str, recipient: str) -> str:
        if self.config.ca_model == "centralized":
            return self.root_ca
        return self.node_ca[recipient]

    def hybrid_ca_for(self, sender: str, recipient: str) -> str:
        ca = self.relay_ca_of_segment.get(self.segment_of[recipient])
        if ca is None:
            ca = self.relay_ca_of_segment.get(self.segment_of[sender])
        if ca is None:
            raise InvalidConfig(
                "ocsp-hybrid needs a relay CA reachable from "
                f"{sender} or {recipient}"
            )
        return ca

    def _log(self, time: float, msg: ProtocolMessage, decision: str) -> None:
        self.trace.append(
            (time, msg.kind, msg.src, msg.dst, msg.serial, decision)
        )

    # -- transport ---------------------------------------------------------

    def send(self, engine: Engine, msg: ProtocolMessage, t: float) -> None:
        """Route msg from its src and schedule delivery (or drop).

        With the firewall on, a forwarding check is scheduled at the
        departure time from each relay satellite hosting a CA; the message
        is dropped there if that CA knows the screened serial is revoked.
        """
        self.sent_counts[msg.kind] = self.sent_counts.get(msg.kind, 0) + 1
        plan = self.plan
        si = plan.index_of[msg.src]
        di = plan.index_of[msg.dst]
        result = plan.query_adaptive(si, di, t)
        path = plan.tree_path(si, di, t, result)
        if path is None:
            self._log(t, msg, "dropped-noroute")
            return
        arrival = path[-1][1]
        if msg.kind in (SIGNED, STAPLED, VALIDATOR_QUERY) and msg.ctx >= 0:
            if not plan.path_is_suspect(path, result[3]):
                hops = len(path) - 1
            else:
                hops = int(plan.min_hops(si, t)[di])
            self.leg_hops[msg.ctx] = self.leg_hops.get(msg.ctx, 0) + hops
        checks: list[tuple[float, str]] = []
        if self.config.firewall and msg.fw_serial is not None:
            for idx, arrive, depart in path[:-1]:
                node = plan.topo.nodes[idx]
                ca = self.ca_of_node.get(node.id)
                if node.kind == "relay" and ca is not None:
                    checks.append((depart, ca))
        if checks:
            engine.schedule(checks[0][0], msg.dst, (
                "fwcheck", msg, checks, 0, arrival))
        else:
            engine.schedule(arrival, msg.dst, ("deliver", msg))

    def handle_event(self, engine: Engine, event) -> None:
        tag = event.payload[0]
        if tag == "deliver":
            self.deliver(engine, event.payload[1], event.time)
        elif tag == "fwcheck":
            _, msg, checks, i, arrival = event.payload
            _, ca = checks[i]
            if self.ca_knows_revoked(ca, msg.fw_serial, event.time):
                self._log(event.time, msg, "dropped-firewall")
                return
            if i + 1 < len(checks):
                engine.schedule(checks[i + 1][0], msg.dst,
                                ("fwcheck", msg, checks, i + 1, arrival))
            else:
                engine.schedule(arrival, msg.dst, ("deliver", msg))
        elif tag == "bcast-arrive":
            _, node, ca, crl = event.payload
            self.broadcast_log.setdefault(node, []).append(
                (event.time, ca, crl))
            self._log(event.time, ProtocolMessage(
                CRL_BROADCAST, self.ca_nodes[ca], node, "-", -1), "")
            for st in self.states_by_node.get(node, []):
                self._resolve_pending(engine, st, node, event.time)
        else:
            raise MalformedMessage(f"unknown event tag {tag!r}")

    # -- protocol initiation ----------------------------------------------

    def initiate(self, engine: Engine, ctx: int, sender: str, recipient: str,
                 t: float) -> None:
        """Start the establishment flow for one signed message."""
        if sender == recipient:
            raise ValueError("sender and recipient must differ")
        serial = self.serial_of[sender]
        proto = self.config.protocol
        signed = ProtocolMessage(SIGNED, sender, recipient, serial, ctx,
                                 fw_serial=serial)
        if proto in (PLAIN, "ocsp", "crl", "crl-broadcast"):
            self.send(engine, signed, t)
        elif proto == "ocsp-stapling":
            self._initiate_stapled(engine, ctx, sender, recipient, t,
                                   self.query_ca_of(sender))
        elif proto == "ocsp-validator":
            self._initiate_validator(
                engine, ctx, sender, recipient, t,
                self.validator_ca_for(sender, recipient))
        elif proto == "ocsp-hybrid":
            if self.segment_of[sender] == self.segment_of[recipient]:
                self._initiate_stapled(engine, ctx, sender, recipient, t,
                                       self.query_ca_of(sender))
            else:
                self._initiate_validator(
                    engine, ctx, sender, recipient, t,
                    self.hybrid_ca_for(sender, recipient))
        else:
            raise InvalidConfig(f"unknown protocol {proto!r}")

    def _require_ca_node(self, ca: str, src: str, t: float) -> str:
        ca_node = self.ca_nodes[ca]
        if ca_node != src:
            si = self.plan.index_of[src]
            di = self.plan.index_of[ca_node]
            ea = self.plan.query_adaptive(si, di, t)[0]
            if math.isinf(ea[di]):
                raise NoReachableCA(f"no route from {src} to CA {ca} at t={t}")
        return ca_node

    def _initiate_stapled(self, engine: Engine, ctx: int, sender: str,
                          recipient: str, t: float, ca: str) -> None:
        serial = self.serial_of[sender]
        ca_node = self._require_ca_node(ca, sender, t)
        self.state(ctx, sender).awaiting_staple.setdefault(
            serial, []).append(recipient)
        query = ProtocolMessage(CERT_QUERY, sender, ca_node, serial, ctx)
        self.send(engine, query, t)

    def _initiate_validator(self, engine: Engine, ctx: int, sender: str,
                            recipient: str, t: float, ca: str) -> None:
        serial = self.serial_of[sender]
        ca_node = self._require_ca_node(ca, sender, t)
        inner = ProtocolMessage(SIGNED, sender, recipient, serial, ctx,
                                fw_serial=serial)
        query = ProtocolMessage(VALIDATOR_QUERY, sender, ca_node, serial, ctx,
                                inner=inner, final_dst=recipient,
                                fw_serial=serial)
        self.send(engine, query, t)

    # -- delivery handlers -------------------------------------------------

    def deliver(self, engine: Engine, msg: ProtocolMessage, now: float) -> None:
        handler = {
            SIGNED: self._on_signed,
            CERT_QUERY: self._on_cert_query,
            CERT_STATUS: self._on_cert_status,
            STAPLED: self._on_stapled,
            VALIDATOR_QUERY: self._on_validator_query,
            CRL_REQUEST: self._on_crl_request,
            CRL_DIRECT: self._on_crl_direct,
        }.get(msg.kind)
        if handler is None:
            raise MalformedMessage(f"undeliverable kind {msg.kind!r}")
        handler(engine, msg, now)

    def _decide(self, msg: ProtocolMessage, accept: bool, now: float,
                note: str = "") -> None:
        decision = "accept" if accept else "reject"
        self._log(now, msg, decision + (f"-{note}" if note else ""))
        if msg.ctx in self.decisions:
            raise MalformedMessage(
                f"second decision for context {msg.ctx}"
            )
        self.decisions[msg.ctx] = (accept, now, note)

    def _fresh_status(self, st: NodePkiState, serial: str,
                      now: float) -> Optional[CertStatus]:
        cached = st.status_cache.get(serial)
        if cached is not None and cached.fresh(now):
            return cached
        return None

    def _crl_for(self, st: NodePkiState, node: str, issuer: str,
                 now: float) -> Optional[CRLDocument]:
        """Freshest usable CRL from ``issuer`` visible to this context:
        the directly cached copy or the latest broadcast received."""
        best = st.crl_cache.get(issuer)
        for arrival, ca, crl in self.broadcast_log.get(node, []):
            if arrival > now or ca != issuer:
                continue
            if best is None or crl.issued_at > best.issued_at:
                best = crl
        if best is not None and best.fresh(now):
            return best
        return None

    def _any_fresh_crl_verdict(self, st: NodePkiState, node: str, serial: str,
                               now: float) -> Optional[bool]:
        """Broadcast-variant check: accept verdict against every unexpired
        CRL held; None when no unexpired CRL is available at all."""
        have = False
        docs = list(st.crl_cache.values()) \
            + [crl for a, _, crl in self.broadcast_log.get(node, [])
               if a <= now]
        for crl in docs:
            if crl.fresh(now):
                have = True
                if serial in crl.revoked:
                    return False
        return True if have else None

    def _on_signed(self, engine: Engine, msg: ProtocolMessage,
                   now: float) -> None:
        proto = self.config.protocol
        if proto == PLAIN:
            self._decide(msg, True, now)
            return
        st = self.state(msg.ctx, msg.dst)
        if proto == "ocsp":
            status = self._fresh_status(st, msg.serial, now)
            if status is not None:
                self._decide(msg, status.state == "good", now, "cached")
                return
            self._log(now, msg, "held")
            st.pending.append(msg)
            ca = self.query_ca_of(msg.dst)
            query = ProtocolMessage(CERT_QUERY, msg.dst,
                                    self.ca_nodes[ca], msg.serial, msg.ctx)
            self.send(engine, query, now)
        elif proto == "crl":
            issuer = self.certs[self.subject_of_serial[msg.serial]].issuer
            crl = self._crl_for(st, msg.dst, issuer, now)
            if crl is not None:
                self._decide(msg, msg.serial not in crl.revoked, now, "crl")
                return
            self._log(now, msg, "held")
            st.pending.append(msg)
            request = ProtocolMessage(CRL_REQUEST, msg.dst,
                                      self.ca_nodes[issuer], msg.serial,
                                      msg.ctx)
            self.send(engine, request, now)
        elif proto == "crl-broadcast":
            verdict = self._any_fresh_crl_verdict(st, msg.dst, msg.serial, now)
            if verdict is None:
                self._log(now, msg, "held")
                st.pending.append(msg)  # wait for the next broadcast
            else:
                self._decide(msg, verdict, now, "crl")
        else:
            raise MalformedMessage(
                f"bare SignedMessage under protocol {proto!r}"
            )

    def _on_cert_query(self, engine: Engine, msg: ProtocolMessage,
                       now: float) -> None:
        ca = self.ca_of_node.get(msg.dst)
        if ca is None:
            raise MalformedMessage(f"{msg.dst} is not a CA host")
        self._log(now, msg, "")
        revoked = self.ca_knows_revoked(ca, msg.serial, now)
        status = CertStatus(msg.serial, "revoked" if revoked else "good",
                            produced_at=now, ttl=self.config.status_ttl)
        if self.config.subscribe:
            self.state(msg.ctx, msg.dst).subscribers.setdefault(
                msg.serial, set()).add(msg.src)
        reply = ProtocolMessage(CERT_STATUS, msg.dst, msg.src, msg.serial,
                                msg.ctx, status=status)
        self.send(engine, reply, now)

    def _on_cert_status(self, engine: Engine, msg: ProtocolMessage,
                        now: float) -> None:
        if msg.status is None:
            raise MalformedMessage("CertificateStatusMessage without status")
        self._log(now, msg, "")
        st = self.state(msg.ctx, msg.dst)
        self._cache_status(st, msg.status)
        ca = self.ca_of_node.get(msg.dst)
        if ca is not None and msg.status.state == "revoked":
            # Inter-CA revocation notice: this CA is authoritative from now.
            self.mark_revoked(ca, msg.serial, now)
            if self.config.subscribe:
                for node in sorted(st.subscribers.get(msg.serial, ())):
                    push = ProtocolMessage(CERT_STATUS, msg.dst, node,
                                           msg.serial, msg.ctx,
                                           status=msg.status)
                    self.send(engine, push, now)
        waiting = st.awaiting_staple.pop(msg.serial, [])
        for recipient in waiting:
            inner = ProtocolMessage(SIGNED, msg.dst, recipient, msg.serial,
                                    msg.ctx, fw_serial=msg.serial)
            stapled = ProtocolMessage(STAPLED, msg.dst, recipient, msg.serial,
                                      msg.ctx, status=msg.status, inner=inner,
                                      fw_serial=msg.serial)
            self.send(engine, stapled, now)
        self._resolve_pending(engine, st, msg.dst, now)

    def _cache_status(self, st: NodePkiState, status: CertStatus) -> None:
        cached = st.status_cache.get(status.serial)
        if cached is not None and cached.state == "revoked":
            return  # revocation is terminal; a newer "good" cannot undo it
        if cached is None or status.produced_at >= cached.produced_at:
            st.status_cache[status.serial] = status

    def _on_stapled(self, engine: Engine, msg: ProtocolMessage,
                    now: float) -> None:
        if msg.inner is None or msg.status is None:
            raise MalformedMessage("StapledMessage must nest signed + status")
        st = self.state(msg.ctx, msg.dst)
        # A locally known revocation is terminal and beats any stapled
        # "good"; otherwise the newer of the embedded and cached statuses
        # wins.
        effective = msg.status
        cached = st.status_cache.get(msg.serial)
        if cached is not None and (
            cached.state == "revoked"
            or cached.produced_at > effective.produced_at
        ):
            effective = cached
        if not effective.fresh(now):
            self._decide(msg, False, now, "stale")
            return
        self._decide(msg, effective.state == "good", now)

    def _on_validator_query(self, engine: Engine, msg: ProtocolMessage,
                            now: float) -> None:
        ca = self.ca_of_node.get(msg.dst)
        if ca is None or msg.inner is None or msg.final_dst is None:
            raise MalformedMessage("ValidatorQueryMessage misrouted")
        self._log(now, msg, "")
        revoked = self.ca_knows_revoked(ca, msg.serial, now)
        status = CertStatus(msg.serial, "revoked" if revoked else "good",
                            produced_at=now, ttl=self.config.status_ttl)
        if self.config.subscribe:
            self.state(msg.ctx, msg.dst).subscribers.setdefault(
                msg.serial, set()).add(msg.final_dst)
        stapled = ProtocolMessage(STAPLED, msg.dst, msg.final_dst, msg.serial,
                                  msg.ctx, status=status, inner=msg.inner,
                                  fw_serial=msg.serial)
        self.send(engine, stapled, now)

    def _on_crl_request(self, engine: Engine, msg: ProtocolMessage,
                        now: float) -> None:
        ca = self.ca_of_node.get(msg.dst)
        if ca is None:
            raise MalformedMessage(f"{msg.dst} is not a CA host")
        self._log(now, msg, "")
        crl = self._issue_crl(ca, now)
        reply = ProtocolMessage(CRL_DIRECT, msg.dst, msg.src, msg.serial,
                                msg.ctx, crl=crl)
        self.send(engine, reply, now)

    def _issue_crl(self, ca: str, now: float) -> CRLDocument:
        revoked = frozenset(
            serial for (c, serial), t in self.ca_known.items()
            if c == ca and now >= t
        )
        return CRLDocument(issuer=ca, revoked=revoked, issued_at=now,
                           expiry=self.config.crl_expiry)

    def _on_crl_direct(self, engine: Engine, msg: ProtocolMessage,
                       now: float) -> None:
        if msg.crl is None:
            raise MalformedMessage("CRLDirectMessage without CRL")
        self._log(now, msg, "")
        st = self.state(msg.ctx, msg.dst)
        old = st.crl_cache.get(msg.crl.issuer)
        if old is None or msg.crl.issued_at >= old.issued_at:
            st.crl_cache[msg.crl.issuer] = msg.crl
        self._resolve_pending(engine, st, msg.dst, now)

    def _resolve_pending(self, engine: Engine, st: NodePkiState, node: str,
                         now: float) -> None:
        still: list[ProtocolMessage] = []
        for pending in st.pending:
            proto = self.config.protocol
            if proto == "ocsp":
                status = self._fresh_status(st, pending.serial, now)
                if status is None:
                    still.append(pending)
                    continue
                self._decide(pending, status.state == "good", now)
            elif proto == "crl":
                issuer = self.certs[
                    self.subject_of_serial[pending.serial]].issuer
                crl = self._crl_for(st, node, issuer, now)
                if crl is None:
                    still.append(pending)
                    continue
                self._decide(pending, pending.serial not in crl.revoked, now,
                             "crl")
            elif proto == "crl-broadcast":
                verdict = self._any_fresh_crl_verdict(
                    st, node, pending.serial, now)
                if verdict is None:
                    still.append(pending)
                    continue
                self._decide(pending, verdict, now, "crl")
            else:
                still.append(pending)
        st.pending = still

    # -- revocation entry points -------------------------------------------

    def revoke(self, engine: Engine, origin_ca: str, serial: str,
               t: float, ctx: int = 0) -> None:
        """Mark ``serial`` revoked at ``origin_ca`` and propagate.

        Distributed model: a revoked CertificateStatusMessage is routed to
        every other CA (relay CAs included); each becomes authoritative on
        receipt.  Centralized model: only the root CA's state changes.
        """
        if serial not in self.subject_of_serial:
            raise UnknownSerial(serial)
        self.mark_revoked(origin_ca, serial, t)
        if self.config.subscribe:
            origin_node = self.ca_nodes[origin_ca]
            st = self.state(ctx, origin_node)
            status = CertStatus(serial, "revoked", produced_at=t,
                                ttl=self.config.status_ttl)
            for node in sorted(st.subscribers.get(serial, ())):
                self.send(engine, ProtocolMessage(
                    CERT_STATUS, origin_node, node, serial, ctx,
                    status=status), t)
        if self.config.ca_model == "centralized":
            return
        origin_node = self.ca_nodes[origin_ca]
        status = CertStatus(serial, "revoked", produced_at=t,
                            ttl=self.config.status_ttl)
        for ca in sorted(self.ca_nodes):
            if ca == origin_ca:
                continue
            notice = ProtocolMessage(CERT_STATUS, origin_node,
                                     self.ca_nodes[ca], serial, ctx,
                                     status=status)
            self.send(engine, notice, t)

    def schedule_broadcasts(self, engine: Engine, recipients: list[str],
                            horizon: float, start: float = 0.0) -> None:
        """Schedule every CA's periodic CRL broadcasts to ``recipients``.

        Each broadcast is routed independently; arrival events append to
        the per-node broadcast log shared by all contexts.
        """
        interval = self.config.broadcast_interval
        plan = self.plan
        k = 0
        while True:
            issue = start + k * interval
            if issue > horizon:
                break
            for ca in sorted(self.ca_nodes):
                crl = self._issue_crl(ca, issue)
                src = plan.index_of[self.ca_nodes[ca]]
                ea = plan.query_all(src, issue)[0]
                for node in recipients:
                    if node == self.ca_nodes[ca]:
                        arrival = issue
                    else:
                        arrival = ea[plan.index_of[node]]
                        if math.isinf(arrival):
                            continue
                    engine.schedule(arrival, node,
                                    ("bcast-arrive", node, ca, crl))
            k += 1


def build_world(scenario, plan: ContactPlan, config: PkiConfig) -> PkiWorld:
    """Wire CA placement for a scenario.

    Distributed: one CA per segment at the segment's designated node, plus
    a CA at every relay satellite when the protocol or firewall needs one.
    Centralized: a single root CA at the designated node of the first
    segment with ground stations (the terrestrial root).
    """
    config.validate()
    segment_of = {n.id: n.segment for n in scenario.nodes}
    seg_anchor = {s: scenario.designated_node(s) for s in scenario.segments}
    root_segment = min(
        (s for s in scenario.segments
         if any(n.kind == "ground" for n in scenario.nodes_in_segment(s))),
        default=scenario.segments[0],
    )
    root_ca = "ca:root"
    ca_nodes: dict[str, str] = {}
    node_ca: dict[str, str] = {}
    relay_ca_of_segment: dict[str, str] = {}
    if config.ca_model == "centralized":
        ca_nodes[root_ca] = seg_anchor[root_segment]
        node_ca = {n.id: root_ca for n in scenario.nodes}
    else:
        for seg in scenario.segments:
            ca_nodes[f"ca:{seg}"] = seg_anchor[seg]
        for n in scenario.nodes:
            node_ca[n.id] = f"ca:{n.segment}"
        root_ca = f"ca:{root_segment}"
        if config.protocol == "ocsp-hybrid" or config.firewall:
            for relay in scenario.relay_nodes():
                ca = f"ca:relay:{relay}"
                ca_nodes[ca] = relay
                relay_ca_of_segment[segment_of[relay]] = ca
    return PkiWorld(
        plan, config,
        segment_of=segment_of,
        ca_nodes=ca_nodes,
        node_ca=node_ca,
        relay_ca_of_segment=relay_ca_of_segment,
        root_ca=root_ca,
    )
