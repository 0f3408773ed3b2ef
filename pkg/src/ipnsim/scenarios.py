"""Declarative scenario files and the built-in topologies.

Scenarios are YAML documents (see docs/scenario-format.md for the
grammar).  A file declares celestial bodies, node groups (ground stations,
constellations, relay satellites), and link rules between groups; loading
expands everything into a concrete node census with motion terms and a
candidate-link list ready for window computation.

Randomness (ground-station placement, the random LEO swarm) is consumed
only here, derived from the run seed plus a per-group salt, so the same
seed reproduces identical scenarios on any platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from . import astro
from .astro import Body, CircularOrbit, GroundStationSpec, InvalidSpec, WalkerSpec
from .topology import BodyGeom, CandidateLink, Node, Topology


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    pass


BUILTIN_SCENARIOS = {
    "earth-moon-mars": "earth-moon-mars.yaml",
    "earth-mars": "earth-mars.yaml",
    "earth-moon": "earth-moon.yaml",
    "iridium": "iridium.yaml",
    "starlink": "starlink.yaml",
    "cubesat": "cubesat.yaml",
    "leo-leo": "leo-leo.yaml",
    "leo-meo": "leo-meo.yaml",
    "leo-geo": "leo-geo.yaml",
    "leo-meo-geo": "leo-meo-geo.yaml",
}


def list_scenarios() -> list[str]:
    return sorted(BUILTIN_SCENARIOS)


# -- file loading ----------------------------------------------------------


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, val in override.items():
        if key in out and isinstance(out[key], dict) and isinstance(val, dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = val
    return out


def _read_yaml(path: Path) -> dict:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be a mapping")
    merged: dict = {}
    for inc in doc.pop("include", []) or []:
        merged = _deep_merge(merged, _read_yaml(path.parent / inc))
    return _deep_merge(merged, doc)


def _scenario_path(source: str) -> Path:
    if source in BUILTIN_SCENARIOS:
        base = resources.files("ipnsim") / "data" / "scenarios"
        return Path(str(base / BUILTIN_SCENARIOS[source]))
    path = Path(source)
    if not path.exists():
        raise ValidationError(
            f"unknown scenario {source!r} (not a builtin, not a file)"
        )
    return path


# -- expansion -------------------------------------------------------------


def _build_bodies(cfg: dict) -> dict[str, Body]:
    bodies: dict[str, Body] = {}
    pending = dict(cfg)
    while pending:
        progressed = False
        for name in list(pending):
            bc = pending[name]
            parent_name = bc.get("parent")
            if parent_name is not None and parent_name not in bodies:
                if parent_name not in cfg:
                    raise ValidationError(
                        f"body {name}: undefined parent {parent_name!r}"
                    )
                continue
            orbit = None
            if "orbit" in bc:
                oc = bc["orbit"]
                orbit = CircularOrbit(
                    a=float(oc["a"]),
                    inclination=math.radians(oc.get("inclination_deg", 0.0)),
                    raan=math.radians(oc.get("raan_deg", 0.0)),
                    phase=math.radians(oc.get("phase_deg", 0.0)),
                    period=oc.get("period"),
                )
            rotation_period = bc.get("rotation_period")
            rotation_phase = math.radians(bc.get("rotation_phase_deg", 0.0))
            if bc.get("tidally_locked"):
                if orbit is None:
                    raise ValidationError(
                        f"body {name}: tidally_locked requires an orbit"
                    )
                rotation_period = orbit.resolved_period(
                    bodies[parent_name].mu
                )
                rotation_phase = orbit.phase + math.pi
            bodies[name] = Body(
                name=name,
                radius=float(bc["radius"]),
                mu=float(bc["mu"]),
                parent=bodies.get(parent_name) if parent_name else None,
                orbit=orbit,
                rotation_period=rotation_period,
                rotation_phase=rotation_phase,
            )
            del pending[name]
            progressed = True
        if not progressed:
            raise ValidationError(
                f"body parent cycle among {sorted(pending)}"
            )
    return bodies


def _placement_coords(placement: dict, seed: int) -> list[tuple[float, float]]:
    mode = placement.get("mode", "uniform-sphere")
    if mode == "coordinates":
        coords = placement.get("coordinates_deg")
        if not coords:
            raise ValidationError("coordinates placement needs coordinates_deg")
        count = placement.get("count", len(coords))
        if count != len(coords):
            raise ValidationError(
                f"placement declares {count} stations but lists "
                f"{len(coords)} coordinates"
            )
        return [(math.radians(lat), math.radians(lon)) for lat, lon in coords]
    if mode == "uniform-sphere":
        count = int(placement["count"])
        salt = int(placement.get("seed_salt", 0))
        rng = np.random.default_rng([seed, salt])
        u = rng.random(count)
        v = rng.random(count)
        return [
            (math.asin(2.0 * ui - 1.0), -math.pi + 2.0 * math.pi * vi)
            for ui, vi in zip(u, v)
        ]
    raise ValidationError(f"unknown placement mode {mode!r}")


def _walker_meta(spec: WalkerSpec) -> list[dict]:
    per_plane = spec.total // spec.planes
    return [
        {"plane": p, "slot": s, "planes": spec.planes, "per_plane": per_plane,
         "pattern": spec.pattern}
        for p in range(spec.planes)
        for s in range(per_plane)
    ]


@dataclass
class Group:
    name: str
    kind: str
    body: str
    segment: str
    node_ids: list[str]
    relay_capable: bool = False


@dataclass
class Scenario:
    """A fully expanded scenario: nodes with motion terms, candidate links,
    and the segment structure the PKI layer builds on."""

    name: str
    bodies: dict[str, Body]
    nodes: list[Node]
    candidates: list[CandidateLink]
    groups: dict[str, Group]
    dt: float
    horizon: float
    seed: int

    def __post_init__(self) -> None:
        self.index_of = {n.id: i for i, n in enumerate(self.nodes)}

    @property
    def segments(self) -> list[str]:
        return sorted({n.segment for n in self.nodes})

    def nodes_in_segment(self, segment: str) -> list[Node]:
        return [n for n in self.nodes if n.segment == segment]

    def is_relay(self, node: Node) -> bool:
        return node.kind == "relay" or bool(node.meta.get("relay_capable"))

    def establishment_endpoints(self) -> list[str]:
        """Ground, non-relay nodes: the endpoints of the connection-
        establishment study (ground stations talk via satellites; relays
        and relay-capable stations carry traffic rather than originate it)."""
        return [n.id for n in self.nodes
                if n.kind == "ground" and not self.is_relay(n)]

    def designated_node(self, segment: str) -> str:
        """Deterministic per-segment anchor (first non-relay ground node in
        id order; first node overall for all-satellite segments).  CA
        placement uses this."""
        ground = [n.id for n in self.nodes_in_segment(segment)
                  if n.kind == "ground" and not self.is_relay(n)]
        if ground:
            return min(ground)
        others = [n.id for n in self.nodes_in_segment(segment)
                  if n.kind != "relay"]
        if not others:
            raise ValidationError(f"segment {segment} has no CA-eligible node")
        return min(others)

    def relay_nodes(self) -> list[str]:
        return [n.id for n in self.nodes if n.kind == "relay"]

    def body_geoms(self, epoch_offset: float = 0.0) -> list[BodyGeom]:
        return [
            (b.name, b.radius,
             astro.shift_epoch(astro.body_terms(b), epoch_offset))
            for b in self.bodies.values()
        ]

    def build_topology(self, epoch_offset: float = 0.0) -> Topology:
        nodes = [
            Node(id=n.id, kind=n.kind, body=n.body, segment=n.segment,
                 terms=astro.shift_epoch(n.terms, epoch_offset),
                 min_elevation_deg=n.min_elevation_deg, meta=n.meta)
            for n in self.nodes
        ]
        return Topology(nodes, self.body_geoms(epoch_offset),
                        self.candidates, self.dt, self.horizon)


def _expand_group(gc: dict, bodies: dict[str, Body], seed: int
                  ) -> tuple[Group, list[Node]]:
    name = gc["name"]
    kind = gc["kind"]
    body_name = gc["body"]
    if body_name not in bodies:
        raise ValidationError(f"group {name}: undefined body {body_name!r}")
    body = bodies[body_name]
    segment = gc.get("segment", body_name)
    min_el = float(gc.get("min_elevation_deg", 0.0))
    relay_capable = bool(gc.get("relay_capable", False))
    nodes: list[Node] = []

    def sat_node(i: int, width: int, orbit: CircularOrbit, meta: dict,
                 node_kind: str = "satellite") -> Node:
        terms = astro.satellite_terms(body, orbit)
        return Node(id=f"{name}-{i:0{width}d}", kind=node_kind,
                    body=body_name, segment=segment, terms=terms, meta=meta)

    if kind == "ground":
        coords = _placement_coords(gc["placement"], seed)
        width = max(3, len(str(len(coords) - 1)))
        for i, (lat, lon) in enumerate(coords):
            spec = GroundStationSpec(body, lat, lon, min_el)
            nodes.append(Node(
                id=f"{name}-{i:0{width}d}", kind="ground", body=body_name,
                segment=segment, terms=astro.ground_station_terms(spec),
                min_elevation_deg=min_el,
                meta={"relay_capable": relay_capable} if relay_capable else {},
            ))
    elif kind == "satellite":
        if "walker" in gc:
            wc = gc["walker"]
            spec = WalkerSpec(
                total=int(wc["total"]), planes=int(wc["planes"]),
                phasing=int(wc["phasing"]),
                altitude=float(wc["altitude_km"]),
                inclination=math.radians(wc["inclination_deg"]),
                pattern=wc.get("pattern", "delta"),
            )
            orbits = astro.generate_walker(spec, body)
            metas = _walker_meta(spec)
            width = max(3, len(str(len(orbits) - 1)))
            for i, (orbit, meta) in enumerate(zip(orbits, metas)):
                nodes.append(sat_node(i, width, orbit, meta))
        elif "random_leo" in gc:
            rc = gc["random_leo"]
            count = int(rc["count"])
            alt_lo, alt_hi = rc["altitude_km"]
            inc_lo, inc_hi = rc["inclination_deg"]
            rng = np.random.default_rng([seed, int(rc.get("seed_salt", 0))])
            width = max(3, len(str(count - 1)))
            for i in range(count):
                orbit = CircularOrbit(
                    a=body.radius + rng.uniform(alt_lo, alt_hi),
                    inclination=math.radians(rng.uniform(inc_lo, inc_hi)),
                    raan=rng.uniform(0.0, 2.0 * math.pi),
                    phase=rng.uniform(0.0, 2.0 * math.pi),
                )
                nodes.append(sat_node(i, width, orbit, {}))
        elif "slots" in gc:
            sc = gc["slots"]
            count = int(sc["count"])
            width = max(3, len(str(count - 1)))
            for i in range(count):
                orbit = CircularOrbit(
                    a=body.radius + float(sc["altitude_km"]),
                    inclination=math.radians(sc.get("inclination_deg", 0.0)),
                    phase=2.0 * math.pi * i / count,
                )
                nodes.append(sat_node(i, width, orbit, {}))
        else:
            raise ValidationError(
                f"group {name}: satellite group needs walker/random_leo/slots"
            )
    elif kind == "relay":
        oc = gc["orbit"]
        period = float(oc["period"])
        a = astro.kepler_semi_major_axis(period, body.mu)
        orientation = oc.get("orientation", "equatorial")
        if orientation == "equatorial":
            inclination, raan = 0.0, 0.0
        elif orientation == "parent-line-normal":
            # Orbit plane normal to the ecliptic, containing the direction
            # from the parent body at epoch: occlusion transitions then
            # recur at the orbital (not synodic) period to first order.
            if body.orbit is None:
                raise ValidationError(
                    f"group {name}: parent-line-normal needs an orbiting body"
                )
            inclination, raan = math.pi / 2.0, body.orbit.phase
        else:
            raise ValidationError(
                f"group {name}: unknown orientation {orientation!r}"
            )
        orbit = CircularOrbit(a=a, inclination=inclination, raan=raan,
                              phase=math.radians(oc.get("phase_deg", 0.0)),
                              period=period)
        nodes.append(Node(
            id=name, kind="relay", body=body_name, segment=segment,
            terms=astro.satellite_terms(body, orbit), meta={},
        ))
    else:
        raise ValidationError(f"group {name}: unknown kind {kind!r}")

    group = Group(name=name, kind=kind, body=body_name, segment=segment,
                  node_ids=[n.id for n in nodes], relay_capable=relay_capable)
    return group, nodes


def _walker_grid_pairs(group: Group, nodes_by_id: dict[str, Node]
                       ) -> list[tuple[str, str]]:
    """Inter-satellite links for a Walker group: ring links within each
    plane plus same-slot links to the next plane (wrapping between the
    first and last planes only for delta patterns, where they co-rotate)."""
    first = nodes_by_id[group.node_ids[0]].meta
    planes, per_plane = first["planes"], first["per_plane"]
    pattern = first["pattern"]

    def nid(p: int, s: int) -> str:
        return group.node_ids[p * per_plane + s]

    pairs = []
    for p in range(planes):
        if per_plane > 1:
            for s in range(per_plane):
                if per_plane == 2 and s == 1:
                    break  # avoid duplicating the single ring link
                pairs.append((nid(p, s), nid(p, (s + 1) % per_plane)))
        last = planes if pattern == "delta" else planes - 1
        if p < last and planes > 1:
            for s in range(per_plane):
                pairs.append((nid(p, s), nid((p + 1) % planes, s)))
    return pairs


def _expand_links(cfg_links: list[dict], groups: dict[str, Group],
                  nodes_by_id: dict[str, Node],
                  index_of: dict[str, int]) -> list[CandidateLink]:
    seen: set[tuple[int, int]] = set()
    out: list[CandidateLink] = []

    def add(id_a: str, id_b: str, max_range: float,
            min_el: Optional[float]) -> None:
        a, b = index_of[id_a], index_of[id_b]
        if a == b:
            return
        key = (min(a, b), max(a, b))
        if key in seen:
            return
        seen.add(key)
        out.append(CandidateLink(key[0], key[1], max_range, min_el))

    for lc in cfg_links:
        max_range = float(lc["max_range_km"]) if "max_range_km" in lc \
            else math.inf
        min_el = lc.get("min_elevation_deg")
        if min_el is not None:
            min_el = float(min_el)
        if "within" in lc:
            group = groups.get(lc["within"])
            if group is None:
                raise ValidationError(f"link rule: unknown group {lc['within']!r}")
            ltype = lc.get("type", "all")
            if ltype == "walker-grid":
                for ida, idb in _walker_grid_pairs(group, nodes_by_id):
                    add(ida, idb, max_range, min_el)
            elif ltype == "all":
                ids = group.node_ids
                for i in range(len(ids)):
                    for j in range(i + 1, len(ids)):
                        add(ids[i], ids[j], max_range, min_el)
            else:
                raise ValidationError(f"link rule: unknown type {ltype!r}")
        elif "between" in lc:
            ga, gb = lc["between"]
            for gname in (ga, gb):
                if gname not in groups:
                    raise ValidationError(f"link rule: unknown group {gname!r}")
            for ida in groups[ga].node_ids:
                for idb in groups[gb].node_ids:
                    add(ida, idb, max_range, min_el)
        else:
            raise ValidationError(
                "link rule needs a 'within' or 'between' key"
            )
    return out


def load_scenario(source: str, seed: int = 0) -> Scenario:
    """Load a builtin scenario by name or a YAML file by path and expand
    it into a concrete node census."""
    path = _scenario_path(source)
    cfg = _read_yaml(path)
    for key in ("name", "bodies", "groups", "links"):
        if key not in cfg:
            raise ValidationError(f"{path}: missing required key {key!r}")
    bodies = _build_bodies(cfg["bodies"])
    groups: dict[str, Group] = {}
    all_nodes: list[Node] = []
    for gc in cfg["groups"]:
        group, nodes = _expand_group(gc, bodies, seed)
        if group.name in groups:
            raise ValidationError(f"duplicate group name {group.name!r}")
        groups[group.name] = group
        all_nodes.extend(nodes)
    all_nodes.sort(key=lambda n: n.id)
    index_of = {n.id: i for i, n in enumerate(all_nodes)}
    if len(index_of) != len(all_nodes):
        raise ValidationError("duplicate node ids after expansion")
    nodes_by_id = {n.id: n for n in all_nodes}
    candidates = _expand_links(cfg["links"], groups, nodes_by_id, index_of)

    expect = cfg.get("expect_counts", {})
    for gname, count in expect.items():
        actual = len(groups[gname].node_ids) if gname in groups else -1
        if actual != count:
            raise ValidationError(
                f"group {gname}: expected {count} nodes, expanded {actual}"
            )

    return Scenario(
        name=cfg["name"],
        bodies=bodies,
        nodes=all_nodes,
        candidates=candidates,
        groups=groups,
        dt=float(cfg.get("dt", 10.0)),
        horizon=float(cfg.get("horizon", 14400.0)),
        seed=seed,
    )
