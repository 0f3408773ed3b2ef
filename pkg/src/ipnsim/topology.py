"""Dynamic link computation and network partition tracking.

Connectivity is evaluated on a fixed time grid (default 10 s) and treated
as piecewise-constant between grid points.  A link between two nodes is up
at a grid point when every constraint holds there:

* maximum range (when the candidate link carries one),
* minimum elevation at each ground endpoint,
* clear line of sight past every body, skipping a body's own occlusion
  test for ground endpoints hosted on it (the elevation rule governs those).

Which node pairs are even candidates (inter-satellite links, ground-to-
satellite, relay links) is decided by the scenario builder; this module
only evaluates geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import astro
from .astro import Term

# Body geometry as the topology consumes it: (name, radius_km, motion terms).
BodyGeom = tuple[str, float, list[Term]]


class UnknownNode(KeyError):
    pass


class DegeneratePosition(ValueError):
    pass


@dataclass
class Node:
    """A network participant: ground station, satellite, or relay satellite."""

    id: str
    kind: str  # "ground" | "satellite" | "relay"
    body: str  # host body name (orbited body for satellites)
    segment: str
    terms: list[Term]
    min_elevation_deg: float = 0.0
    meta: dict = field(default_factory=dict)

    def position(self, t: float) -> tuple[float, float, float]:
        return astro.eval_terms(self.terms, t)


@dataclass(frozen=True)
class CandidateLink:
    """An allowed node pair, subject to the geometric checks."""

    a: int
    b: int
    max_range: float = math.inf
    # Overrides the ground node's own minimum elevation (antenna-specific
    # constraints, e.g. a ground station talking to different constellations).
    min_elevation_deg: Optional[float] = None


@dataclass
class AdjacencySnapshot:
    time: float
    links: list[tuple[int, int, float]]  # (a, b, distance_km) with a < b


@dataclass
class SegmentPartition:
    time: float
    component_of: list[int]
    component_segments: dict[int, list[str]]

    @property
    def component_count(self) -> int:
        return len(self.component_segments)


def elevation_angle(
    ground: tuple[float, float, float],
    sat: tuple[float, float, float],
    body_center: tuple[float, float, float],
) -> float:
    """Elevation of ``sat`` above the local horizon at ``ground``, degrees."""
    gx = ground[0] - body_center[0]
    gy = ground[1] - body_center[1]
    gz = ground[2] - body_center[2]
    sx = sat[0] - ground[0]
    sy = sat[1] - ground[1]
    sz = sat[2] - ground[2]
    gn = math.sqrt(gx * gx + gy * gy + gz * gz)
    sn = math.sqrt(sx * sx + sy * sy + sz * sz)
    if sn == 0.0:
        raise DegeneratePosition("satellite coincides with ground station")
    dot = (gx * sx + gy * sy + gz * sz) / (gn * sn)
    return math.degrees(math.asin(max(-1.0, min(1.0, dot))))


def line_of_sight(
    p1: tuple[float, float, float],
    p2: tuple[float, float, float],
    bodies: Iterable[tuple[tuple[float, float, float], float]],
) -> bool:
    """True iff the open segment p1-p2 clears every (center, radius) body."""
    dx = p2[0] - p1[0]
    dy = p2[1] - p1[1]
    dz = p2[2] - p1[2]
    dd = dx * dx + dy * dy + dz * dz
    if dd == 0.0:
        raise DegeneratePosition("identical endpoints")
    for center, radius in bodies:
        fx = center[0] - p1[0]
        fy = center[1] - p1[1]
        fz = center[2] - p1[2]
        tpar = (fx * dx + fy * dy + fz * dz) / dd
        if tpar <= 0.0 or tpar >= 1.0:
            continue
        cx = fx - tpar * dx
        cy = fy - tpar * dy
        cz = fz - tpar * dz
        if cx * cx + cy * cy + cz * cz < radius * radius:
            return False
    return True


class Topology:
    """Precomputed link windows for a node set over [0, horizon].

    ``grid_up[k]`` is a boolean vector over grid points for candidate link
    k; ``next_up[k][w]`` is the first grid index >= w where the link is up
    (-1 when it never comes up again).
    """

    def __init__(
        self,
        nodes: list[Node],
        bodies: list[BodyGeom],
        candidates: list[CandidateLink],
        dt: float,
        horizon: float,
    ):
        if dt <= 0 or horizon <= 0:
            raise ValueError("dt and horizon must be positive")
        self.nodes = nodes
        self.bodies = bodies
        self.candidates = candidates
        self.dt = dt
        self.horizon = horizon
        self.index_of = {n.id: i for i, n in enumerate(nodes)}
        if len(self.index_of) != len(nodes):
            raise ValueError("duplicate node ids")
        self.n_grid = int(math.floor(horizon / dt)) + 1
        self.times = dt * np.arange(self.n_grid)
        self._compute_windows()

    def node_index(self, node_id: str) -> int:
        try:
            return self.index_of[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def position_of(self, node_id: str, t: float) -> tuple[float, float, float]:
        """Position at scenario time ``t`` (epoch offsets are baked into terms)."""
        return astro.eval_terms(self.nodes[self.node_index(node_id)].terms, t)

    def _compute_windows(self, chunk: int = 512) -> None:
        times = self.times
        n_pairs = len(self.candidates)
        n_bodies = len(self.bodies)
        node_pos = np.stack(
            [astro.eval_terms_grid(n.terms, times) for n in self.nodes]
        )  # (N, W, 3)
        body_pos = np.stack(
            [astro.eval_terms_grid(terms, times) for _, _, terms in self.bodies]
        ) if n_bodies else np.zeros((0, self.n_grid, 3))
        body_radius = np.array([r for _, r, _ in self.bodies])
        body_index = {name: i for i, (name, _, _) in enumerate(self.bodies)}

        # Per-candidate constraint tables for the vectorized sweep below.
        ia = np.array([c.a for c in self.candidates], dtype=np.intp)
        ib = np.array([c.b for c in self.candidates], dtype=np.intp)
        max_r2 = np.array([
            c.max_range * c.max_range if math.isfinite(c.max_range) else np.inf
            for c in self.candidates
        ])
        skip = np.zeros((n_pairs, n_bodies), dtype=bool)
        # gbody[k, side] = host-body index when that endpoint is a ground
        # station (its occlusion test is skipped; elevation governs), else -1.
        gbody = np.full((n_pairs, 2), -1, dtype=np.intp)
        sin_min = np.zeros((n_pairs, 2))
        for k, cand in enumerate(self.candidates):
            for side, node in enumerate((self.nodes[cand.a], self.nodes[cand.b])):
                if node.kind == "ground":
                    bi = body_index[node.body]
                    skip[k, bi] = True
                    gbody[k, side] = bi
                    min_el = (cand.min_elevation_deg
                              if cand.min_elevation_deg is not None
                              else node.min_elevation_deg)
                    sin_min[k, side] = math.sin(math.radians(min_el))

        self.grid_up = np.zeros((n_pairs, self.n_grid), dtype=bool)
        for lo in range(0, n_pairs, chunk):
            hi = min(lo + chunk, n_pairs)
            pa = node_pos[ia[lo:hi]]  # (C, W, 3)
            pb = node_pos[ib[lo:hi]]
            seg = pb - pa
            dd = np.einsum("cwj,cwj->cw", seg, seg)
            up = dd <= max_r2[lo:hi, None]
            for bi in range(n_bodies):
                f = body_pos[bi][None, :, :] - pa
                tpar = np.einsum("cwj,cwj->cw", f, seg) / dd
                closest = f - tpar[..., None] * seg
                c2 = np.einsum("cwj,cwj->cw", closest, closest)
                blocked = (tpar > 0.0) & (tpar < 1.0) \
                    & (c2 < body_radius[bi] ** 2)
                blocked &= ~skip[lo:hi, bi, None]
                up &= ~blocked
            for side, (gp, sp) in enumerate(((pa, pb), (pb, pa))):
                mask = gbody[lo:hi, side] >= 0
                if not mask.any():
                    continue
                centers = body_pos[np.maximum(gbody[lo:hi, side], 0)]
                zen = gp - centers
                rel = sp - gp
                dot = np.einsum("cwj,cwj->cw", zen, rel)
                norms = (np.linalg.norm(zen, axis=2)
                         * np.linalg.norm(rel, axis=2))
                with np.errstate(invalid="ignore", divide="ignore"):
                    sin_el = np.clip(dot / norms, -1.0, 1.0)
                ok = sin_el >= sin_min[lo:hi, side, None]
                up &= np.where(mask[:, None], ok, True)
            self.grid_up[lo:hi] = up

        # next_up[k][w]: first grid index >= w with the link up, else -1.
        idx = np.arange(self.n_grid, dtype=np.int32)
        nxt = np.where(self.grid_up, idx[None, :], np.int32(-1))
        for w in range(self.n_grid - 2, -1, -1):
            col = nxt[:, w]
            np.copyto(col, nxt[:, w + 1], where=col < 0)
        self.next_up = np.ascontiguousarray(nxt, dtype=np.int32)

    def grid_index(self, t: float) -> int:
        w = int(math.floor(t / self.dt))
        return min(max(w, 0), self.n_grid - 1)

    def links_at(self, t: float) -> AdjacencySnapshot:
        w = self.grid_index(t)
        links = []
        for k, cand in enumerate(self.candidates):
            if self.grid_up[k, w]:
                pa = self.position_of(self.nodes[cand.a].id, t)
                pb = self.position_of(self.nodes[cand.b].id, t)
                d = math.dist(pa, pb)
                a, b = sorted((cand.a, cand.b))
                links.append((a, b, d))
        return AdjacencySnapshot(time=t, links=links)

    def partition_at(self, t: float) -> SegmentPartition:
        w = self.grid_index(t)
        parent = list(range(len(self.nodes)))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for k, cand in enumerate(self.candidates):
            if self.grid_up[k, w]:
                ra, rb = find(cand.a), find(cand.b)
                if ra != rb:
                    parent[rb] = ra
        component_of = [find(i) for i in range(len(self.nodes))]
        segments: dict[int, list[str]] = {}
        for i, comp in enumerate(component_of):
            segments.setdefault(comp, []).append(self.nodes[i].segment)
        return SegmentPartition(t, component_of, segments)

    def dump_contacts(self, path: str, node_filter: Optional[set[str]] = None,
                      stride: int = 1) -> None:
        """Write per-grid-point link rows: time,node_a,node_b,distance_km."""
        with open(path, "w") as fh:
            fh.write("time,node_a,node_b,distance_km\n")
            for w in range(0, self.n_grid, stride):
                t = float(self.times[w])
                for k, cand in enumerate(self.candidates):
                    na, nb = self.nodes[cand.a], self.nodes[cand.b]
                    if node_filter is not None and not (
                        na.id in node_filter or nb.id in node_filter
                    ):
                        continue
                    if not self.grid_up[k, w]:
                        continue
                    d = math.dist(
                        astro.eval_terms(na.terms, t),
                        astro.eval_terms(nb.terms, t),
                    )
                    fh.write(f"{t:.6f},{na.id},{nb.id},{d:.6f}\n")
