"""Oracle earliest-arrival routing over precomputed contact windows.

A message departs a node on a link only while the link is up (piecewise-
constant on the topology grid); it may wait at any node for a future
window (store-and-forward).  Flight time per link is the Euclidean
distance at the departure instant divided by c.

Tie-breaking among routes with equal arrival time: fewer hops first, then
the lexicographically smallest node-id sequence.  The fast path is a
single Dijkstra pass that also flags nodes where a bit-identical arrival
was reachable via a different parent (or where the message waited); only
flagged queries fall back to the exact tie-break procedure:

1. Dijkstra gives the optimal arrival T* (always exact).
2. A synchronous hop-bounded relaxation gives the minimum hop count H
   among T*-optimal paths (arithmetic shared with Dijkstra, so arrival
   comparisons are bitwise).
3. The lexicographically smallest H-hop path is grown greedily, testing
   each candidate next node with a memoized bounded feasibility search.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _core
from .astro import C_LIGHT
from .topology import Topology

# Generous bound on how fast any scenario node moves (km/s); used only to
# turn straight-line distance into a safe lower bound on delivery time.
MAX_NODE_SPEED = 60.0


@dataclass
class Route:
    """A timed path: (node_id, arrive, depart) per hop, first arrive = send
    time, last depart = last arrive."""

    hops: list[tuple[str, float, float]]
    latency: float

    @property
    def hop_count(self) -> int:
        return len(self.hops) - 1

    @property
    def arrival(self) -> float:
        return self.hops[-1][1]

    @property
    def nodes(self) -> list[str]:
        return [h[0] for h in self.hops]


class ContactPlan:
    """Flat-array view of a Topology consumed by the routing kernels.

    Query results (full earliest-arrival trees, hop tables) are cached per
    (source, send time); the plan is immutable so caches never invalidate.
    """

    def __init__(self, topo: Topology):
        self.topo = topo
        self.dt = topo.dt
        self.horizon = topo.horizon
        self.n_grid = topo.n_grid
        self.n_nodes = len(topo.nodes)
        self.ids = [n.id for n in topo.nodes]
        self.index_of = topo.index_of

        rows = []
        offs = [0]
        for node in topo.nodes:
            rows.extend(node.terms)
            offs.append(len(rows))
        self.term_data = np.asarray(rows, dtype=np.float64).reshape(-1, 11)
        self.term_off = np.asarray(offs, dtype=np.int32)

        neigh: list[list[tuple[int, int]]] = [[] for _ in range(self.n_nodes)]
        for k, cand in enumerate(topo.candidates):
            neigh[cand.a].append((cand.b, k))
            neigh[cand.b].append((cand.a, k))
        adj_off = [0]
        adj_node: list[int] = []
        adj_pair: list[int] = []
        for u in range(self.n_nodes):
            for v, k in sorted(neigh[u]):
                adj_node.append(v)
                adj_pair.append(k)
            adj_off.append(len(adj_node))
        self.adj_off = np.asarray(adj_off, dtype=np.int32)
        self.adj_node = np.asarray(adj_node, dtype=np.int32)
        self.adj_pair = np.asarray(adj_pair, dtype=np.int32)
        self.grid_up = np.ascontiguousarray(topo.grid_up, dtype=np.uint8)
        self.next_up = np.ascontiguousarray(topo.next_up, dtype=np.int32)

        self._tree_cache: dict[tuple[int, float], tuple] = {}
        self._hops_cache: dict[tuple[int, float], np.ndarray] = {}
        self._adaptive_seen: set[tuple[int, float]] = set()

    # -- kernel wrappers ---------------------------------------------------

    def _kernel_args(self):
        return (self.term_data, self.term_off, self.adj_off, self.adj_node,
                self.adj_pair, self.grid_up, self.next_up, self.dt,
                self.n_grid, self.horizon)

    def hop(self, u: int, v: int, pair: int, a: float) -> tuple[float, float]:
        """Earliest (depart, arrive) leaving node u for v at/after time a."""
        return _core.hop_time(self.term_data, self.term_off, self.grid_up,
                              self.next_up, self.dt, self.n_grid, u, v, pair, a)

    def query_all(self, src: int, t_send: float):
        """Cached full earliest-arrival tree: (ea, pred, depart, eq_flag)."""
        key = (src, t_send)
        res = self._tree_cache.get(key)
        if res is None:
            res = _core.dijkstra(*self._kernel_args(), src, t_send)
            self._tree_cache[key] = res
        return res

    def query_one(self, src: int, dst: int, t_send: float):
        """Uncached earliest-arrival search that stops once dst settles."""
        return _core.dijkstra(*self._kernel_args(), src, t_send, dst)

    def query_adaptive(self, src: int, dst: int, t_send: float):
        """Like query_one, but a repeated (src, t_send) upgrades to the
        cached full tree so bulk sends from one node at one instant share a
        single search."""
        key = (src, t_send)
        res = self._tree_cache.get(key)
        if res is not None:
            return res
        if key in self._adaptive_seen:
            return self.query_all(src, t_send)
        self._adaptive_seen.add(key)
        return self.query_one(src, dst, t_send)

    def min_hops(self, src: int, t_send: float) -> np.ndarray:
        """Minimum hops among arrival-optimal paths, per destination.

        Validated against the Dijkstra arrivals bit-for-bit (the two
        kernels share their hop arithmetic, so any difference is a bug).
        """
        key = (src, t_send)
        mh = self._hops_cache.get(key)
        if mh is None:
            dp, mh = _core.bellman_hops(*self._kernel_args(), src, t_send)
            ea = self.query_all(src, t_send)[0]
            for v in range(self.n_nodes):
                if dp[v] != ea[v] and not (
                    math.isinf(dp[v]) and math.isinf(ea[v])
                ):
                    raise RuntimeError(
                        f"hop-bounded relaxation disagrees with Dijkstra at "
                        f"node {self.ids[v]}: {dp[v]} vs {ea[v]}"
                    )
            mh = np.asarray(mh, dtype=np.int32)
            self._hops_cache[key] = mh
        return mh

    # -- tree-path helpers -------------------------------------------------

    def tree_path(self, src: int, dst: int, t_send: float,
                  result=None) -> Optional[list[tuple[int, float, float]]]:
        """(node, arrive, depart) chain from a Dijkstra tree; None if dropped.

        The chain is arrival-optimal but not tie-broken; use
        ``earliest_arrival`` where the exact node sequence matters.
        """
        ea, pred, dep, _ = result if result is not None else \
            self.query_all(src, t_send)
        if math.isinf(ea[dst]):
            return None
        chain = [dst]
        while chain[-1] != src:
            p = pred[chain[-1]]
            if p < 0:
                return None
            chain.append(p)
        chain.reverse()
        out = []
        for i, v in enumerate(chain):
            arrive = ea[v]
            depart = dep[chain[i + 1]] if i + 1 < len(chain) else ea[v]
            out.append((v, arrive, depart))
        return out

    def path_is_suspect(self, path: list[tuple[int, float, float]],
                        eq_flag) -> bool:
        """True when the tree path may not be the tie-broken optimum:
        some node carries an equal-arrival flag, or the message waited."""
        for v, arrive, depart in path:
            if eq_flag[v]:
                return True
            if depart > arrive:
                return True
        return False

    def hops_metric(self, src: int, dst: int, t_send: float) -> Optional[int]:
        """Hop count under the tie-break rule (fewest among optimal); None
        if dropped.  Uses the Dijkstra tree when it is provably the unique
        optimum, the hop-bounded relaxation otherwise."""
        result = self.query_all(src, t_send)
        path = self.tree_path(src, dst, t_send, result)
        if path is None:
            return None
        if not self.path_is_suspect(path, result[3]):
            return len(path) - 1
        return int(self.min_hops(src, t_send)[dst])

    def ever_up_static_hops(self, dst: int) -> list[int]:
        """BFS hop distance to dst over links that are ever up (lower bound
        on timed hop counts); -1 when statically unreachable."""
        ever = self.grid_up.any(axis=1)
        dist = [-1] * self.n_nodes
        dist[dst] = 0
        dq = deque([dst])
        while dq:
            u = dq.popleft()
            for e in range(self.adj_off[u], self.adj_off[u + 1]):
                v = int(self.adj_node[e])
                if dist[v] < 0 and ever[self.adj_pair[e]]:
                    dist[v] = dist[u] + 1
                    dq.append(v)
        return dist


def _exact_path(plan: ContactPlan, src: int, dst: int, t_send: float,
                t_star: float, n_hops: int) -> list[tuple[int, float, float]]:
    """Lexicographically smallest node sequence among n_hops-hop paths
    arriving at t_star, grown greedily with memoized feasibility checks."""
    static_hops = plan.ever_up_static_hops(dst)
    # memo[(v, r)] = [max arrival known feasible, min arrival known infeasible]
    memo: dict[tuple[int, int], list[float]] = {}

    def feasible(v: int, a: float, r: int) -> bool:
        """Can a message at v at time a reach dst within r hops by t_star?"""
        if v == dst:
            return a <= t_star
        if r <= 0 or static_hops[v] < 0 or static_hops[v] > r:
            return False
        d_line = math.dist(
            plan.topo.nodes[v].position(a), plan.topo.nodes[dst].position(a)
        )
        if a + d_line / (C_LIGHT + MAX_NODE_SPEED) > t_star:
            return False
        entry = memo.setdefault((v, r), [-math.inf, math.inf])
        if a <= entry[0]:
            return True
        if a >= entry[1]:
            return False
        # bounded synchronous relaxation from (v, a)
        dp = {v: a}
        ok = False
        for _ in range(r):
            prev = dict(dp)
            for u, au in prev.items():
                for e in range(plan.adj_off[u], plan.adj_off[u + 1]):
                    w = int(plan.adj_node[e])
                    _, arr = plan.hop(u, w, int(plan.adj_pair[e]), au)
                    if arr > t_star:
                        continue
                    if arr < dp.get(w, math.inf):
                        dp[w] = arr
            if dst in dp and dp[dst] <= t_star:
                ok = True
                break
        if ok:
            entry[0] = max(entry[0], a)
        else:
            entry[1] = min(entry[1], a)
        return ok

    path = [(src, t_send, t_send)]
    visited = {src}
    u, a, h = src, t_send, 0
    while u != dst:
        chosen = None
        for e in range(plan.adj_off[u], plan.adj_off[u + 1]):
            v = int(plan.adj_node[e])
            if v in visited:
                continue
            d, arr = plan.hop(u, v, int(plan.adj_pair[e]), a)
            if arr > t_star:
                continue
            if v == dst:
                if h + 1 == n_hops and arr == t_star:
                    chosen = (v, d, arr)
                    break
                continue
            if feasible(v, arr, n_hops - h - 1):
                chosen = (v, d, arr)
                break
        if chosen is None:
            raise RuntimeError(
                "tie-break path reconstruction failed (routing invariant "
                f"violated for {plan.ids[src]}->{plan.ids[dst]} at t={t_send})"
            )
        v, d, arr = chosen
        node, arrive, _ = path[-1]
        path[-1] = (node, arrive, d)
        path.append((v, arr, arr))
        visited.add(v)
        u, a, h = v, arr, h + 1
    return path


def _to_route(plan: ContactPlan, path: list[tuple[int, float, float]],
              t_send: float) -> Route:
    hops = [(plan.ids[v], arrive, depart) for v, arrive, depart in path]
    return Route(hops=hops, latency=path[-1][1] - t_send)


def earliest_arrival(plan: ContactPlan, src: str, dst: str, t_send: float,
                     exact: bool = True) -> Optional[Route]:
    """The route minimizing arrival time, or None when no delivery is
    possible by the horizon (a drop).

    With ``exact`` (the default) the returned node sequence honors the
    fewest-hops-then-lexicographic tie-break; with ``exact=False`` ties may
    be broken arbitrarily (arrival time and drop status are exact either
    way).
    """
    if src == dst:
        raise ValueError("src and dst must differ")
    si, di = plan.index_of[src], plan.index_of[dst]
    result = plan.query_one(si, di, t_send)
    path = plan.tree_path(si, di, t_send, result)
    if path is None:
        return None
    if exact and plan.path_is_suspect(path, result[3]):
        t_star = result[0][di]
        n_hops = int(plan.min_hops(si, t_send)[di])
        path = _exact_path(plan, si, di, t_send, t_star, n_hops)
    return _to_route(plan, path, t_send)


def route_via(plan: ContactPlan, src: str, waypoint: str, dst: str,
              t_send: float, exact: bool = True) -> Optional[Route]:
    """Route src->waypoint then waypoint->dst, departing the waypoint at
    the first leg's arrival; None when either leg drops."""
    if waypoint == src:
        return earliest_arrival(plan, src, dst, t_send, exact)
    first = earliest_arrival(plan, src, waypoint, t_send, exact)
    if first is None:
        return None
    if waypoint == dst:
        return first
    second = earliest_arrival(plan, waypoint, dst, first.arrival, exact)
    if second is None:
        return None
    joined = first.hops[:-1]
    wp_arrive = first.hops[-1][1]
    wp_depart = second.hops[0][2]
    joined.append((waypoint, wp_arrive, wp_depart))
    joined.extend(second.hops[1:])
    return Route(hops=joined, latency=second.arrival - t_send)
