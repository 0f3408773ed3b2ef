"""Pure-Python routing kernels.

Reference implementation of the hot kernels; a compiled version with the
same signatures lives in ``_speedups``.  Arithmetic here is written
expression-for-expression like the compiled code (libm trig via ``math``,
identical accumulation order) so both backends produce bit-identical
arrival times.

All kernels operate on the flat arrays prepared by ``routing.ContactPlan``:

* ``term_data`` (n_terms, 11) float64 — motion terms per node,
  rows [kx ky kz ax ay az bx by bz w phi]
* ``term_off`` (n_nodes + 1) int32 — per-node slice into term_data
* ``adj_off`` (n_nodes + 1) / ``adj_node`` / ``adj_pair`` int32 — CSR
  adjacency over directed edges, with the undirected candidate-link index
* ``grid_up`` (n_pairs, n_grid) uint8 — link up at grid point
* ``next_up`` (n_pairs, n_grid) int32 — first up grid index >= w, else -1
"""

from __future__ import annotations

import heapq
import math

C_LIGHT = 299792.458

INF = math.inf


def _position(term_data, term_off, node: int, t: float):
    x = y = z = 0.0
    for r in range(term_off[node], term_off[node + 1]):
        row = term_data[r]
        ang = row[9] * t + row[10]
        c = math.cos(ang)
        s = math.sin(ang)
        x += row[0] + row[3] * c + row[6] * s
        y += row[1] + row[4] * c + row[7] * s
        z += row[2] + row[5] * c + row[8] * s
    return x, y, z


def hop_time(term_data, term_off, grid_up, next_up, dt, n_grid,
             u: int, v: int, pair: int, a: float):
    """Earliest (depart, arrive) over link ``pair`` leaving u at/after ``a``.

    Returns (nan, inf) when the link never reopens within the grid.
    """
    # floor(a / dt), not a // dt: float floordiv rounds the quotient
    # differently in edge cases and the compiled backend uses floor().
    w = int(math.floor(a / dt))
    if w >= n_grid:
        return (math.nan, INF)
    if w < 0:
        w = 0
    if grid_up[pair, w]:
        d = a
    else:
        w2 = next_up[pair, w]
        if w2 < 0:
            return (math.nan, INF)
        d = w2 * dt
        if d < a:  # same grid cell: link down for the rest of the grid
            return (math.nan, INF)
    ux, uy, uz = _position(term_data, term_off, u, d)
    vx, vy, vz = _position(term_data, term_off, v, d)
    dx = vx - ux
    dy = vy - uy
    dz = vz - uz
    dist = math.sqrt(dx * dx + dy * dy + dz * dz)
    return (d, d + dist / C_LIGHT)


def dijkstra(term_data, term_off, adj_off, adj_node, adj_pair,
             grid_up, next_up, dt, n_grid, horizon,
             src: int, t_send: float, dst: int = -1):
    """Earliest-arrival tree from (src, t_send).

    Returns (ea, pred, depart, eq_flag):

    * ea[v] — earliest arrival time (inf if unreachable by horizon)
    * pred[v] / depart[v] — tree parent and departure time on that edge
    * eq_flag[v] — a relaxation from a different parent produced a
      bit-identical arrival; the caller must fall back to the exact
      tie-break procedure for paths through flagged nodes.

    With ``dst >= 0`` the search stops once every label <= ea[dst] has been
    settled and relaxed (flags for nodes at that level stay valid).
    """
    n = len(adj_off) - 1
    ea = [INF] * n
    pred = [-1] * n
    depart = [math.nan] * n
    eq_flag = [0] * n
    ea[src] = t_send
    heap = [(t_send, src)]
    while heap:
        a, u = heapq.heappop(heap)
        if a > ea[u]:
            continue
        if dst >= 0 and a > ea[dst]:
            break
        for e in range(adj_off[u], adj_off[u + 1]):
            v = adj_node[e]
            d, arr = hop_time(term_data, term_off, grid_up, next_up, dt,
                              n_grid, u, v, adj_pair[e], a)
            if arr > horizon:
                continue
            if arr < ea[v]:
                ea[v] = arr
                pred[v] = u
                depart[v] = d
                heapq.heappush(heap, (arr, v))
            elif arr == ea[v] and pred[v] != u:
                eq_flag[v] = 1
    return ea, pred, depart, eq_flag


def bellman_hops(term_data, term_off, adj_off, adj_node, adj_pair,
                 grid_up, next_up, dt, n_grid, horizon,
                 src: int, t_send: float, max_rounds: int = 0):
    """Minimum hop count achieving the earliest arrival, per node.

    Synchronous Bellman-Ford over the hop relaxation: dp after round k is
    the minimum arrival over timed paths with <= k hops.  The round of the
    last strict improvement of dp[v] is therefore the minimum hop count
    among arrival-optimal paths to v.  Returns (dp, minhops); dp matches
    the Dijkstra arrivals bit-for-bit since the hop arithmetic is shared.
    """
    n = len(adj_off) - 1
    if max_rounds <= 0:
        max_rounds = n
    dp = [INF] * n
    dp[src] = t_send
    minhops = [-1] * n
    minhops[src] = 0
    for rnd in range(1, max_rounds + 1):
        prev = list(dp)
        changed = False
        for u in range(n):
            a = prev[u]
            if a == INF:
                continue
            for e in range(adj_off[u], adj_off[u + 1]):
                v = adj_node[e]
                d, arr = hop_time(term_data, term_off, grid_up, next_up,
                                  dt, n_grid, u, v, adj_pair[e], a)
                if arr > horizon:
                    continue
                if arr < dp[v]:
                    dp[v] = arr
                    minhops[v] = rnd
                    changed = True
        if not changed:
            break
    return dp, minhops
