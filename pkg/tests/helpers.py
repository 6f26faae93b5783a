"""Shared independent oracles for the test suite.

Everything here recomputes results from definitions, without touching the
package's solvers beyond basic data structures.
"""

from itertools import combinations

import numpy as np


def arena_edges(cfg, arena):
    """(edge ids, local u, local v, open mask) of the arena-induced edges."""
    box = cfg.box
    member = np.zeros(box.n_vertices, dtype=bool)
    member[arena] = True
    local = np.full(box.n_vertices, -1, dtype=np.int64)
    local[np.sort(arena)] = np.arange(len(arena))
    ids = np.flatnonzero(member[box.edges_u] & member[box.edges_v])
    return (ids, local[box.edges_u[ids]], local[box.edges_v[ids]],
            cfg.bits[ids] == 1)


def open_components_reach(n, eu, ev, open_mask, removed, starts):
    """Vertices reachable from starts via open, non-removed edges."""
    adj = [[] for _ in range(n)]
    for i in np.flatnonzero(open_mask):
        if i in removed:
            continue
        adj[eu[i]].append(ev[i])
        adj[ev[i]].append(eu[i])
    seen = np.zeros(n, dtype=bool)
    stack = list(starts)
    seen[list(starts)] = True
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if not seen[y]:
                seen[y] = True
                stack.append(y)
    return seen


def exhaustive_min_cut(cfg, sources, sinks, arena, k_max=8):
    """Smallest number of open arena edges whose removal separates the sets.

    Closed edges are ignored entirely (they cost nothing to cut), so this is
    a brute-force search over subsets of open edges by increasing size.
    Returns None if no cut of size <= k_max exists.
    """
    arena = np.sort(np.unique(arena))
    ids, lu, lv, open_mask = arena_edges(cfg, arena)
    local = {int(g): i for i, g in enumerate(arena)}
    src = [local[int(s)] for s in sources]
    snk = {local[int(s)] for s in sinks}
    open_ids = np.flatnonzero(open_mask)

    def separated(removed):
        seen = open_components_reach(len(arena), lu, lv, open_mask,
                                     removed, src)
        return not any(seen[t] for t in snk)

    if separated(set()):
        return 0
    for k in range(1, k_max + 1):
        for combo in combinations(open_ids.tolist(), k):
            if separated(set(combo)):
                return k
    return None


def _bitmask_adjacency(n, lu, lv, open_mask):
    adj = [0] * n
    for i in np.flatnonzero(open_mask):
        adj[lu[i]] |= 1 << int(lv[i])
        adj[lv[i]] |= 1 << int(lu[i])
    return adj


def no_smaller_open_cut(cfg, sources, sinks, arena, claimed):
    """True iff no open-edge subset of size < claimed separates the sets.

    Exhausts every smaller cardinality with bitmask reachability, which
    together with a verified separating set of weight `claimed` pins the
    minimal open cut weight exactly.
    """
    arena = np.sort(np.unique(arena))
    ids, lu, lv, open_mask = arena_edges(cfg, arena)
    n = len(arena)
    local = {int(g): i for i, g in enumerate(arena)}
    src_mask = 0
    for s in sources:
        src_mask |= 1 << local[int(s)]
    snk_mask = 0
    for t in sinks:
        snk_mask |= 1 << local[int(t)]
    base_adj = _bitmask_adjacency(n, lu, lv, open_mask)
    open_ids = np.flatnonzero(open_mask)
    pairs = [(int(lu[i]), int(lv[i])) for i in open_ids]

    def separated(removed):
        adj = base_adj.copy()
        for j in removed:
            a, b = pairs[j]
            adj[a] &= ~(1 << b)
            adj[b] &= ~(1 << a)
        reach = src_mask
        frontier = src_mask
        while frontier:
            grow = 0
            f = frontier
            while f:
                v = (f & -f).bit_length() - 1
                f &= f - 1
                grow |= adj[v]
            frontier = grow & ~reach
            reach |= frontier
        return not reach & snk_mask

    if claimed == 0:
        return True
    if separated(()):
        return False
    for k in range(1, claimed):
        for combo in combinations(range(len(pairs)), k):
            if separated(combo):
                return False
    return True


def open_cut_separates(cfg, sources, sinks, arena, witness):
    """True iff removing the witness's open edges disconnects the sets."""
    arena = np.sort(np.unique(arena))
    ids, lu, lv, open_mask = arena_edges(cfg, arena)
    local = {int(g): i for i, g in enumerate(arena)}
    removed = {int(np.flatnonzero(ids == w)[0])
               for w in witness if np.any(ids == w)}
    seen = open_components_reach(len(arena), lu, lv, open_mask, removed,
                                 [local[int(s)] for s in sources])
    return not any(seen[local[int(t)]] for t in sinks)


def min_perimeter_polyomino(s):
    """Minimal edge-boundary of an s-cell connected set in the square lattice."""
    return 2 * int(np.ceil(2 * np.sqrt(s)))


def enumerate_connected_subsets(adj, max_size):
    """All connected vertex subsets of size <= max_size, each exactly once.

    Standard fixed-root enumeration: subsets containing vertex r never touch
    vertices < r, so every connected set appears once, rooted at its minimum.
    """
    n = len(adj)
    out = []

    def extend(cur, frontier, forbidden):
        out.append(tuple(sorted(cur)))
        if len(cur) == max_size:
            return
        local_forbidden = set(forbidden)
        for w in list(frontier):
            if w in local_forbidden:
                continue
            nxt_frontier = frontier | {
                x for x in adj[w]
                if x not in cur and x not in local_forbidden and x != w
            }
            extend(cur | {w}, nxt_frontier - cur - {w}, set(local_forbidden))
            local_forbidden.add(w)

    for r in range(n):
        frontier = {x for x in adj[r] if x > r}
        extend({r}, frontier, {x for x in range(r + 1)} - {r})
    return out


from fractions import Fraction


def full_subset_oracle(prob, cap=None):
    """Minimum boundary/size over ALL vertex subsets (connectivity-free)."""
    cap = prob.cap if cap is None else cap
    box = prob.cfg.box
    verts = prob.Cn.vertices
    m = len(verts)
    assert m <= 20
    local = {int(v): i for i, v in enumerate(verts)}
    eu, ev = prob.cfg.open_edge_arrays()
    deg = np.zeros(m, dtype=np.int64)
    internal = []
    for u, v in zip(eu.tolist(), ev.tolist()):
        iu, iv = local.get(u), local.get(v)
        if iu is not None:
            deg[iu] += 1
        if iv is not None:
            deg[iv] += 1
        if iu is not None and iv is not None:
            internal.append((iu, iv))
    masks = np.arange(1, 1 << m, dtype=np.int64)
    size = np.zeros(len(masks), dtype=np.int64)
    bnd = np.zeros(len(masks), dtype=np.int64)
    for v in range(m):
        bit = (masks >> v) & 1
        size += bit
        bnd += deg[v] * bit
    for iu, iv in internal:
        bnd -= 2 * (((masks >> iu) & 1) & ((masks >> iv) & 1))
    ok = (size >= 1) & (size <= cap)
    best = None
    for s in range(1, cap + 1):
        sel = ok & (size == s)
        if not sel.any():
            continue
        b = int(bnd[sel].min())
        f = Fraction(b, s)
        if best is None or f < best:
            best = f
    return best
