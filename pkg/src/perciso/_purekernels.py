"""Pure numpy/scipy implementations of the hot kernels.

These mirror the compiled core in perciso._core exactly: same RNG streams,
same tie-breaking, same returned values.  The compiled core is preferred at
import time; this module keeps the package fully functional without it.
"""

import math

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components
from scipy.sparse.csgraph import maximum_flow as _scipy_maximum_flow

from ._rng import GOLDEN, MASK64, MIX1, MIX2, U53, finalize64

_U64 = np.uint64


def edge_open_bits(seed: int, threshold: int, keys: np.ndarray) -> np.ndarray:
    """Open/closed flag per edge key: splitmix64(seed, key) < threshold.

    keys are absolute 64-bit edge identifiers, so flags are independent of
    which box the edge is enumerated in.
    """
    with np.errstate(over="ignore"):
        z = (_U64(seed) + (keys + _U64(1)) * _U64(GOLDEN)).astype(_U64)
        z = (z ^ (z >> _U64(30))) * _U64(MIX1)
        z = (z ^ (z >> _U64(27))) * _U64(MIX2)
        z = z ^ (z >> _U64(31))
    return ((z >> _U64(11)) < _U64(threshold)).astype(np.uint8)


def min_labels(n: int, eu: np.ndarray, ev: np.ndarray) -> np.ndarray:
    """Connected-component label per vertex; label = least vertex index."""
    if len(eu) == 0:
        return np.arange(n, dtype=np.int64)
    data = np.ones(len(eu), dtype=np.int8)
    adj = csr_matrix((data, (eu, ev)), shape=(n, n))
    _, comp = connected_components(adj, directed=False)
    least = np.full(comp.max() + 1, n, dtype=np.int64)
    np.minimum.at(least, comp, np.arange(n, dtype=np.int64))
    return least[comp]


def max_flow_unit(n, eu, ev, caps, sources, sinks):
    """Max flow over undirected small-capacity edges with a super source/sink.

    Returns (flow value, reach) where reach marks the vertices reachable from
    the sources in the final residual network.  That set is the unique
    inclusion-minimal source side over all minimum cuts, hence identical
    across flow algorithms and backends.
    """
    big = 1 << 30
    ns, nt = n, n + 1
    rows = np.concatenate([eu, ev, np.full(len(sources), ns, dtype=np.int64),
                           np.asarray(sinks, dtype=np.int64)])
    cols = np.concatenate([ev, eu, np.asarray(sources, dtype=np.int64),
                           np.full(len(sinks), nt, dtype=np.int64)])
    cap = np.concatenate([caps, caps,
                          np.full(len(sources), big, dtype=np.int64),
                          np.full(len(sinks), big, dtype=np.int64)])
    keep = cap > 0
    rows, cols, cap = rows[keep], cols[keep], cap[keep]
    graph = csr_matrix((cap.astype(np.int32), (rows, cols)), shape=(n + 2, n + 2))
    if graph.nnz == 0:
        reach = np.zeros(n, dtype=np.uint8)
        reach[np.asarray(sources, dtype=np.int64)] = 1
        return 0, reach
    res = _scipy_maximum_flow(graph, ns, nt)
    residual = graph - res.flow
    residual.data = np.maximum(residual.data, 0)
    residual.eliminate_zeros()
    order = breadth_first_order(residual, ns, directed=True,
                                return_predecessors=False)
    reach_full = np.zeros(n + 2, dtype=np.uint8)
    reach_full[order] = 1
    return int(res.flow_value), reach_full[:n]


class _Stream:
    __slots__ = ("state",)

    def __init__(self, seed):
        self.state = seed & MASK64

    def next_u64(self):
        self.state = (self.state + GOLDEN) & MASK64
        return finalize64(self.state)

    def u01(self):
        return (self.next_u64() >> 11) / U53

    def randint(self, n):
        return self.next_u64() % int(n)


def _count_nbrs_in(indptr, indices, member, v):
    c = 0
    for j in range(indptr[v], indptr[v + 1]):
        if member[indices[j]]:
            c += 1
    return c


def _removal_keeps_connected(indptr, indices, member, v, stamp, stamps, stack):
    """True if the members adjacent to v stay connected after dropping v."""
    nbrs = [indices[j] for j in range(indptr[v], indptr[v + 1])
            if member[indices[j]]]
    if len(nbrs) <= 1:
        return True
    want = len(nbrs)
    for w in nbrs:
        stamps[w] = stamp  # targets carry the stamp once discovered
    found = 1
    start = nbrs[0]
    stack.clear()
    stack.append(start)
    seen_stamp = stamp + 1
    stamps[start] = seen_stamp
    while stack:
        u = stack.pop()
        for j in range(indptr[u], indptr[u + 1]):
            w = indices[j]
            if w == v or not member[w] or stamps[w] == seen_stamp:
                continue
            if stamps[w] == stamp:
                found += 1
            stamps[w] = seen_stamp
            stack.append(w)
        if found == want:
            return True
    return found == want


def _boundary_of(indptr, indices, deg_total, member, verts):
    # sum of count_nbrs_in over the whole set hits each internal edge twice,
    # so subtracting it once from the degree sum yields |boundary|
    b = 0
    for v in verts:
        b += int(deg_total[v]) - _count_nbrs_in(indptr, indices, member, v)
    return b


def anneal_connected(indptr, indices, deg_total, shifts, cap, seed,
                     restarts, steps, t0, cooling, p_translate, seed_sets):
    """Simulated annealing over connected vertex sets minimizing boundary/size.

    Moves: grow by an adjacent vertex, drop an articulation-safe vertex, or
    translate the whole set one lattice step.  Deterministic given seed; the
    best (boundary, size) pair is compared exactly, ties broken by the
    lexicographically smallest sorted vertex set.

    Returns (best_boundary, best_size, best_vertices sorted int64 array).
    """
    m = len(indptr) - 1
    member = np.zeros(m, dtype=np.uint8)
    stamps = np.zeros(m, dtype=np.int64)
    stamp_counter = 0
    stack = []

    best_b = -1
    best_s = 0
    best_set = None

    def better(b2, s2, hlist):
        # exact rational compare; sorting deferred until a snapshot is needed
        nonlocal best_b, best_s, best_set
        if best_set is None or b2 * best_s < best_b * s2:
            best_b, best_s, best_set = b2, s2, tuple(sorted(hlist))
        elif b2 * best_s == best_b * s2:
            cand = tuple(sorted(hlist))
            if cand < best_set:
                best_b, best_s, best_set = b2, s2, cand

    n_dirs = len(shifts) if shifts is not None else 0

    for restart in range(restarts):
        rng = _Stream(finalize64((seed + (restart + 1) * GOLDEN) & MASK64))
        member[:] = 0
        if restart < len(seed_sets) and len(seed_sets[restart]) > 0:
            hlist = [int(v) for v in seed_sets[restart]]
        else:
            hlist = [rng.randint(m)]
        for v in hlist:
            member[v] = 1
        size = len(hlist)
        bnd = _boundary_of(indptr, indices, deg_total, member, hlist)
        better(bnd, size, hlist)

        temp = t0
        for _ in range(steps):
            temp *= cooling
            u_move = rng.u01()
            if n_dirs and u_move < p_translate:
                d = rng.randint(n_dirs)
                sh = shifts[d]
                new_list = []
                ok = True
                for v in hlist:
                    w = sh[v]
                    if w < 0:
                        ok = False
                        break
                    new_list.append(int(w))
                if not ok:
                    continue
                for v in hlist:
                    member[v] = 0
                for w in new_list:
                    member[w] = 1
                b2 = _boundary_of(indptr, indices, deg_total, member, new_list)
                # connectivity of the shifted set under its own open edges
                stamp_counter += 2
                root = new_list[0]
                stamps[root] = stamp_counter
                stack.clear()
                stack.append(root)
                seen = 1
                while stack:
                    u = stack.pop()
                    for j in range(indptr[u], indptr[u + 1]):
                        w = indices[j]
                        if member[w] and stamps[w] != stamp_counter:
                            stamps[w] = stamp_counter
                            seen += 1
                            stack.append(w)
                if seen != size or not _accept(bnd, size, b2, size, temp, rng):
                    for w in new_list:
                        member[w] = 0
                    for v in hlist:
                        member[v] = 1
                    continue
                hlist = new_list
                bnd = b2
                better(bnd, size, hlist)
            elif u_move < p_translate + (1.0 - p_translate) * 0.5:
                # grow by a uniformly chosen open neighbor of a member vertex
                v = hlist[rng.randint(size)]
                deg = indptr[v + 1] - indptr[v]
                if deg == 0:
                    continue
                w = int(indices[indptr[v] + rng.randint(deg)])
                if member[w] or size >= cap:
                    continue
                b2 = bnd + int(deg_total[w]) \
                    - 2 * _count_nbrs_in(indptr, indices, member, w)
                if not _accept(bnd, size, b2, size + 1, temp, rng):
                    continue
                member[w] = 1
                hlist.append(w)
                size += 1
                bnd = b2
                better(bnd, size, hlist)
            else:
                if size == 1:
                    continue
                idx = rng.randint(size)
                v = hlist[idx]
                stamp_counter += 2
                if not _removal_keeps_connected(indptr, indices, member, v,
                                                stamp_counter, stamps, stack):
                    continue
                b2 = bnd - int(deg_total[v]) \
                    + 2 * _count_nbrs_in(indptr, indices, member, v)
                if not _accept(bnd, size, b2, size - 1, temp, rng):
                    continue
                member[v] = 0
                hlist[idx] = hlist[-1]
                hlist.pop()
                size -= 1
                bnd = b2
                better(bnd, size, hlist)

    return best_b, best_s, np.asarray(best_set, dtype=np.int64)


def _accept(b1, s1, b2, s2, temp, rng):
    delta = b2 / s2 - b1 / s1
    if delta <= 0.0:
        return True
    if temp <= 1e-300:
        return False
    return rng.u01() < math.exp(-delta / temp)
