# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: edge sampling, cluster labels, max flow, annealing.

Semantics must match perciso._purekernels exactly (same RNG streams, same
tie-breaking); tests compare the two backends directly.
"""

from libc.math cimport exp

import numpy as np

ctypedef unsigned long long u64
ctypedef long long i64

cdef u64 GOLDEN = 0x9E3779B97F4A7C15ULL
cdef u64 MIX1 = 0xBF58476D1CE4E5B9ULL
cdef u64 MIX2 = 0x94D049BB133111EBULL
cdef double U53 = 9007199254740992.0


cdef inline u64 _finalize(u64 x) nogil:
    cdef u64 z = x
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    return z ^ (z >> 31)


cdef inline u64 _next(u64* state) nogil:
    state[0] += GOLDEN
    return _finalize(state[0])


cdef inline double _u01(u64* state) nogil:
    return <double>(_next(state) >> 11) / U53


cdef inline u64 _randint(u64* state, u64 n) nogil:
    return _next(state) % n


def edge_open_bits(seed, threshold, keys):
    """Open flag per 64-bit edge key; bit-identical to the pure backend."""
    cdef u64 s = <u64>(seed & 0xFFFFFFFFFFFFFFFF)
    cdef u64 thr = <u64>threshold
    cdef const u64[::1] k = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef Py_ssize_t n = k.shape[0], i
    out = np.empty(n, dtype=np.uint8)
    cdef unsigned char[::1] o = out
    cdef u64 z
    with nogil:
        for i in range(n):
            z = _finalize(s + (k[i] + 1) * GOLDEN)
            o[i] = 1 if (z >> 11) < thr else 0
    return out


def min_labels(n, eu, ev):
    """Connected-component label per vertex; label = least vertex index."""
    cdef const i64[::1] u = np.ascontiguousarray(eu, dtype=np.int64)
    cdef const i64[::1] v = np.ascontiguousarray(ev, dtype=np.int64)
    cdef Py_ssize_t m = u.shape[0], i
    cdef i64 nn = n
    parent_arr = np.arange(n, dtype=np.int64)
    cdef i64[::1] parent = parent_arr
    cdef i64 a, b, ra, rb
    for i in range(m):
        a = u[i]
        b = v[i]
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a != b:
            if a < b:
                parent[b] = a
            else:
                parent[a] = b
    out = np.empty(n, dtype=np.int64)
    cdef i64[::1] o = out
    for i in range(nn):
        a = i
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        o[i] = a
    return out


def max_flow_unit(n, eu, ev, caps, sources, sinks):
    """Dinic max flow over undirected edges plus a super source/sink.

    Returns (value, reach) with reach the residual-reachable vertex mask,
    i.e. the canonical minimal source side of all minimum cuts.
    """
    cdef const i64[::1] u = np.ascontiguousarray(eu, dtype=np.int64)
    cdef const i64[::1] v = np.ascontiguousarray(ev, dtype=np.int64)
    cdef const i64[::1] c = np.ascontiguousarray(caps, dtype=np.int64)
    cdef const i64[::1] src = np.ascontiguousarray(sources, dtype=np.int64)
    cdef const i64[::1] snk = np.ascontiguousarray(sinks, dtype=np.int64)
    cdef i64 m = u.shape[0]
    cdef i64 nv = n + 2
    cdef i64 S = n, T = n + 1
    cdef i64 big = 1 << 30

    cdef i64 narcs = 0, i
    for i in range(m):
        if c[i] > 0:
            narcs += 2
    narcs += 2 * (src.shape[0] + snk.shape[0])

    arc_to_arr = np.empty(narcs, dtype=np.int64)
    arc_cap_arr = np.empty(narcs, dtype=np.int64)
    arc_nxt_arr = np.empty(narcs, dtype=np.int64)
    head_arr = np.full(nv, -1, dtype=np.int64)
    cdef i64[::1] arc_to = arc_to_arr
    cdef i64[::1] arc_cap = arc_cap_arr
    cdef i64[::1] arc_nxt = arc_nxt_arr
    cdef i64[::1] head = head_arr

    cdef i64 na = 0

    # paired arcs: arc k and k^1 are mutual reverses
    for i in range(m):
        if c[i] <= 0:
            continue
        arc_to[na] = v[i]; arc_cap[na] = c[i]
        arc_nxt[na] = head[u[i]]; head[u[i]] = na; na += 1
        arc_to[na] = u[i]; arc_cap[na] = c[i]
        arc_nxt[na] = head[v[i]]; head[v[i]] = na; na += 1
    for i in range(src.shape[0]):
        arc_to[na] = src[i]; arc_cap[na] = big
        arc_nxt[na] = head[S]; head[S] = na; na += 1
        arc_to[na] = S; arc_cap[na] = 0
        arc_nxt[na] = head[src[i]]; head[src[i]] = na; na += 1
    for i in range(snk.shape[0]):
        arc_to[na] = T; arc_cap[na] = big
        arc_nxt[na] = head[snk[i]]; head[snk[i]] = na; na += 1
        arc_to[na] = snk[i]; arc_cap[na] = 0
        arc_nxt[na] = head[T]; head[T] = na; na += 1

    level_arr = np.empty(nv, dtype=np.int64)
    it_arr = np.empty(nv, dtype=np.int64)
    queue_arr = np.empty(nv, dtype=np.int64)
    pstack_arr = np.empty(nv + 1, dtype=np.int64)   # arcs along current path
    nstack_arr = np.empty(nv + 1, dtype=np.int64)   # nodes along current path
    cdef i64[::1] level = level_arr
    cdef i64[::1] it = it_arr
    cdef i64[::1] queue = queue_arr
    cdef i64[::1] pstack = pstack_arr
    cdef i64[::1] nstack = nstack_arr

    cdef i64 total = 0
    cdef i64 qh, qt, x, a, depth, bott, j, w
    with nogil:
        while True:
            for x in range(nv):
                level[x] = -1
            level[S] = 0
            qh = 0; qt = 0
            queue[qt] = S; qt += 1
            while qh < qt:
                x = queue[qh]; qh += 1
                a = head[x]
                while a != -1:
                    if arc_cap[a] > 0 and level[arc_to[a]] < 0:
                        level[arc_to[a]] = level[x] + 1
                        queue[qt] = arc_to[a]; qt += 1
                    a = arc_nxt[a]
            if level[T] < 0:
                break
            for x in range(nv):
                it[x] = head[x]
            x = S
            depth = 0
            nstack[0] = S
            while True:
                if x == T:
                    bott = arc_cap[pstack[0]]
                    for j in range(1, depth):
                        if arc_cap[pstack[j]] < bott:
                            bott = arc_cap[pstack[j]]
                    for j in range(depth):
                        arc_cap[pstack[j]] -= bott
                        arc_cap[pstack[j] ^ 1] += bott
                    total += bott
                    j = 0
                    while arc_cap[pstack[j]] > 0:
                        j += 1
                    depth = j
                    x = nstack[depth]
                    continue
                a = it[x]
                if a == -1:
                    if depth == 0:
                        break
                    level[x] = -1
                    depth -= 1
                    x = nstack[depth]
                    continue
                it[x] = arc_nxt[a]
                w = arc_to[a]
                if arc_cap[a] > 0 and level[w] == level[x] + 1:
                    pstack[depth] = a
                    depth += 1
                    nstack[depth] = w
                    x = w
    # residual reachability from S
    reach_full = np.zeros(nv, dtype=np.uint8)
    cdef unsigned char[::1] reach = reach_full
    cdef i64 rh = 0, rt = 0
    reach[S] = 1
    queue[rt] = S; rt += 1
    while rh < rt:
        x = queue[rh]; rh += 1
        a = head[x]
        while a != -1:
            if arc_cap[a] > 0 and reach[arc_to[a]] == 0:
                reach[arc_to[a]] = 1
                queue[rt] = arc_to[a]; rt += 1
            a = arc_nxt[a]
    return int(total), np.asarray(reach_full[:n])


cdef i64 _count_in(const i64[::1] indptr, const i64[::1] indices,
                   const unsigned char[::1] member, i64 v) nogil:
    cdef i64 j, cnt = 0
    for j in range(indptr[v], indptr[v + 1]):
        if member[indices[j]]:
            cnt += 1
    return cnt


def anneal_connected(indptr_in, indices_in, deg_total_in, shifts_in, cap,
                     seed, restarts, steps, t0, cooling, p_translate,
                     seed_sets):
    """Compiled twin of perciso._purekernels.anneal_connected."""
    cdef const i64[::1] indptr = np.ascontiguousarray(indptr_in, dtype=np.int64)
    cdef const i64[::1] indices = np.ascontiguousarray(indices_in, dtype=np.int64)
    cdef const i64[::1] deg_total = np.ascontiguousarray(deg_total_in, dtype=np.int64)
    cdef i64 m = indptr.shape[0] - 1
    cdef i64 ccap = cap
    cdef i64 n_restarts = restarts
    cdef i64 n_steps = steps
    cdef double c_t0 = t0
    cdef double c_cooling = cooling
    cdef double c_ptr = p_translate
    cdef u64 c_seed = <u64>(seed & 0xFFFFFFFFFFFFFFFF)

    cdef i64 n_dirs = 0
    cdef const i64[:, ::1] shifts
    if shifts_in is not None and len(shifts_in) > 0:
        shifts = np.ascontiguousarray(shifts_in, dtype=np.int64)
        n_dirs = shifts.shape[0]
    else:
        shifts = np.empty((1, 1), dtype=np.int64)

    member_arr = np.zeros(m, dtype=np.uint8)
    stamps_arr = np.zeros(m, dtype=np.int64)
    hbuf_arr = np.empty(m, dtype=np.int64)
    nbuf_arr = np.empty(m, dtype=np.int64)
    stack_arr = np.empty(m + 1, dtype=np.int64)
    cdef unsigned char[::1] member = member_arr
    cdef i64[::1] stamps = stamps_arr
    cdef i64[::1] hbuf = hbuf_arr
    cdef i64[::1] nbuf = nbuf_arr
    cdef i64[::1] stack = stack_arr
    cdef i64 stamp_counter = 0

    cdef i64 best_b = -1, best_s = 0
    best_set = None

    cdef i64 restart, size, bnd, stepi, vv, ww, deg, b2, idx, d, j, k
    cdef i64 seen, found, want, root, top, uu
    cdef double temp, u_move, delta
    cdef u64 rng
    cdef bint ok, acc

    for restart in range(n_restarts):
        rng = _finalize(c_seed + (<u64>restart + 1) * GOLDEN)
        for j in range(m):
            member[j] = 0
        if restart < len(seed_sets) and len(seed_sets[restart]) > 0:
            seedset = np.ascontiguousarray(seed_sets[restart], dtype=np.int64)
            size = len(seedset)
            for j in range(size):
                hbuf[j] = seedset[j]
        else:
            size = 1
            hbuf[0] = <i64>_randint(&rng, <u64>m)
        for j in range(size):
            member[hbuf[j]] = 1
        bnd = 0
        for j in range(size):
            vv = hbuf[j]
            bnd += deg_total[vv] - _count_in(indptr, indices, member, vv)
        if best_set is None or b_lt(bnd, size, best_b, best_s):
            best_b = bnd; best_s = size
            best_set = tuple(sorted(hbuf_arr[:size].tolist()))
        elif bnd * best_s == best_b * size:
            cand = tuple(sorted(hbuf_arr[:size].tolist()))
            if cand < best_set:
                best_b = bnd; best_s = size; best_set = cand

        temp = c_t0
        for stepi in range(n_steps):
            temp = temp * c_cooling
            u_move = _u01(&rng)
            acc = False
            if n_dirs > 0 and u_move < c_ptr:
                d = <i64>_randint(&rng, <u64>n_dirs)
                ok = True
                for j in range(size):
                    ww = shifts[d, hbuf[j]]
                    if ww < 0:
                        ok = False
                        break
                    nbuf[j] = ww
                if not ok:
                    continue
                for j in range(size):
                    member[hbuf[j]] = 0
                for j in range(size):
                    member[nbuf[j]] = 1
                b2 = 0
                for j in range(size):
                    vv = nbuf[j]
                    b2 += deg_total[vv] - _count_in(indptr, indices, member, vv)
                stamp_counter += 2
                root = nbuf[0]
                stamps[root] = stamp_counter
                top = 0
                stack[top] = root; top += 1
                seen = 1
                while top > 0:
                    top -= 1
                    uu = stack[top]
                    for j in range(indptr[uu], indptr[uu + 1]):
                        ww = indices[j]
                        if member[ww] and stamps[ww] != stamp_counter:
                            stamps[ww] = stamp_counter
                            seen += 1
                            stack[top] = ww; top += 1
                if seen == size:
                    acc = _accept(bnd, size, b2, size, temp, &rng)
                else:
                    acc = False
                if not acc:
                    for j in range(size):
                        member[nbuf[j]] = 0
                    for j in range(size):
                        member[hbuf[j]] = 1
                    continue
                for j in range(size):
                    hbuf[j] = nbuf[j]
                bnd = b2
            elif u_move < c_ptr + (1.0 - c_ptr) * 0.5:
                vv = hbuf[<i64>_randint(&rng, <u64>size)]
                deg = indptr[vv + 1] - indptr[vv]
                if deg == 0:
                    continue
                ww = indices[indptr[vv] + <i64>_randint(&rng, <u64>deg)]
                if member[ww] or size >= ccap:
                    continue
                b2 = bnd + deg_total[ww] - 2 * _count_in(indptr, indices, member, ww)
                if not _accept(bnd, size, b2, size + 1, temp, &rng):
                    continue
                member[ww] = 1
                hbuf[size] = ww
                size += 1
                bnd = b2
            else:
                if size == 1:
                    continue
                idx = <i64>_randint(&rng, <u64>size)
                vv = hbuf[idx]
                # articulation check: do v's member-neighbors reconnect?
                stamp_counter += 2
                want = 0
                root = -1
                for j in range(indptr[vv], indptr[vv + 1]):
                    ww = indices[j]
                    if member[ww]:
                        stamps[ww] = stamp_counter
                        want += 1
                        root = ww
                ok = True
                if want > 1:
                    found = 1
                    stamps[root] = stamp_counter + 1
                    top = 0
                    stack[top] = root; top += 1
                    while top > 0 and found < want:
                        top -= 1
                        uu = stack[top]
                        for j in range(indptr[uu], indptr[uu + 1]):
                            ww = indices[j]
                            if ww == vv or not member[ww]:
                                continue
                            if stamps[ww] == stamp_counter + 1:
                                continue
                            if stamps[ww] == stamp_counter:
                                found += 1
                            stamps[ww] = stamp_counter + 1
                            stack[top] = ww; top += 1
                    ok = found == want
                if not ok:
                    continue
                b2 = bnd - deg_total[vv] + 2 * _count_in(indptr, indices, member, vv)
                if not _accept(bnd, size, b2, size - 1, temp, &rng):
                    continue
                member[vv] = 0
                hbuf[idx] = hbuf[size - 1]
                size -= 1
                bnd = b2
            # accepted: update the incumbent
            if best_set is None or b_lt(bnd, size, best_b, best_s):
                best_b = bnd; best_s = size
                best_set = tuple(sorted(hbuf_arr[:size].tolist()))
            elif bnd * best_s == best_b * size:
                cand = tuple(sorted(hbuf_arr[:size].tolist()))
                if cand < best_set:
                    best_b = bnd; best_s = size; best_set = cand

    return int(best_b), int(best_s), np.asarray(best_set, dtype=np.int64)


cdef inline bint b_lt(i64 b2, i64 s2, i64 b1, i64 s1) nogil:
    return b2 * s1 < b1 * s2


cdef inline bint _accept(i64 b1, i64 s1, i64 b2, i64 s2, double temp,
                         u64* rng) nogil:
    cdef double delta = <double>b2 / <double>s2 - <double>b1 / <double>s1
    if delta <= 0.0:
        return True
    if temp <= 1e-300:
        return False
    return _u01(rng) < exp(-delta / temp)
