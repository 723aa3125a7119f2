"""Exact maximum-weight matching on complete graphs (Edmonds' blossom algorithm, O(n^3)).

Array-based formulation of the classic primal-dual algorithm (as popularised
by Van Rantwijk's reference implementation), with recursion replaced by
explicit work lists so the whole routine compiles under numba.  Weights are
integers; the dual variables therefore stay integral.

Vertices are ``0..n-1`` and edge ``k`` joins ``eu[k]`` and ``ev[k]``.
Endpoint ``p`` of edge ``k`` is ``2k`` (``eu``) or ``2k + 1`` (``ev``).
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _leaves(b, n, childs, nchilds, out, stack):
    """Write the vertices contained in blossom ``b`` into ``out``; return the count."""
    cnt = 0
    top = 0
    stack[top] = b
    top += 1
    while top > 0:
        top -= 1
        x = stack[top]
        if x < n:
            out[cnt] = x
            cnt += 1
        else:
            for i in range(nchilds[x] - 1, -1, -1):
                stack[top] = childs[x, i]
                top += 1
    return cnt


@njit(cache=True)
def _wrap(j, length):
    return ((j % length) + length) % length


@njit(cache=True)
def max_weight_matching(n, eu, ev, w, maxcardinality=True):
    """Maximum-weight matching; returns ``mate`` (vertex or -1).

    With ``maxcardinality`` the result is the heaviest among the matchings of
    maximum size, otherwise simply the heaviest matching.
    """
    return max_weight_matching_duals(n, eu, ev, w, maxcardinality)[0]


@njit(cache=True)
def max_weight_matching_duals(n, eu, ev, w, maxcardinality=True):
    """Matching plus the final duals: ``(mate, dual, bparent)``.

    ``dual[v]`` for vertices and ``dual[b]`` (b >= n) for blossoms are the
    doubled-weight duals; ``bparent`` gives the blossom nesting.  For a
    non-maxcardinality run an edge (i, j, w) absent from the input may be
    added without changing the optimum iff its slack ``dual[i] + dual[j] - 2w
    + 2 * sum(dual[B] for blossoms B containing both)`` is non-negative.
    """
    nedge = eu.shape[0]
    mate_out = np.full(n, -1, np.int64)
    if n == 0 or nedge == 0:
        return mate_out, np.zeros(2 * n, np.int64), np.full(2 * n, -1, np.int64)
    endpoint = np.empty(2 * nedge, np.int64)
    deg = np.zeros(n, np.int64)
    for k in range(nedge):
        endpoint[2 * k] = eu[k]
        endpoint[2 * k + 1] = ev[k]
        deg[eu[k]] += 1
        deg[ev[k]] += 1
    maxdeg = 0
    for v in range(n):
        if deg[v] > maxdeg:
            maxdeg = deg[v]
    nb = np.empty((n, maxdeg), np.int64)
    fill = np.zeros(n, np.int64)
    for k in range(nedge):
        i = eu[k]
        j = ev[k]
        nb[i, fill[i]] = 2 * k + 1
        fill[i] += 1
        nb[j, fill[j]] = 2 * k
        fill[j] += 1

    maxweight = 0
    for k in range(nedge):
        if w[k] > maxweight:
            maxweight = w[k]

    mate = np.full(n, -1, np.int64)  # endpoint index
    label = np.zeros(2 * n, np.int64)
    labelend = np.full(2 * n, -1, np.int64)
    inblossom = np.arange(n).astype(np.int64)
    bparent = np.full(2 * n, -1, np.int64)
    childs = np.full((2 * n, n), -1, np.int64)
    nchilds = np.zeros(2 * n, np.int64)
    endps = np.full((2 * n, n), -1, np.int64)
    bbase = np.full(2 * n, -1, np.int64)
    for v in range(n):
        bbase[v] = v
    bestedge = np.full(2 * n, -1, np.int64)
    bbe = np.full((2 * n, 2 * n), -1, np.int64)
    nbbe = np.full(2 * n, -1, np.int64)  # -1 means "no list"
    unused = np.empty(n, np.int64)
    nunused = 0
    for b in range(2 * n - 1, n - 1, -1):
        unused[nunused] = b
        nunused += 1
    dual = np.zeros(2 * n, np.int64)
    for v in range(n):
        dual[v] = maxweight
    allow = np.zeros(nedge, np.bool_)
    qcap = 8 * n + 16
    queue = np.empty(qcap, np.int64)
    qlen = 0
    leafbuf = np.empty(n, np.int64)
    leafbuf2 = np.empty(n, np.int64)
    stackbuf = np.empty(2 * n + 2, np.int64)
    pathbuf = np.empty(2 * n + 2, np.int64)
    tmp1 = np.empty(n + 1, np.int64)
    tmp2 = np.empty(n + 1, np.int64)
    bestedgeto = np.full(2 * n, -1, np.int64)
    work_b = np.empty(4 * n + 4, np.int64)
    work_v = np.empty(4 * n + 4, np.int64)
    expst = np.empty(2 * n + 2, np.int64)

    for _stage in range(n):
        label[:] = 0
        bestedge[:] = -1
        nbbe[n:] = -1
        allow[:] = False
        qlen = 0
        for v in range(n):
            if mate[v] == -1 and label[inblossom[v]] == 0:
                # assign_label(v, 1, -1)
                ww = v
                t = 1
                p = -1
                while True:
                    b = inblossom[ww]
                    label[ww] = t
                    label[b] = t
                    labelend[ww] = p
                    labelend[b] = p
                    bestedge[ww] = -1
                    bestedge[b] = -1
                    if t == 1:
                        c = _leaves(b, n, childs, nchilds, leafbuf, stackbuf)
                        for i in range(c):
                            queue[qlen] = leafbuf[i]
                            qlen += 1
                        break
                    base = bbase[b]
                    ww = endpoint[mate[base]]
                    t = 1
                    p = mate[base] ^ 1
        augmented = False
        while True:
            while qlen > 0 and not augmented:
                qlen -= 1
                v = queue[qlen]
                for ii in range(deg[v]):
                    p = nb[v, ii]
                    k = p // 2
                    wv = endpoint[p]
                    if inblossom[v] == inblossom[wv]:
                        continue
                    kslack = 0
                    if not allow[k]:
                        kslack = dual[eu[k]] + dual[ev[k]] - 2 * w[k]
                        if kslack <= 0:
                            allow[k] = True
                    if allow[k]:
                        if label[inblossom[wv]] == 0:
                            # assign_label(wv, 2, p ^ 1)
                            ww = wv
                            t = 2
                            pp = p ^ 1
                            while True:
                                b = inblossom[ww]
                                label[ww] = t
                                label[b] = t
                                labelend[ww] = pp
                                labelend[b] = pp
                                bestedge[ww] = -1
                                bestedge[b] = -1
                                if t == 1:
                                    c = _leaves(b, n, childs, nchilds, leafbuf, stackbuf)
                                    for i in range(c):
                                        queue[qlen] = leafbuf[i]
                                        qlen += 1
                                    break
                                base = bbase[b]
                                ww = endpoint[mate[base]]
                                t = 1
                                pp = mate[base] ^ 1
                        elif label[inblossom[wv]] == 1:
                            # scan_blossom(v, wv)
                            npath = 0
                            base = -1
                            sv = v
                            sw = wv
                            while sv != -1 or sw != -1:
                                b = inblossom[sv]
                                if label[b] & 4:
                                    base = bbase[b]
                                    break
                                pathbuf[npath] = b
                                npath += 1
                                label[b] = 5
                                if labelend[b] == -1:
                                    sv = -1
                                else:
                                    sv = endpoint[labelend[b]]
                                    b = inblossom[sv]
                                    sv = endpoint[labelend[b]]
                                if sw != -1:
                                    tmpv = sv
                                    sv = sw
                                    sw = tmpv
                            for i in range(npath):
                                label[pathbuf[i]] = 1
                            if base >= 0:
                                qlen = _add_blossom(base, k, n, eu, ev, w, endpoint, nb, deg, mate, label, labelend,
                                                    inblossom, bparent, childs, nchilds, endps, bbase, bestedge, bbe,
                                                    nbbe, unused, nunused, dual, queue, qlen, leafbuf, leafbuf2,
                                                    stackbuf, tmp1, tmp2, bestedgeto)
                                nunused -= 1
                            else:
                                _augment_matching(k, n, eu, ev, endpoint, mate, label, labelend, inblossom, bparent,
                                                  childs, nchilds, endps, bbase, tmp1, tmp2, work_b, work_v)
                                augmented = True
                                break
                        elif label[wv] == 0:
                            label[wv] = 2
                            labelend[wv] = p ^ 1
                    elif label[inblossom[wv]] == 1:
                        b = inblossom[v]
                        if bestedge[b] == -1 or kslack < _slack(bestedge[b], eu, ev, w, dual):
                            bestedge[b] = k
                    elif label[wv] == 0:
                        if bestedge[wv] == -1 or kslack < _slack(bestedge[wv], eu, ev, w, dual):
                            bestedge[wv] = k
            if augmented:
                break
            deltatype = -1
            delta = 0
            deltaedge = -1
            deltablossom = -1
            if not maxcardinality:
                deltatype = 1
                delta = dual[0]
                for v in range(1, n):
                    if dual[v] < delta:
                        delta = dual[v]
            for v in range(n):
                if label[inblossom[v]] == 0 and bestedge[v] != -1:
                    d = _slack(bestedge[v], eu, ev, w, dual)
                    if deltatype == -1 or d < delta:
                        delta = d
                        deltatype = 2
                        deltaedge = bestedge[v]
            for b in range(2 * n):
                if bparent[b] == -1 and label[b] == 1 and bestedge[b] != -1:
                    ks = _slack(bestedge[b], eu, ev, w, dual)
                    d = ks // 2
                    if deltatype == -1 or d < delta:
                        delta = d
                        deltatype = 3
                        deltaedge = bestedge[b]
            for b in range(n, 2 * n):
                if bbase[b] >= 0 and bparent[b] == -1 and label[b] == 2 and (deltatype == -1 or dual[b] < delta):
                    delta = dual[b]
                    deltatype = 4
                    deltablossom = b
            if deltatype == -1:
                deltatype = 1
                m = dual[0]
                for v in range(1, n):
                    if dual[v] < m:
                        m = dual[v]
                delta = max(0, m)
            for v in range(n):
                lb = label[inblossom[v]]
                if lb == 1:
                    dual[v] -= delta
                elif lb == 2:
                    dual[v] += delta
            for b in range(n, 2 * n):
                if bbase[b] >= 0 and bparent[b] == -1:
                    if label[b] == 1:
                        dual[b] += delta
                    elif label[b] == 2:
                        dual[b] -= delta
            if deltatype == 1:
                break
            elif deltatype == 2:
                allow[deltaedge] = True
                i = eu[deltaedge]
                j = ev[deltaedge]
                if label[inblossom[i]] == 0:
                    i = j
                queue[qlen] = i
                qlen += 1
            elif deltatype == 3:
                allow[deltaedge] = True
                queue[qlen] = eu[deltaedge]
                qlen += 1
            else:
                qlen, nunused = _expand_blossom(deltablossom, False, n, endpoint, mate, label, labelend, inblossom,
                                                bparent, childs, nchilds, endps, bbase, bestedge, nbbe, unused,
                                                nunused, dual, allow, queue, qlen, leafbuf, stackbuf, expst)
        if not augmented:
            break
        for b in range(n, 2 * n):
            if bparent[b] == -1 and bbase[b] >= 0 and label[b] == 1 and dual[b] == 0:
                qlen, nunused = _expand_blossom(b, True, n, endpoint, mate, label, labelend, inblossom, bparent,
                                                childs, nchilds, endps, bbase, bestedge, nbbe, unused, nunused,
                                                dual, allow, queue, qlen, leafbuf, stackbuf, expst)
    for v in range(n):
        if mate[v] >= 0:
            mate_out[v] = endpoint[mate[v]]
    return mate_out, dual, bparent


@njit(cache=True)
def _slack(k, eu, ev, w, dual):
    return dual[eu[k]] + dual[ev[k]] - 2 * w[k]


@njit(cache=True)
def _add_blossom(base, k, n, eu, ev, w, endpoint, nb, deg, mate, label, labelend, inblossom, bparent, childs,
                 nchilds, endps, bbase, bestedge, bbe, nbbe, unused, nunused, dual, queue, qlen, leafbuf, leafbuf2,
                 stackbuf, tmp1, tmp2, bestedgeto):
    v = eu[k]
    wv = ev[k]
    bb = inblossom[base]
    bv = inblossom[v]
    bw = inblossom[wv]
    b = unused[nunused - 1]
    bbase[b] = base
    bparent[b] = -1
    bparent[bb] = b
    # path from bv back to bb, collected then reversed
    c = 0
    e = 0
    while bv != bb:
        bparent[bv] = b
        tmp1[c] = bv
        c += 1
        tmp2[e] = labelend[bv]
        e += 1
        v = endpoint[labelend[bv]]
        bv = inblossom[v]
    L = 0
    childs[b, L] = bb
    L += 1
    for i in range(c - 1, -1, -1):
        childs[b, L] = tmp1[i]
        L += 1
    E = 0
    for i in range(e - 1, -1, -1):
        endps[b, E] = tmp2[i]
        E += 1
    endps[b, E] = 2 * k
    E += 1
    while bw != bb:
        bparent[bw] = b
        childs[b, L] = bw
        L += 1
        endps[b, E] = labelend[bw] ^ 1
        E += 1
        wv = endpoint[labelend[bw]]
        bw = inblossom[wv]
    nchilds[b] = L
    label[b] = 1
    labelend[b] = labelend[bb]
    dual[b] = 0
    cnt = _leaves(b, n, childs, nchilds, leafbuf, stackbuf)
    for i in range(cnt):
        x = leafbuf[i]
        if label[inblossom[x]] == 2:
            queue[qlen] = x
            qlen += 1
        inblossom[x] = b
    bestedgeto[:] = -1
    for ci in range(L):
        cb = childs[b, ci]
        if nbbe[cb] == -1:
            lc = _leaves(cb, n, childs, nchilds, leafbuf2, stackbuf)
            for li in range(lc):
                x = leafbuf2[li]
                for jj in range(deg[x]):
                    kk = nb[x, jj] // 2
                    _consider(kk, b, eu, ev, w, dual, inblossom, label, bestedgeto)
        else:
            for jj in range(nbbe[cb]):
                _consider(bbe[cb, jj], b, eu, ev, w, dual, inblossom, label, bestedgeto)
        nbbe[cb] = -1
        bestedge[cb] = -1
    m = 0
    for x in range(2 * n):
        if bestedgeto[x] != -1:
            bbe[b, m] = bestedgeto[x]
            m += 1
    nbbe[b] = m
    bestedge[b] = -1
    for i in range(m):
        kk = bbe[b, i]
        if bestedge[b] == -1 or _slack(kk, eu, ev, w, dual) < _slack(bestedge[b], eu, ev, w, dual):
            bestedge[b] = kk
    return qlen


@njit(cache=True)
def _consider(kk, b, eu, ev, w, dual, inblossom, label, bestedgeto):
    i = eu[kk]
    j = ev[kk]
    if inblossom[j] == b:
        j = i
    bj = inblossom[j]
    if bj != b and label[bj] == 1:
        if bestedgeto[bj] == -1 or _slack(kk, eu, ev, w, dual) < _slack(bestedgeto[bj], eu, ev, w, dual):
            bestedgeto[bj] = kk


@njit(cache=True)
def _expand_blossom(b0, endstage, n, endpoint, mate, label, labelend, inblossom, bparent, childs, nchilds, endps,
                    bbase, bestedge, nbbe, unused, nunused, dual, allow, queue, qlen, leafbuf, stackbuf, expst):
    top = 0
    expst[top] = b0
    top += 1
    while top > 0:
        top -= 1
        b = expst[top]
        L = nchilds[b]
        for ci in range(L):
            s = childs[b, ci]
            bparent[s] = -1
            if s < n:
                inblossom[s] = s
            elif endstage and dual[s] == 0:
                expst[top] = s
                top += 1
            else:
                cnt = _leaves(s, n, childs, nchilds, leafbuf, stackbuf)
                for i in range(cnt):
                    inblossom[leafbuf[i]] = s
        if (not endstage) and label[b] == 2:
            entrychild = inblossom[endpoint[labelend[b] ^ 1]]
            j = 0
            for ci in range(L):
                if childs[b, ci] == entrychild:
                    j = ci
                    break
            if j & 1:
                j -= L
                jstep = 1
                endptrick = 0
            else:
                jstep = -1
                endptrick = 1
            p = labelend[b]
            while j != 0:
                label[endpoint[p ^ 1]] = 0
                label[endpoint[endps[b, _wrap(j - endptrick, L)] ^ endptrick ^ 1]] = 0
                # assign_label(endpoint[p ^ 1], 2, p)
                ww = endpoint[p ^ 1]
                t = 2
                pp = p
                while True:
                    bx = inblossom[ww]
                    label[ww] = t
                    label[bx] = t
                    labelend[ww] = pp
                    labelend[bx] = pp
                    bestedge[ww] = -1
                    bestedge[bx] = -1
                    if t == 1:
                        cnt = _leaves(bx, n, childs, nchilds, leafbuf, stackbuf)
                        for i in range(cnt):
                            queue[qlen] = leafbuf[i]
                            qlen += 1
                        break
                    base = bbase[bx]
                    ww = endpoint[mate[base]]
                    t = 1
                    pp = mate[base] ^ 1
                allow[endps[b, _wrap(j - endptrick, L)] // 2] = True
                j += jstep
                p = endps[b, _wrap(j - endptrick, L)] ^ endptrick
                allow[p // 2] = True
                j += jstep
            bv = childs[b, _wrap(j, L)]
            label[endpoint[p ^ 1]] = 2
            label[bv] = 2
            labelend[endpoint[p ^ 1]] = p
            labelend[bv] = p
            bestedge[bv] = -1
            j += jstep
            while childs[b, _wrap(j, L)] != entrychild:
                bv = childs[b, _wrap(j, L)]
                if label[bv] == 1:
                    j += jstep
                    continue
                cnt = _leaves(bv, n, childs, nchilds, leafbuf, stackbuf)
                found = -1
                for i in range(cnt):
                    if label[leafbuf[i]] != 0:
                        found = leafbuf[i]
                        break
                if found >= 0:
                    vv = found
                    label[vv] = 0
                    label[endpoint[mate[bbase[bv]]]] = 0
                    ww = vv
                    t = 2
                    pp = labelend[vv]
                    while True:
                        bx = inblossom[ww]
                        label[ww] = t
                        label[bx] = t
                        labelend[ww] = pp
                        labelend[bx] = pp
                        bestedge[ww] = -1
                        bestedge[bx] = -1
                        if t == 1:
                            cnt2 = _leaves(bx, n, childs, nchilds, leafbuf, stackbuf)
                            for i in range(cnt2):
                                queue[qlen] = leafbuf[i]
                                qlen += 1
                            break
                        base = bbase[bx]
                        ww = endpoint[mate[base]]
                        t = 1
                        pp = mate[base] ^ 1
                j += jstep
        label[b] = -1
        labelend[b] = -1
        nchilds[b] = 0
        bbase[b] = -1
        nbbe[b] = -1
        bestedge[b] = -1
        unused[nunused] = b
        nunused += 1
    return qlen, nunused


@njit(cache=True)
def _augment_blossom(b0, v0, n, endpoint, mate, bparent, childs, nchilds, endps, bbase, tmp1, tmp2, work_b, work_v):
    top = 0
    work_b[top] = b0
    work_v[top] = v0
    top += 1
    while top > 0:
        top -= 1
        b = work_b[top]
        v = work_v[top]
        t = v
        while bparent[t] != b:
            t = bparent[t]
        if t >= n:
            work_b[top] = t
            work_v[top] = v
            top += 1
        L = nchilds[b]
        i = 0
        for ci in range(L):
            if childs[b, ci] == t:
                i = ci
                break
        j = i
        if i & 1:
            j -= L
            jstep = 1
            endptrick = 0
        else:
            jstep = -1
            endptrick = 1
        while j != 0:
            j += jstep
            t = childs[b, _wrap(j, L)]
            p = endps[b, _wrap(j - endptrick, L)] ^ endptrick
            if t >= n:
                work_b[top] = t
                work_v[top] = endpoint[p]
                top += 1
            j += jstep
            t = childs[b, _wrap(j, L)]
            if t >= n:
                work_b[top] = t
                work_v[top] = endpoint[p ^ 1]
                top += 1
            mate[endpoint[p]] = p ^ 1
            mate[endpoint[p ^ 1]] = p
        for ci in range(L):
            tmp1[ci] = childs[b, (ci + i) % L]
            tmp2[ci] = endps[b, (ci + i) % L]
        for ci in range(L):
            childs[b, ci] = tmp1[ci]
            endps[b, ci] = tmp2[ci]
        bbase[b] = v


@njit(cache=True)
def _augment_matching(k, n, eu, ev, endpoint, mate, label, labelend, inblossom, bparent, childs, nchilds, endps,
                      bbase, tmp1, tmp2, work_b, work_v):
    for side in range(2):
        if side == 0:
            s = eu[k]
            p = 2 * k + 1
        else:
            s = ev[k]
            p = 2 * k
        while True:
            bs = inblossom[s]
            if bs >= n:
                _augment_blossom(bs, s, n, endpoint, mate, bparent, childs, nchilds, endps, bbase, tmp1, tmp2,
                                 work_b, work_v)
            mate[s] = p
            if labelend[bs] == -1:
                break
            t = endpoint[labelend[bs]]
            bt = inblossom[t]
            s = endpoint[labelend[bt]]
            j = endpoint[labelend[bt] ^ 1]
            if bt >= n:
                _augment_blossom(bt, j, n, endpoint, mate, bparent, childs, nchilds, endps, bbase, tmp1, tmp2,
                                 work_b, work_v)
            mate[j] = labelend[bt]
            p = labelend[bt] ^ 1


def complete_graph_edges(n: int):
    iu, ju = np.triu_indices(n, 1)
    return iu.astype(np.int64), ju.astype(np.int64)


def min_weight_perfect_matching(cost: np.ndarray) -> np.ndarray:
    """Minimum-cost perfect matching of a symmetric integer cost matrix with an even side."""
    n = cost.shape[0]
    if n % 2:
        raise ValueError("perfect matching needs an even number of vertices")
    eu, ev = complete_graph_edges(n)
    c = cost[eu, ev].astype(np.int64)
    big = int(c.max()) + 1 if c.size else 1
    return max_weight_matching(n, eu, ev, big - c)
