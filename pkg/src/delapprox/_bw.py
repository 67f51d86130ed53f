"""Numba kernel for incremental Bowyer-Watson insertion (d = 2 or 3).

Flat-array implementation behind the triangulation front end.  Every
in-sphere sign is certified against a forward error bound; the kernel
gives up (``STATUS_TIE``) rather than guess, and the caller reruns the
input through the exact-arithmetic engine.
"""
from __future__ import annotations

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_TIE = 1
STATUS_CAPACITY = 2
STATUS_LOST = 3

_EPS = 2.220446049250313e-16
_INS_ERR2 = 32.0 * _EPS
_INS_ERR3 = 64.0 * _EPS
_ORI_ERR = 16.0 * _EPS


@njit(cache=True)
def _insphere(pts, cells, ci, qx, qy, qz, d):
    """Lifted in-sphere determinant of cell ci against the query point,
    together with its forward error bound."""
    a = cells[ci, 0]
    b = cells[ci, 1]
    c = cells[ci, 2]
    if d == 2:
        adx = pts[a, 0] - qx
        ady = pts[a, 1] - qy
        bdx = pts[b, 0] - qx
        bdy = pts[b, 1] - qy
        cdx = pts[c, 0] - qx
        cdy = pts[c, 1] - qy
        alift = adx * adx + ady * ady
        blift = bdx * bdx + bdy * bdy
        clift = cdx * cdx + cdy * cdy
        det = (
            alift * (bdx * cdy - bdy * cdx)
            - blift * (adx * cdy - ady * cdx)
            + clift * (adx * bdy - ady * bdx)
        )
        perm = (
            alift * (abs(bdx * cdy) + abs(bdy * cdx))
            + blift * (abs(adx * cdy) + abs(ady * cdx))
            + clift * (abs(adx * bdy) + abs(ady * bdx))
        )
        return det, _INS_ERR2 * perm
    e = cells[ci, 3]
    adx = pts[a, 0] - qx
    ady = pts[a, 1] - qy
    adz = pts[a, 2] - qz
    bdx = pts[b, 0] - qx
    bdy = pts[b, 1] - qy
    bdz = pts[b, 2] - qz
    cdx = pts[c, 0] - qx
    cdy = pts[c, 1] - qy
    cdz = pts[c, 2] - qz
    ddx = pts[e, 0] - qx
    ddy = pts[e, 1] - qy
    ddz = pts[e, 2] - qz
    alift = adx * adx + ady * ady + adz * adz
    blift = bdx * bdx + bdy * bdy + bdz * bdz
    clift = cdx * cdx + cdy * cdy + cdz * cdz
    dlift = ddx * ddx + ddy * ddy + ddz * ddz

    mbcd = (
        bdx * (cdy * ddz - cdz * ddy)
        - bdy * (cdx * ddz - cdz * ddx)
        + bdz * (cdx * ddy - cdy * ddx)
    )
    macd = (
        adx * (cdy * ddz - cdz * ddy)
        - ady * (cdx * ddz - cdz * ddx)
        + adz * (cdx * ddy - cdy * ddx)
    )
    mabd = (
        adx * (bdy * ddz - bdz * ddy)
        - ady * (bdx * ddz - bdz * ddx)
        + adz * (bdx * ddy - bdy * ddx)
    )
    mabc = (
        adx * (bdy * cdz - bdz * cdy)
        - ady * (bdx * cdz - bdz * cdx)
        + adz * (bdx * cdy - bdy * cdx)
    )
    det = -alift * mbcd + blift * macd - clift * mabd + dlift * mabc

    pbcd = (
        abs(bdx) * (abs(cdy * ddz) + abs(cdz * ddy))
        + abs(bdy) * (abs(cdx * ddz) + abs(cdz * ddx))
        + abs(bdz) * (abs(cdx * ddy) + abs(cdy * ddx))
    )
    pacd = (
        abs(adx) * (abs(cdy * ddz) + abs(cdz * ddy))
        + abs(ady) * (abs(cdx * ddz) + abs(cdz * ddx))
        + abs(adz) * (abs(cdx * ddy) + abs(cdy * ddx))
    )
    pabd = (
        abs(adx) * (abs(bdy * ddz) + abs(bdz * ddy))
        + abs(ady) * (abs(bdx * ddz) + abs(bdz * ddx))
        + abs(adz) * (abs(bdx * ddy) + abs(bdy * ddx))
    )
    pabc = (
        abs(adx) * (abs(bdy * cdz) + abs(bdz * cdy))
        + abs(ady) * (abs(bdx * cdz) + abs(bdz * cdx))
        + abs(adz) * (abs(bdx * cdy) + abs(bdy * cdx))
    )
    perm = alift * pbcd + blift * pacd + clift * pabd + dlift * pabc
    return det, _INS_ERR3 * perm


@njit(cache=True)
def _facet_orient(pts, cells, ci, skip, qx, qy, qz, d):
    """Orientation determinant of (facet opposite ``skip``, q), with its
    error bound.  Facet vertices keep their order within the cell row,
    so signs for different q against the same facet are comparable.
    """
    if d == 2:
        if skip == 0:
            a = cells[ci, 1]
            b = cells[ci, 2]
        elif skip == 1:
            a = cells[ci, 0]
            b = cells[ci, 2]
        else:
            a = cells[ci, 0]
            b = cells[ci, 1]
        t1 = (pts[b, 0] - pts[a, 0]) * (qy - pts[a, 1])
        t2 = (pts[b, 1] - pts[a, 1]) * (qx - pts[a, 0])
        return t1 - t2, _ORI_ERR * (abs(t1) + abs(t2))
    if skip == 0:
        a = cells[ci, 1]
        b = cells[ci, 2]
        c = cells[ci, 3]
    elif skip == 1:
        a = cells[ci, 0]
        b = cells[ci, 2]
        c = cells[ci, 3]
    elif skip == 2:
        a = cells[ci, 0]
        b = cells[ci, 1]
        c = cells[ci, 3]
    else:
        a = cells[ci, 0]
        b = cells[ci, 1]
        c = cells[ci, 2]
    ux = pts[b, 0] - pts[a, 0]
    uy = pts[b, 1] - pts[a, 1]
    uz = pts[b, 2] - pts[a, 2]
    vx = pts[c, 0] - pts[a, 0]
    vy = pts[c, 1] - pts[a, 1]
    vz = pts[c, 2] - pts[a, 2]
    wx = qx - pts[a, 0]
    wy = qy - pts[a, 1]
    wz = qz - pts[a, 2]
    det = (
        ux * (vy * wz - vz * wy)
        - uy * (vx * wz - vz * wx)
        + uz * (vx * wy - vy * wx)
    )
    perm = (
        abs(ux) * (abs(vy * wz) + abs(vz * wy))
        + abs(uy) * (abs(vx * wz) + abs(vz * wx))
        + abs(uz) * (abs(vx * wy) + abs(vy * wx))
    )
    return det, _ORI_ERR * perm


@njit(cache=True)
def _bad_test(pts, cells, ci, qx, qy, qz, d):
    """Whether q lies strictly inside the circumball of cell ci.

    Returns 1 (inside), 0 (outside), or -1 (sign not certifiable).
    The product det * orient is positive exactly for interior points,
    where orient is the facet-opposite-vertex-0 determinant evaluated
    at vertex 0.
    """
    det, err = _insphere(pts, cells, ci, qx, qy, qz, d)
    if abs(det) <= err:
        return -1
    v0 = cells[ci, 0]
    z0 = pts[v0, 2 % pts.shape[1]] if d == 3 else 0.0
    dv, bv = _facet_orient(pts, cells, ci, 0, pts[v0, 0], pts[v0, 1], z0, d)
    if abs(dv) <= bv:
        return -1
    if det * dv > 0.0:
        return 1
    return 0


@njit(cache=True)
def _walk_to_cell(pts, cells, neighbors, start, qx, qy, qz, d, max_steps):
    """Visibility walk toward the cell containing q.  Returns the cell
    index, or -1 when the point escapes through a hull facet, or -2
    when the walk exceeds its step budget."""
    ci = start
    prev = -1
    for _ in range(max_steps):
        moved = False
        for skip in range(d + 1):
            nb = neighbors[ci, skip]
            if nb == prev and nb != -1:
                continue
            dq, bq = _facet_orient(pts, cells, ci, skip, qx, qy, qz, d)
            opp = cells[ci, skip]
            oz = pts[opp, 2 % pts.shape[1]] if d == 3 else 0.0
            dv, bv = _facet_orient(pts, cells, ci, skip, pts[opp, 0], pts[opp, 1], oz, d)
            if (dq > bq and dv < -bv) or (dq < -bq and dv > bv):
                if nb == -1:
                    return -1
                prev = ci
                ci = nb
                moved = True
                break
        if not moved:
            return ci
    return -2


@njit(cache=True)
def build(pts, n_real, d, order, cells, neighbors, alive, stamp, stack, bf_bad, bf_skip, rkeys):
    """Insert points (in the given order) into the super-simplex mesh.

    ``pts`` holds the n_real input points followed by the d+1 vertices
    of an enclosing simplex.  Returns (status, cell_slots_used).
    """
    npts = pts.shape[0]
    for j in range(d + 1):
        cells[0, j] = n_real + j
        neighbors[0, j] = -1
    alive[0] = 1
    used = 1
    last = 0
    cap = cells.shape[0]
    rcap = rkeys.shape[0]
    max_steps = 64 + 8 * int(npts ** (1.0 / d))

    for oi in range(order.shape[0]):
        ip = order[oi]
        qx = pts[ip, 0]
        qy = pts[ip, 1]
        qz = pts[ip, 2 % pts.shape[1]] if d == 3 else 0.0
        mark = ip + 1

        seed = _walk_to_cell(pts, cells, neighbors, last, qx, qy, qz, d, max_steps)
        if seed == -1:
            return STATUS_LOST, used
        if seed >= 0:
            flag = _bad_test(pts, cells, seed, qx, qy, qz, d)
            if flag == -1:
                return STATUS_TIE, used
            if flag == 0:
                seed = -2  # walk stopped at a cell that is not bad
        if seed == -2:
            # rare near-degenerate walk failure: scan for any bad cell
            seed = -1
            for k in range(used):
                if alive[k]:
                    flag = _bad_test(pts, cells, k, qx, qy, qz, d)
                    if flag == -1:
                        return STATUS_TIE, used
                    if flag == 1:
                        seed = k
                        break
            if seed == -1:
                return STATUS_LOST, used

        # breadth-first cavity: connected cells whose open circumball
        # contains q; everything pushed on the stack is confirmed bad
        top = 0
        stack[top] = seed
        top += 1
        stamp[seed] = mark
        nbad = 0
        nboundary = 0
        bf_cap = bf_bad.shape[0]
        while top > 0:
            top -= 1
            cur = stack[top]
            alive[cur] = 0
            nbad += 1
            for skip in range(d + 1):
                nb = neighbors[cur, skip]
                if nb == -1:
                    if nboundary >= bf_cap:
                        return STATUS_CAPACITY, used
                    bf_bad[nboundary] = cur
                    bf_skip[nboundary] = skip
                    nboundary += 1
                elif alive[nb]:
                    if stamp[nb] == mark:
                        continue  # already queued as bad
                    flag = _bad_test(pts, cells, nb, qx, qy, qz, d)
                    if flag == -1:
                        return STATUS_TIE, used
                    if flag == 1:
                        stamp[nb] = mark
                        stack[top] = nb
                        top += 1
                    else:
                        if nboundary >= bf_cap:
                            return STATUS_CAPACITY, used
                        bf_bad[nboundary] = cur
                        bf_skip[nboundary] = skip
                        nboundary += 1
        if nbad == 0:
            return STATUS_LOST, used
        if used + nboundary > cap or d * nboundary > rcap:
            return STATUS_CAPACITY, used

        # carve: one new cell per boundary facet, vertex 0 = q
        first_new = used
        for bi in range(nboundary):
            bcell = bf_bad[bi]
            bskip = bf_skip[bi]
            nc = used
            used += 1
            cells[nc, 0] = ip
            col = 1
            for j in range(d + 1):
                if j != bskip:
                    cells[nc, col] = cells[bcell, j]
                    col += 1
            outside = neighbors[bcell, bskip]
            neighbors[nc, 0] = outside
            for j in range(1, d + 1):
                neighbors[nc, j] = -1
            alive[nc] = 1
            stamp[nc] = 0
            if outside != -1:
                for j in range(d + 1):
                    if neighbors[outside, j] == bcell:
                        neighbors[outside, j] = nc
                        break

        # glue the new cells along shared ridges; every ridge of the
        # cavity boundary belongs to exactly two boundary facets.
        # rkeys rows: [sorted ridge verts (d-1) ..., cell, slot]
        nrows = 0
        for nc in range(first_new, used):
            for j in range(1, d + 1):
                col = 0
                for jj in range(1, d + 1):
                    if jj != j:
                        rkeys[nrows, col] = cells[nc, jj]
                        col += 1
                if d == 3 and rkeys[nrows, 0] > rkeys[nrows, 1]:
                    tmp = rkeys[nrows, 0]
                    rkeys[nrows, 0] = rkeys[nrows, 1]
                    rkeys[nrows, 1] = tmp
                rkeys[nrows, d - 1] = nc
                rkeys[nrows, d] = j
                nrows += 1
        for i in range(1, nrows):
            j = i
            while j > 0:
                less = False
                for col in range(d - 1):
                    if rkeys[j, col] < rkeys[j - 1, col]:
                        less = True
                        break
                    if rkeys[j, col] > rkeys[j - 1, col]:
                        break
                if not less:
                    break
                for col in range(d + 1):
                    tmp = rkeys[j, col]
                    rkeys[j, col] = rkeys[j - 1, col]
                    rkeys[j - 1, col] = tmp
                j -= 1
        i = 0
        while i + 1 < nrows:
            same = True
            for col in range(d - 1):
                if rkeys[i, col] != rkeys[i + 1, col]:
                    same = False
                    break
            if not same:
                return STATUS_LOST, used
            c1 = rkeys[i, d - 1]
            s1 = rkeys[i, d]
            c2 = rkeys[i + 1, d - 1]
            s2 = rkeys[i + 1, d]
            neighbors[c1, s1] = c2
            neighbors[c2, s2] = c1
            i += 2
        if i != nrows:
            return STATUS_LOST, used

        last = first_new

    return STATUS_OK, used


@njit(cache=True)
def locate_walk(pts, cells, neighbors, queries, out, start):
    """Locate queries in a compacted triangulation by visibility walk.

    out[i] = containing cell, -1 if outside the hull, -2 if the walk
    gave up (the caller resolves those by a circumball scan).  Facet
    ties count as non-separating, so boundary queries land in a cell.
    """
    d = pts.shape[1]
    m = cells.shape[0]
    if m == 0:
        for i in range(queries.shape[0]):
            out[i] = -1
        return
    max_steps = 64 + 8 * int(m ** (1.0 / d))
    cur = start
    if cur < 0 or cur >= m:
        cur = 0
    for i in range(queries.shape[0]):
        qx = queries[i, 0]
        qy = queries[i, 1]
        qz = queries[i, 2 % queries.shape[1]] if d == 3 else 0.0
        ci = cur
        prev = -1
        res = -2
        for _ in range(max_steps):
            moved = False
            for skip in range(d + 1):
                nb = neighbors[ci, skip]
                if nb == prev and nb != -1:
                    continue
                dq, bq = _facet_orient(pts, cells, ci, skip, qx, qy, qz, d)
                opp = cells[ci, skip]
                oz = pts[opp, 2 % pts.shape[1]] if d == 3 else 0.0
                dv, bv = _facet_orient(pts, cells, ci, skip, pts[opp, 0], pts[opp, 1], oz, d)
                if (dq > bq and dv < -bv) or (dq < -bq and dv > bv):
                    if nb == -1:
                        res = -1
                    else:
                        prev = ci
                        ci = nb
                    moved = True
                    break
            if not moved:
                res = ci
                break
            if res == -1:
                break
        out[i] = res
        if res >= 0:
            cur = res
