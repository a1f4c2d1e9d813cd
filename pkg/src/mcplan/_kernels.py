"""Compiled per-lane kernels behind the projection and collision hot paths.

Every kernel walks lanes independently over a ``(d, n)`` block: a lane's
arithmetic never reads another lane, so results are bit-identical under lane
permutation and single-lane replay.  Robots, constraint sets and scenes
arrive as flat array tuples built by :func:`pack_model`,
:func:`pack_constraints` and :func:`pack_scene`.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# joint kinds
J_FIXED, J_REVOLUTE, J_PRISMATIC = 0, 1, 2
# constraint kinds
K_AFFINE, K_TSR, K_RELPOSE, K_CLOSED, K_COM = 0, 1, 2, 3, 4
# lane status
ACTIVE, CONVERGED, DIVERGED, CAPPED = 0, 1, 2, 3
# obstacle kinds (axis-aligned boxes are boxes with identity rotation)
O_SPHERE, O_BOX = 0, 1

TAYLOR = 1e-4
NEAR_PI = 1e-6
PIVOT_TOL = 1e-12


# -- packing (plain numpy, runs once per model / set / scene) -------------


def pack_model(model) -> tuple:
    kinds = {"fixed": J_FIXED, "revolute": J_REVOLUTE, "prismatic": J_PRISMATIC}
    J = len(model.joints)
    H = np.zeros((J, 3, 3, 4))
    for ji, consts in enumerate(model._jconst):
        for s, M in enumerate(consts):
            if M is not None:
                H[ji, s] = M[:3]
    L = len(model.links)
    depth = max((len(a) for a in model.ancestor_joints), default=0)
    anc = np.full((L, max(depth, 1)), -1, dtype=np.int64)
    anc_n = np.zeros(L, dtype=np.int64)
    for li, chain in enumerate(model.ancestor_joints):
        anc[li, : len(chain)] = chain
        anc_n[li] = len(chain)
    mass = np.array([l.mass for l in model.links], dtype=float)
    com = np.array([np.asarray(l.com, dtype=float) for l in model.links]).reshape(L, 3)
    return (
        model.joint_parent_link.astype(np.int64),
        model.joint_child_link.astype(np.int64),
        np.array([kinds[j.kind] for j in model.joints], dtype=np.int64),
        model.q_index.astype(np.int64),
        H,
        np.ascontiguousarray(model._axes, dtype=float),
        anc,
        anc_n,
        mass,
        com,
        model.sphere_links.astype(np.int64),
        np.ascontiguousarray(model.sphere_offsets, dtype=float),
        np.ascontiguousarray(model.sphere_radii, dtype=float),
        model.self_collision_pairs.astype(np.int64).reshape(-1, 2),
        np.ascontiguousarray(model.lower, dtype=float),
        np.ascontiguousarray(model.upper, dtype=float),
        np.array([model.total_mass]),
        np.array([model.world_link, model.dof, L], dtype=np.int64),
    )


def pack_constraints(cset, dof: int) -> tuple:
    """Flatten a ConstraintSet whose members are all built-in kinds."""
    from . import constraints as C

    cs = list(cset.constraints)
    nc = len(cs)
    ck = np.zeros(nc, dtype=np.int64)
    crow = np.zeros(nc + 1, dtype=np.int64)
    cla = np.zeros(nc, dtype=np.int64)
    clb = np.zeros(nc, dtype=np.int64)
    M = np.zeros((max(nc, 1), 3, 4, 4))
    lo = np.zeros((max(nc, 1), 6))
    hi = np.zeros((max(nc, 1), 6))
    act = np.zeros((max(nc, 1), 6), dtype=np.int64)
    par = np.zeros(max(nc, 1))
    tol = np.array(cset.tolerances() or [1.0], dtype=float)
    vmax = max([len(c.vertices) for c in cs if isinstance(c, C.ComPolygonConstraint)] or [1])
    poly = np.zeros((max(nc, 1), vmax, 2))
    npoly = np.zeros(max(nc, 1), dtype=np.int64)
    rows = sum(c.dim for c in cs)
    amat = np.zeros((max(rows, 1), dof))
    bvec = np.zeros(max(rows, 1))
    for i, c in enumerate(cs):
        crow[i + 1] = crow[i] + c.dim
        if type(c) is C.AffineConstraint:
            ck[i] = K_AFFINE
            amat[crow[i] : crow[i + 1]] = c.A
            bvec[crow[i] : crow[i + 1]] = c.b
        elif type(c) is C.TSRConstraint:
            ck[i] = K_TSR
            cla[i] = c.link
            M[i, 0] = c._A
            M[i, 1] = c._B
        elif type(c) is C.RelativePoseConstraint:
            ck[i] = K_RELPOSE
            cla[i], clb[i] = c.link_a, c.link_b
            M[i, 0], M[i, 1], M[i, 2] = c._Oa, c._Ob, c._ref_inv
        elif type(c) is C.ClosedLinkConstraint:
            ck[i] = K_CLOSED
            cla[i], clb[i] = c.link_a, c.link_b
            M[i, 0, :3, 3] = c._pa_link
            M[i, 1, :3, 3] = c._pb_link
            par[i] = c.length
        elif type(c) is C.ComPolygonConstraint:
            ck[i] = K_COM
            poly[i, : len(c.vertices)] = c.vertices
            npoly[i] = len(c.vertices)
        else:
            raise TypeError(f"constraint {type(c).__name__} has no compiled kernel")
        if ck[i] in (K_TSR, K_RELPOSE):
            lo[i], hi[i] = c.bounds[:, 0], c.bounds[:, 1]
            act[i, : c.dim] = c.active
    return (ck, crow, cla, clb, M, lo, hi, act, par, tol, amat, bvec, poly, npoly)


def pack_scene(scene) -> tuple:
    obs = list(scene.obstacles) if scene is not None else []
    n = len(obs)
    kind = np.zeros(max(n, 1), dtype=np.int64)
    center = np.zeros((max(n, 1), 3))
    rot = np.zeros((max(n, 1), 3, 3))
    half = np.zeros((max(n, 1), 3))
    bound = np.zeros(max(n, 1))
    for i, o in enumerate(obs):
        kind[i], center[i], rot[i], half[i], bound[i] = o.packed()
    return kind, center, rot, half, bound, np.array([n], dtype=np.int64)


# -- kinematics -------------------------------------------------------


@njit(cache=True)
def fk_lane(q, mp, T, M):
    """World transforms ``T (L, 3, 4)`` of every link for one configuration."""
    jp, jc, jk, jq, H = mp[0], mp[1], mp[2], mp[3], mp[4]
    w = mp[17][0]
    for i in range(3):
        for k in range(4):
            T[w, i, k] = 1.0 if i == k else 0.0
    for j in range(jp.shape[0]):
        kind = jk[j]
        a = 0.0
        b = 0.0
        if kind == J_REVOLUTE:
            v = q[jq[j]]
            a = math.cos(v)
            b = math.sin(v)
        elif kind == J_PRISMATIC:
            a = q[jq[j]]
        for i in range(3):
            for k in range(4):
                M[i, k] = H[j, 0, i, k] + a * H[j, 1, i, k] + b * H[j, 2, i, k]
        p = jp[j]
        c = jc[j]
        for i in range(3):
            t0 = T[p, i, 0]
            t1 = T[p, i, 1]
            t2 = T[p, i, 2]
            for k in range(4):
                T[c, i, k] = t0 * M[0, k] + t1 * M[1, k] + t2 * M[2, k]
            T[c, i, 3] += T[p, i, 3]


@njit(cache=True)
def compose34(A, B, out):
    """``out = A @ B`` for 3x4 affine blocks (implicit last row 0 0 0 1)."""
    for i in range(3):
        for k in range(4):
            out[i, k] = A[i, 0] * B[0, k] + A[i, 1] * B[1, k] + A[i, 2] * B[2, k]
        out[i, 3] += A[i, 3]


@njit(cache=True)
def add_point_jacobian(T, mp, li, px, py, pz, J, row0, sign):
    """``J[row0:row0+3] += sign * d p / d q`` for a point rigidly on link ``li``."""
    jc, jk, jq, axes, anc, anc_n = mp[1], mp[2], mp[3], mp[5], mp[6], mp[7]
    for m in range(anc_n[li]):
        ji = anc[li, m]
        c = jc[ji]
        ax = axes[ji, 0]
        ay = axes[ji, 1]
        az = axes[ji, 2]
        a0 = T[c, 0, 0] * ax + T[c, 0, 1] * ay + T[c, 0, 2] * az
        a1 = T[c, 1, 0] * ax + T[c, 1, 1] * ay + T[c, 1, 2] * az
        a2 = T[c, 2, 0] * ax + T[c, 2, 1] * ay + T[c, 2, 2] * az
        col = jq[ji]
        if jk[ji] == J_REVOLUTE:
            rx = px - T[c, 0, 3]
            ry = py - T[c, 1, 3]
            rz = pz - T[c, 2, 3]
            J[row0, col] += sign * (a1 * rz - a2 * ry)
            J[row0 + 1, col] += sign * (a2 * rx - a0 * rz)
            J[row0 + 2, col] += sign * (a0 * ry - a1 * rx)
        else:
            J[row0, col] += sign * a0
            J[row0 + 1, col] += sign * a1
            J[row0 + 2, col] += sign * a2


@njit(cache=True)
def add_angular_jacobian(T, mp, li, W, sign):
    jc, jk, jq, axes, anc, anc_n = mp[1], mp[2], mp[3], mp[5], mp[6], mp[7]
    for m in range(anc_n[li]):
        ji = anc[li, m]
        if jk[ji] != J_REVOLUTE:
            continue
        c = jc[ji]
        col = jq[ji]
        for i in range(3):
            W[i, col] += sign * (T[c, i, 0] * axes[ji, 0] + T[c, i, 1] * axes[ji, 1] + T[c, i, 2] * axes[ji, 2])


# -- SO(3) ------------------------------------------------------------


@njit(cache=True)
def log3(R, out):
    wx = 0.5 * (R[2, 1] - R[1, 2])
    wy = 0.5 * (R[0, 2] - R[2, 0])
    wz = 0.5 * (R[1, 0] - R[0, 1])
    s = math.sqrt(wx * wx + wy * wy + wz * wz)
    c = 0.5 * (R[0, 0] + R[1, 1] + R[2, 2] - 1.0)
    theta = math.atan2(s, c)
    if theta < TAYLOR:
        f = 1.0 + theta * theta / 6.0
        out[0] = f * wx
        out[1] = f * wy
        out[2] = f * wz
    elif math.pi - theta < NEAR_PI:
        j = 0
        best = -1.0
        for i in range(3):
            bii = 0.5 * (R[i, i] + 1.0)
            if bii > best:
                best = bii
                j = i
        ux = 0.25 * (R[0, j] + R[j, 0]) + (0.5 if j == 0 else 0.0)
        uy = 0.25 * (R[1, j] + R[j, 1]) + (0.5 if j == 1 else 0.0)
        uz = 0.25 * (R[2, j] + R[j, 2]) + (0.5 if j == 2 else 0.0)
        nrm = math.sqrt(ux * ux + uy * uy + uz * uz)
        if ux * wx + uy * wy + uz * wz < 0.0:
            nrm = -nrm
        out[0] = theta * ux / nrm
        out[1] = theta * uy / nrm
        out[2] = theta * uz / nrm
    else:
        f = theta / s
        out[0] = f * wx
        out[1] = f * wy
        out[2] = f * wz


@njit(cache=True)
def inv_right_jacobian(phi, out):
    x, y, z = phi[0], phi[1], phi[2]
    t2 = x * x + y * y + z * z
    t = math.sqrt(t2)
    if t < TAYLOR:
        coef = 1.0 / 12.0 + t2 / 720.0
    else:
        coef = 1.0 / t2 - (1.0 + math.cos(t)) / (2.0 * t * math.sin(t))
    K = ((0.0, -z, y), (z, 0.0, -x), (-y, x, 0.0))
    for i in range(3):
        for j in range(3):
            kk = K[i][0] * K[0][j] + K[i][1] * K[1][j] + K[i][2] * K[2][j]
            out[i, j] = (1.0 if i == j else 0.0) + 0.5 * K[i][j] + coef * kk


# -- constraints ------------------------------------------------------


@njit(cache=True)
def _clamp(v, lo, hi):
    return max(0.0, v - hi) + min(0.0, v - lo)


@njit(cache=True)
def eval_constraint(c, q, T, mp, cp, r, J, want_jac, S):
    """Residual rows of constraint ``c`` into ``r[:k]`` (and ``J[:k]``).

    ``S`` holds scratch: ``S[0]`` 3x4 blocks, ``S[1]`` (3, d) blocks.
    """
    ck, crow, cla, clb, Mc, lo, hi, act = cp[0], cp[1], cp[2], cp[3], cp[4], cp[5], cp[6], cp[7]
    k = crow[c + 1] - crow[c]
    d = q.shape[0]
    X, Y = S[0], S[1]
    disp = S[2]
    if want_jac:
        for i in range(k):
            for j in range(d):
                J[i, j] = 0.0
    kind = ck[c]
    if kind == K_AFFINE:
        amat, bvec = cp[10], cp[11]
        for i in range(k):
            row = crow[c] + i
            acc = 0.0
            for j in range(d):
                acc += amat[row, j] * q[j]
                if want_jac:
                    J[i, j] = amat[row, j]
            r[i] = acc - bvec[row]
    elif kind == K_TSR or kind == K_RELPOSE:
        # X[0] world pose of the displaced frame (TSR) / frame b (relpose)
        # X[1] scratch, X[2] error transform; disp = [t; log R]
        if kind == K_TSR:
            la = cla[c]
            compose34(T[la], Mc[c, 1], X[0])
            compose34(Mc[c, 0], X[0], X[2])
        else:
            la = cla[c]
            lb = clb[c]
            compose34(T[la], Mc[c, 0], X[1])
            compose34(T[lb], Mc[c, 1], X[0])
            # rel = Ta^-1 Tb into X[3]
            for i in range(3):
                for kk in range(3):
                    X[3, i, kk] = X[1, 0, i] * X[0, 0, kk] + X[1, 1, i] * X[0, 1, kk] + X[1, 2, i] * X[0, 2, kk]
                X[3, i, 3] = (
                    X[1, 0, i] * (X[0, 0, 3] - X[1, 0, 3])
                    + X[1, 1, i] * (X[0, 1, 3] - X[1, 1, 3])
                    + X[1, 2, i] * (X[0, 2, 3] - X[1, 2, 3])
                )
            compose34(Mc[c, 2], X[3], X[2])
        E = X[2]
        disp[0] = E[0, 3]
        disp[1] = E[1, 3]
        disp[2] = E[2, 3]
        log3(E[:, :3], disp[3:6])
        has_pos = False
        has_rot = False
        for i in range(k):
            comp = act[c, i]
            r[i] = _clamp(disp[comp], lo[c, comp], hi[c, comp])
            if comp < 3:
                has_pos = True
            else:
                has_rot = True
        if not want_jac:
            return k
        P = Y[0]
        if has_pos:
            for i in range(3):
                for j in range(d):
                    P[i, j] = 0.0
            px, py, pz = X[0, 0, 3], X[0, 1, 3], X[0, 2, 3]
            if kind == K_TSR:
                add_point_jacobian(T, mp, la, px, py, pz, P, 0, 1.0)
                A = Mc[c, 0]
            else:
                add_point_jacobian(T, mp, lb, px, py, pz, P, 0, 1.0)
                add_point_jacobian(T, mp, la, px, py, pz, P, 0, -1.0)
                # A = ref_inv_R @ Ra^T into X[3][:, :3]
                for i in range(3):
                    for kk in range(3):
                        X[3, i, kk] = (
                            Mc[c, 2, i, 0] * X[1, kk, 0] + Mc[c, 2, i, 1] * X[1, kk, 1] + Mc[c, 2, i, 2] * X[1, kk, 2]
                        )
                A = X[3]
            for i in range(k):
                comp = act[c, i]
                if comp < 3:
                    for j in range(d):
                        J[i, j] = A[comp, 0] * P[0, j] + A[comp, 1] * P[1, j] + A[comp, 2] * P[2, j]
        if has_rot:
            Wm = Y[1]
            for i in range(3):
                for j in range(d):
                    Wm[i, j] = 0.0
            if kind == K_TSR:
                add_angular_jacobian(T, mp, la, Wm, 1.0)
            else:
                add_angular_jacobian(T, mp, lb, Wm, 1.0)
                add_angular_jacobian(T, mp, la, Wm, -1.0)
            Jr = S[3]
            inv_right_jacobian(disp[3:6], Jr)
            # G = Jr^-1 R_w^T  (R_w = rotation of X[0])
            G = S[4]
            for i in range(3):
                for kk in range(3):
                    G[i, kk] = Jr[i, 0] * X[0, kk, 0] + Jr[i, 1] * X[0, kk, 1] + Jr[i, 2] * X[0, kk, 2]
            for i in range(k):
                comp = act[c, i]
                if comp >= 3:
                    g = comp - 3
                    for j in range(d):
                        J[i, j] = G[g, 0] * Wm[0, j] + G[g, 1] * Wm[1, j] + G[g, 2] * Wm[2, j]
        for i in range(k):
            comp = act[c, i]
            v = disp[comp]
            if not (v >= hi[c, comp] or v <= lo[c, comp]):
                for j in range(d):
                    J[i, j] = 0.0
    elif kind == K_CLOSED:
        la = cla[c]
        lb = clb[c]
        compose34(T[la], Mc[c, 0], X[0])
        compose34(T[lb], Mc[c, 1], X[1])
        dx = X[0, 0, 3] - X[1, 0, 3]
        dy = X[0, 1, 3] - X[1, 1, 3]
        dz = X[0, 2, 3] - X[1, 2, 3]
        dist = math.sqrt(dx * dx + dy * dy + dz * dz)
        r[0] = dist - cp[8][c]
        if want_jac and la != lb and dist > 1e-12:
            P = Y[0]
            for i in range(3):
                for j in range(d):
                    P[i, j] = 0.0
            add_point_jacobian(T, mp, la, X[0, 0, 3], X[0, 1, 3], X[0, 2, 3], P, 0, 1.0)
            add_point_jacobian(T, mp, lb, X[1, 0, 3], X[1, 1, 3], X[1, 2, 3], P, 0, -1.0)
            for j in range(d):
                J[0, j] = (dx * P[0, j] + dy * P[1, j] + dz * P[2, j]) / dist
    elif kind == K_COM:
        mass, com = mp[8], mp[9]
        total = mp[16][0]
        P = Y[0]
        if want_jac:
            for i in range(3):
                for j in range(d):
                    P[i, j] = 0.0
        cx = 0.0
        cy = 0.0
        for li in range(mass.shape[0]):
            m = mass[li]
            if m <= 0.0:
                continue
            lx, ly, lz = com[li, 0], com[li, 1], com[li, 2]
            px = T[li, 0, 0] * lx + T[li, 0, 1] * ly + T[li, 0, 2] * lz + T[li, 0, 3]
            py = T[li, 1, 0] * lx + T[li, 1, 1] * ly + T[li, 1, 2] * lz + T[li, 1, 3]
            pz = T[li, 2, 0] * lx + T[li, 2, 1] * ly + T[li, 2, 2] * lz + T[li, 2, 3]
            cx += m * px
            cy += m * py
            if want_jac:
                add_point_jacobian(T, mp, li, px, py, pz, P, 0, m / total)
        cx /= total
        cy /= total
        poly, nv = cp[12][c], cp[13][c]
        inside = True
        for e in range(nv):
            ax, ay = poly[e, 0], poly[e, 1]
            bx, by = poly[(e + 1) % nv, 0], poly[(e + 1) % nv, 1]
            if (bx - ax) * (cy - ay) - (by - ay) * (cx - ax) < 0.0:
                inside = False
        if inside:
            r[0] = 0.0
            r[1] = 0.0
            return k
        best = np.inf
        nx = 0.0
        ny = 0.0
        bt = 0.0
        ex_best = 0.0
        ey_best = 0.0
        for e in range(nv):
            ax, ay = poly[e, 0], poly[e, 1]
            ex = poly[(e + 1) % nv, 0] - ax
            ey = poly[(e + 1) % nv, 1] - ay
            t = ((cx - ax) * ex + (cy - ay) * ey) / (ex * ex + ey * ey)
            t = min(1.0, max(0.0, t))
            qx = ax + t * ex
            qy = ay + t * ey
            dd = (cx - qx) ** 2 + (cy - qy) ** 2
            if dd < best:
                best = dd
                nx, ny, bt = qx, qy, t
                ex_best, ey_best = ex, ey
        r[0] = cx - nx
        r[1] = cy - ny
        if want_jac:
            if 0.0 < bt < 1.0:
                ln = math.sqrt(ex_best * ex_best + ey_best * ey_best)
                ux = ex_best / ln
                uy = ey_best / ln
                p00, p01, p11 = 1.0 - ux * ux, -ux * uy, 1.0 - uy * uy
            else:
                p00, p01, p11 = 1.0, 0.0, 1.0
            for j in range(d):
                J[0, j] = p00 * P[0, j] + p01 * P[1, j]
                J[1, j] = p01 * P[0, j] + p11 * P[1, j]
    return k


# -- damped least squares ------------------------------------------------


@njit(cache=True)
def chol_solve_inplace(A, m, b, x, L):
    """Factor the leading ``m x m`` block of ``A`` and solve into ``x``.

    Returns True when some pivot fell below tolerance (unit pivot substituted).
    """
    singular = False
    for j in range(m):
        s = A[j, j]
        for p in range(j):
            s -= L[j, p] * L[j, p]
        if s < PIVOT_TOL:
            singular = True
            s = 1.0
        ljj = math.sqrt(s)
        L[j, j] = ljj
        for i in range(j + 1, m):
            s2 = A[i, j]
            for p in range(j):
                s2 -= L[i, p] * L[j, p]
            L[i, j] = s2 / ljj
    for i in range(m):
        s = b[i]
        for p in range(i):
            s -= L[i, p] * x[p]
        x[i] = s / L[i, i]
    for i in range(m - 1, -1, -1):
        s = x[i]
        for p in range(i + 1, m):
            s -= L[p, i] * x[p]
        x[i] = s / L[i, i]
    return singular


@njit(cache=True)
def damped_step_lane(J, r, k, d, lam, mode, dq, A, L, y, g):
    """``dq`` (length d) for one lane; mode 1 inner, 2 outer, 0 auto."""
    inner = (k < d) if mode == 0 else (mode == 1)
    if inner:
        for i in range(k):
            for j in range(i + 1):
                s = 0.0
                for p in range(d):
                    s += J[i, p] * J[j, p]
                A[i, j] = s
                A[j, i] = s
            A[i, i] += lam
        singular = chol_solve_inplace(A, k, r, y, L)
        for p in range(d):
            s = 0.0
            for i in range(k):
                s += J[i, p] * y[i]
            dq[p] = s
    else:
        for i in range(d):
            for j in range(i + 1):
                s = 0.0
                for p in range(k):
                    s += J[p, i] * J[p, j]
                A[i, j] = s
                A[j, i] = s
            A[i, i] += lam
        for i in range(d):
            s = 0.0
            for p in range(k):
                s += J[p, i] * r[p]
            g[i] = s
        singular = chol_solve_inplace(A, d, g, dq, L)
    return singular


# -- projection ----------------------------------------------------------


@njit(cache=True)
def _scratch(mp, cp, d):
    L = mp[17][2]
    T = np.empty((L, 3, 4))
    M = np.empty((3, 4))
    kmax = 1
    crow = cp[1]
    for c in range(crow.shape[0] - 1):
        kmax = max(kmax, crow[c + 1] - crow[c])
    X = np.empty((4, 3, 4))
    Y = np.empty((2, 3, d))
    disp = np.empty(6)
    Jr = np.empty((3, 3))
    G = np.empty((3, 3))
    return T, M, kmax, (X, Y, disp, Jr, G)


@njit(cache=True)
def _converged_from(c0, q, T, mp, cp, r, Jb, S, nc):
    tol = cp[9]
    for c in range(c0, nc):
        k = eval_constraint(c, q, T, mp, cp, r, Jb, False, S)
        for i in range(k):
            if not abs(r[i]) <= tol[c]:
                return False
    return True


@njit(cache=True)
def project_kernel(Q, mp, cp, eps_unused, lam, alpha, max_step, max_iter, mode, stop_first, status, iters):
    """Cyclic LM projection of every lane of ``Q`` in place.

    Returns the first lane to converge when ``stop_first`` (projectAny),
    otherwise -1.  Per-lane ``status``/``iters`` are filled in.
    """
    d, n = Q.shape
    nc = cp[0].shape[0]
    tol = cp[9]
    crow = cp[1]
    T, M, kmax, S = _scratch(mp, cp, d)
    r = np.empty(kmax)
    Jb = np.empty((kmax, d))
    q = np.empty(d)
    q0 = np.empty(d)
    dq = np.empty(d)
    dim = max(kmax, d)
    A = np.empty((dim, dim))
    L = np.zeros((dim, dim))
    y = np.empty(dim)
    g = np.empty(dim)
    for lane in range(n):
        status[lane] = ACTIVE
        iters[lane] = 0
    first = -1
    for it in range(max_iter + 1):
        any_active = False
        for lane in range(n):
            if status[lane] != ACTIVE:
                continue
            for j in range(d):
                q[j] = Q[j, lane]
            fk_lane(q, mp, T, M)
            # the first constraint is evaluated with its Jacobian so the
            # descent below can reuse it when that is what failed
            fresh = False
            done = True
            if nc > 0:
                k = eval_constraint(0, q, T, mp, cp, r, Jb, True, S)
                for i in range(k):
                    if not abs(r[i]) <= tol[0]:
                        done = False
                        fresh = True
                        break
            if done and nc > 1:
                done = _converged_from(1, q, T, mp, cp, r, Jb, S, nc)
            if done:
                status[lane] = CONVERGED
                iters[lane] = it
                if stop_first:
                    first = lane
                    break
                continue
            if it == max_iter:
                status[lane] = CAPPED
                iters[lane] = it
                continue
            # one cycle: a damped step toward each constraint in declared order
            for j in range(d):
                q0[j] = q[j]
            bad = False
            for c in range(nc):
                if c > 0:
                    fk_lane(q, mp, T, M)
                if c > 0 or not fresh:
                    k = eval_constraint(c, q, T, mp, cp, r, Jb, True, S)
                else:
                    k = crow[1] - crow[0]
                if k == 0:
                    continue
                if damped_step_lane(Jb, r, k, d, lam, mode, dq, A, L, y, g):
                    bad = True
                for j in range(d):
                    q[j] -= alpha * dq[j]
            step = 0.0
            for j in range(d):
                step += (q[j] - q0[j]) ** 2
            step = math.sqrt(step)
            iters[lane] = it + 1
            if bad or not (step <= max_step):
                status[lane] = DIVERGED
                continue
            for j in range(d):
                Q[j, lane] = q[j]
            any_active = True
        if first >= 0 or not any_active:
            break
    return first


@njit(cache=True)
def descent_step_kernel(Q, mp, cp, lam, alpha, mode, delta, singular):
    """One full cyclic sweep per lane; ``delta = working - Q``."""
    d, n = Q.shape
    nc = cp[0].shape[0]
    T, M, kmax, S = _scratch(mp, cp, d)
    r = np.empty(kmax)
    Jb = np.empty((kmax, d))
    q = np.empty(d)
    dq = np.empty(d)
    dim = max(kmax, d)
    A = np.empty((dim, dim))
    L = np.zeros((dim, dim))
    y = np.empty(dim)
    g = np.empty(dim)
    for lane in range(n):
        for j in range(d):
            q[j] = Q[j, lane]
        singular[lane] = False
        for c in range(nc):
            fk_lane(q, mp, T, M)
            k = eval_constraint(c, q, T, mp, cp, r, Jb, True, S)
            if k == 0:
                continue
            if damped_step_lane(Jb, r, k, d, lam, mode, dq, A, L, y, g):
                singular[lane] = True
            for j in range(d):
                q[j] -= alpha * dq[j]
        for j in range(d):
            delta[j, lane] = q[j] - Q[j, lane]


@njit(cache=True)
def residual_kernel(Q, mp, cp, R, Jout, want_jac):
    """Stacked residual ``R (k, n)`` and optional Jacobian ``Jout (k, d, n)``."""
    d, n = Q.shape
    nc = cp[0].shape[0]
    T, M, kmax, S = _scratch(mp, cp, d)
    r = np.empty(kmax)
    Jb = np.empty((kmax, d))
    q = np.empty(d)
    crow = cp[1]
    for lane in range(n):
        for j in range(d):
            q[j] = Q[j, lane]
        fk_lane(q, mp, T, M)
        for c in range(nc):
            k = eval_constraint(c, q, T, mp, cp, r, Jb, want_jac, S)
            for i in range(k):
                R[crow[c] + i, lane] = r[i]
                if want_jac:
                    for j in range(d):
                        Jout[crow[c] + i, j, lane] = Jb[i, j]


@njit(cache=True)
def fk_kernel(Q, mp, out):
    """Link transforms ``out (L, 3, 4, n)`` for every lane."""
    d, n = Q.shape
    L = mp[17][2]
    T = np.empty((L, 3, 4))
    M = np.empty((3, 4))
    q = np.empty(d)
    for lane in range(n):
        for j in range(d):
            q[j] = Q[j, lane]
        fk_lane(q, mp, T, M)
        for li in range(L):
            for i in range(3):
                for k in range(4):
                    out[li, i, k, lane] = T[li, i, k]


# -- collision ---------------------------------------------------------------


@njit(cache=True)
def sphere_box_clearance(cx, cy, cz, radius, center, R, half):
    """Signed distance from a sphere surface to an oriented box."""
    dx = cx - center[0]
    dy = cy - center[1]
    dz = cz - center[2]
    outside = 0.0
    inside = -np.inf
    for i in range(3):
        p = R[0, i] * dx + R[1, i] * dy + R[2, i] * dz
        e = abs(p) - half[i]
        if e > 0.0:
            outside += e * e
        inside = max(inside, e)
    return math.sqrt(outside) + min(inside, 0.0) - radius


@njit(cache=True)
def _lane_clearance(q, mp, sc, T, M, C, margin, early):
    """Minimum clearance of one configuration; stops below ``margin`` if ``early``."""
    sl, so, sr, pairs = mp[10], mp[11], mp[12], mp[13]
    kind, center, rot, half, bound = sc[0], sc[1], sc[2], sc[3], sc[4]
    nobs = sc[5][0]
    fk_lane(q, mp, T, M)
    best = np.inf
    for s in range(sl.shape[0]):
        li = sl[s]
        for i in range(3):
            C[s, i] = T[li, i, 0] * so[s, 0] + T[li, i, 1] * so[s, 1] + T[li, i, 2] * so[s, 2] + T[li, i, 3]
    for s in range(sl.shape[0]):
        rs = sr[s]
        for o in range(nobs):
            dx = C[s, 0] - center[o, 0]
            dy = C[s, 1] - center[o, 1]
            dz = C[s, 2] - center[o, 2]
            cdist = math.sqrt(dx * dx + dy * dy + dz * dz)
            # bounding-sphere pre-check
            if early and cdist - bound[o] - rs >= margin:
                continue
            if kind[o] == O_SPHERE:
                clr = cdist - (rs + half[o, 0])
            else:
                clr = sphere_box_clearance(C[s, 0], C[s, 1], C[s, 2], rs, center[o], rot[o], half[o])
            if clr < best:
                best = clr
                if early and best < margin:
                    return best
    for p in range(pairs.shape[0]):
        a = pairs[p, 0]
        b = pairs[p, 1]
        dx = C[a, 0] - C[b, 0]
        dy = C[a, 1] - C[b, 1]
        dz = C[a, 2] - C[b, 2]
        clr = math.sqrt(dx * dx + dy * dy + dz * dz) - (sr[a] + sr[b])
        if clr < best:
            best = clr
            if early and best < margin:
                return best
    return best


@njit(cache=True)
def valid_kernel(Q, mp, sc, margin, out):
    """``out[lane]``: within limits and clearance >= margin everywhere."""
    d, n = Q.shape
    L = mp[17][2]
    T = np.empty((L, 3, 4))
    M = np.empty((3, 4))
    C = np.empty((max(mp[10].shape[0], 1), 3))
    q = np.empty(d)
    lower, upper = mp[14], mp[15]
    for lane in range(n):
        ok = True
        for j in range(d):
            q[j] = Q[j, lane]
            if not (lower[j] <= q[j] <= upper[j]):
                ok = False
        if ok:
            ok = _lane_clearance(q, mp, sc, T, M, C, margin, True) >= margin
        out[lane] = ok


@njit(cache=True)
def clearance_kernel(Q, mp, sc, out, limits_ok):
    d, n = Q.shape
    L = mp[17][2]
    T = np.empty((L, 3, 4))
    M = np.empty((3, 4))
    C = np.empty((max(mp[10].shape[0], 1), 3))
    q = np.empty(d)
    lower, upper = mp[14], mp[15]
    for lane in range(n):
        ok = True
        for j in range(d):
            q[j] = Q[j, lane]
            if not (lower[j] <= q[j] <= upper[j]):
                ok = False
        limits_ok[lane] = ok
        out[lane] = _lane_clearance(q, mp, sc, T, M, C, 0.0, False)
