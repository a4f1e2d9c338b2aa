"""Compiled kernels: truncated Taylor jets, metric evaluation and fixed-step flows.

A jet of order n at (x0, y0) is an (n+1, n+1) array ``a`` with
a[p, q] = d^p_x d^q_y f(x0, y0) / (p! q!) for p + q <= n.

Metric data travel as a flat tuple ``P`` built by ``metric.MetricField``:

    0  gens      (M, 4) reduction moves (generators and inverses), rows a, b, c, d
    1  ccx, 2 ccy  Dirichlet center
    3  scale     constant factor of the metric
    4  conf      index of the conformal field, -1 if none
    5  nfields   number of bump scalar fields
    6  b_field, 7 b_amp, 8 b_Q, 9 b_cx, 10 b_cy   orbit-expanded bumps near the domain
    11 t_kind, 12 t_coef, 13 t_field             tensor terms of the perturbation h
    14 nqd, 15 qd_field, 16 qd_ar, 17 qd_ai, 18 qd_br, 19 qd_bi
                                               Poincare terms (A z + B)^-4 of holomorphic fields

g = scale * exp(2 phi) * (g0 + sum_k coef_k T_k) with g0 = (dx^2 + dy^2) / y^2.
"""

import math

import numpy as np
from numba import njit

MAX_REDUCE = 10_000
KIND_CONFORMAL = 0
KIND_HESSIAN = 1
KIND_TRACEFREE_HESSIAN = 2
KIND_ROTATED_HESSIAN = 3
KIND_HOLOMORPHIC = 4


# --- jet algebra -----------------------------------------------------------

@njit(cache=True)
def jet_zero(n):
    return np.zeros((n + 1, n + 1))


@njit(cache=True)
def jet_mul(a, b, n):
    c = np.zeros((n + 1, n + 1))
    for p in range(n + 1):
        for q in range(n + 1 - p):
            s = 0.0
            for i in range(p + 1):
                for j in range(q + 1):
                    s += a[i, j] * b[p - i, q - j]
            c[p, q] = s
    return c


@njit(cache=True)
def jet_dx(a, n):
    out = np.zeros((n + 1, n + 1))
    for p in range(n):
        for q in range(n - p):
            out[p, q] = (p + 1) * a[p + 1, q]
    return out


@njit(cache=True)
def jet_dy(a, n):
    out = np.zeros((n + 1, n + 1))
    for p in range(n):
        for q in range(n - p):
            out[p, q] = (q + 1) * a[p, q + 1]
    return out


@njit(cache=True)
def jet_compose(fd, a, n):
    """Jet of f(a) given the derivatives fd[k] = f^(k)(a[0, 0])."""
    delta = a.copy()
    delta[0, 0] = 0.0
    out = np.zeros((n + 1, n + 1))
    out[0, 0] = fd[0]
    pw = np.zeros((n + 1, n + 1))
    pw[0, 0] = 1.0
    fact = 1.0
    for k in range(1, n + 1):
        pw = jet_mul(pw, delta, n)
        fact *= k
        c = fd[k] / fact
        if c != 0.0:
            for p in range(n + 1):
                for q in range(n + 1 - p):
                    out[p, q] += c * pw[p, q]
    return out


@njit(cache=True)
def jet_exp(a, n):
    e = math.exp(a[0, 0])
    fd = np.full(n + 1, e)
    return jet_compose(fd, a, n)


@njit(cache=True)
def jet_inv_y(y0, n):
    out = np.zeros((n + 1, n + 1))
    for k in range(n + 1):
        out[0, k] = (-1.0) ** k / y0 ** (k + 1)
    return out


@njit(cache=True)
def bump_derivs(s, n):
    """Derivatives of b(s) = exp(1 - 1/(1 - s)) for s < 1, zero beyond."""
    fd = np.zeros(n + 1)
    if s >= 1.0:
        return fd
    u = 1.0 / (1.0 - s)
    b = math.exp(1.0 - u)
    # p_{k+1}(u) = u^2 (p_k'(u) - p_k(u)), p_0 = 1
    coef = np.zeros(2 * n + 3)
    coef[0] = 1.0
    for k in range(n + 1):
        val = 0.0
        for i in range(2 * k, -1, -1):
            val = val * u + coef[i]
        fd[k] = val * b
        nxt = np.zeros(2 * n + 3)
        for i in range(2 * k + 1):
            if i >= 1:
                nxt[i + 1] += i * coef[i]
            nxt[i + 2] -= coef[i]
        coef = nxt
    return fd


@njit(cache=True)
def q_jet(x, y, cx, cy, n):
    """Jet of cosh(d(z, c)) - 1 = |z - c|^2 / (2 y cy) in z = (x, y)."""
    pj = np.zeros((n + 1, n + 1))
    pj[0, 0] = ((x - cx) ** 2 + cy * cy) / (2.0 * cy)
    if n >= 1:
        pj[1, 0] = (x - cx) / cy
    if n >= 2:
        pj[2, 0] = 0.5 / cy
    q = jet_mul(pj, jet_inv_y(y, n), n)
    q[0, 0] += y / (2.0 * cy) - 1.0
    if n >= 1:
        q[0, 1] += 0.5 / cy
    return q


# --- group reduction -------------------------------------------------------

@njit(cache=True)
def qdist(x, y, cx, cy):
    return ((x - cx) ** 2 + (y - cy) ** 2) / (2.0 * y * cy)


@njit(cache=True)
def mobius(a, b, c, d, x, y):
    z = complex(x, y)
    w = (a * z + b) / (c * z + d)
    return w.real, w.imag


@njit(cache=True)
def reduce_point(x, y, gens, ccx, ccy):
    """Greedy Dirichlet reduction; returns (x', y', a, b, c, d, ok)."""
    a, b, c, d = 1.0, 0.0, 0.0, 1.0
    m = gens.shape[0]
    for _ in range(MAX_REDUCE):
        q0 = qdist(x, y, ccx, ccy)
        best = -1
        bq = q0
        for k in range(m):
            wx, wy = mobius(gens[k, 0], gens[k, 1], gens[k, 2], gens[k, 3], x, y)
            q = qdist(wx, wy, ccx, ccy)
            if q < bq - 1e-13 * q0:
                best = k
                bq = q
        if best < 0:
            return x, y, a, b, c, d, True
        ga, gb, gc, gd = gens[best, 0], gens[best, 1], gens[best, 2], gens[best, 3]
        x, y = mobius(ga, gb, gc, gd, x, y)
        a, b, c, d = ga * a + gb * c, ga * b + gb * d, gc * a + gd * c, gc * b + gd * d
    return x, y, a, b, c, d, False


# --- field evaluation ------------------------------------------------------

@njit(cache=True)
def field_jets(x, y, n, P):
    """Jets of all bump fields (nfields, ...) and holomorphic fields (nqd, re/im, ...)."""
    gens, ccx, ccy = P[0], P[1], P[2]
    nfields = P[5]
    b_field, b_amp, b_Q, b_cx, b_cy = P[6], P[7], P[8], P[9], P[10]
    nqd, qd_field, qd_ar, qd_ai, qd_br, qd_bi = P[14], P[15], P[16], P[17], P[18], P[19]

    psi = np.zeros((nfields, n + 1, n + 1))
    hol = np.zeros((nqd, 2, n + 1, n + 1))
    if gens.shape[0] > 0:
        wx, wy, ga, gb, gc, gd, ok = reduce_point(x, y, gens, ccx, ccy)
        if not ok:
            psi[:] = np.nan
            hol[:] = np.nan
            return psi, hol
    else:
        wx, wy, ga, gb, gc, gd = x, y, 1.0, 0.0, 0.0, 1.0

    for k in range(b_amp.shape[0]):
        qw = qdist(wx, wy, b_cx[k], b_cy[k])
        if qw >= b_Q[k]:
            continue
        # pull the center back to the original sheet: q(z, g^-1 c) = q(g z, c)
        cx, cy = mobius(gd, -gb, -gc, ga, b_cx[k], b_cy[k])
        s = q_jet(x, y, cx, cy, n) / b_Q[k]
        fd = bump_derivs(s[0, 0], n)
        psi[b_field[k]] += b_amp[k] * jet_compose(fd, s, n)

    if nqd > 0:
        z = complex(x, y)
        deriv = np.zeros(n + 1, dtype=np.complex128)
        for k in range(qd_ar.shape[0]):
            A0 = complex(qd_ar[k], qd_ai[k])
            B0 = complex(qd_br[k], qd_bi[k])
            A = A0 * ga + B0 * gc
            B = A0 * gb + B0 * gd
            w = A * z + B
            base = 1.0 / (w * w * w * w)
            deriv[:] = 0.0
            fac = 1.0 + 0.0j
            r = 1.0 / w
            for j in range(n + 1):
                deriv[j] = fac * base
                fac *= -(4.0 + j) * A
                base *= r
            f = qd_field[k]
            # d^j Q / j! (dx + i dy)^j expanded in dx^p dy^q
            for j in range(n + 1):
                cj = deriv[j]
                fj = 1.0
                for i in range(2, j + 1):
                    fj *= i
                cj = cj / fj
                binom = 1.0
                ipow = 1.0 + 0.0j
                for q in range(j + 1):
                    val = cj * binom * ipow
                    hol[f, 0, j - q, q] += val.real
                    hol[f, 1, j - q, q] += val.imag
                    binom = binom * (j - q) / (q + 1)
                    ipow *= 1j
    return psi, hol


@njit(cache=True)
def needs_hessian(P):
    t_kind = P[11]
    for k in range(t_kind.shape[0]):
        if t_kind[k] in (KIND_HESSIAN, KIND_TRACEFREE_HESSIAN, KIND_ROTATED_HESSIAN):
            return True
    return False


@njit(cache=True)
def perturbation_jets(x, y, n, P):
    """Jets of phi and of the tensor h = sum coef_k T_k, both of order n."""
    t_kind, t_coef, t_field = P[11], P[12], P[13]
    conf = P[4]
    m = n + 2 if needs_hessian(P) else n
    psi, hol = field_jets(x, y, m, P)
    phi = np.zeros((n + 1, n + 1))
    if conf >= 0:
        phi[:, :] = psi[conf, : n + 1, : n + 1]
        for p in range(n + 1):
            for q in range(n + 1):
                if p + q > n:
                    phi[p, q] = 0.0
    h = np.zeros((3, n + 1, n + 1))
    if t_kind.shape[0] == 0:
        return phi, h
    iy_m = jet_inv_y(y, m)
    iy = jet_inv_y(y, n)
    for k in range(t_kind.shape[0]):
        kind = t_kind[k]
        c = t_coef[k]
        if kind == KIND_HOLOMORPHIC:
            re = hol[t_field[k], 0]
            im = hol[t_field[k], 1]
            for p in range(n + 1):
                for q in range(n + 1 - p):
                    h[0, p, q] += c * re[p, q]
                    h[1, p, q] -= c * im[p, q]
                    h[2, p, q] -= c * re[p, q]
            continue
        f = psi[t_field[k]]
        if kind == KIND_CONFORMAL:
            fj = f[: n + 1, : n + 1].copy()
            for p in range(n + 1):
                for q in range(n + 1):
                    if p + q > n:
                        fj[p, q] = 0.0
            t = jet_mul(fj, jet_mul(iy, iy, n), n)
            h[0] += c * t
            h[2] += c * t
            continue
        fx = jet_dx(f, m)
        fy = jet_dy(f, m)
        fxx = jet_dx(fx, m)
        fxy = jet_dy(fx, m)
        fyy = jet_dy(fy, m)
        hxx = (fxx - jet_mul(fy, iy_m, m))[: n + 1, : n + 1]
        hxy = (fxy + jet_mul(fx, iy_m, m))[: n + 1, : n + 1]
        hyy = (fyy + jet_mul(fy, iy_m, m))[: n + 1, : n + 1]
        if kind == KIND_HESSIAN:
            txx, txy, tyy = hxx, hxy, hyy
        else:
            a0 = 0.5 * (hxx - hyy)
            if kind == KIND_TRACEFREE_HESSIAN:
                txx, txy, tyy = a0, hxy, -a0
            else:
                txx, txy, tyy = hxy, -a0, -hxy
        h[0] += c * txx
        h[1] += c * txy
        h[2] += c * tyy
    for i in range(3):
        for p in range(n + 1):
            for q in range(n + 1):
                if p + q > n:
                    h[i, p, q] = 0.0
    return phi, h


@njit(cache=True)
def metric_jets(x, y, n, P):
    """Jets of (g_xx, g_xy, g_yy) of order n."""
    phi, h = perturbation_jets(x, y, n, P)
    iy = jet_inv_y(y, n)
    g0 = jet_mul(iy, iy, n)
    base = np.zeros((3, n + 1, n + 1))
    base[0] = g0 + h[0]
    base[1] = h[1]
    base[2] = g0 + h[2]
    conf = jet_exp(2.0 * phi, n) * P[3]
    out = np.zeros((3, n + 1, n + 1))
    for i in range(3):
        out[i] = jet_mul(conf, base[i], n)
    return out


@njit(cache=True)
def is_conformal(P):
    return P[11].shape[0] == 0


@njit(cache=True)
def christoffel_from_jets(G):
    """Gamma[k, i, j] from order >= 1 metric jets."""
    g = np.array([[G[0, 0, 0], G[1, 0, 0]], [G[1, 0, 0], G[2, 0, 0]]])
    dg = np.zeros((2, 2, 2))  # dg[l, i, j] = d_l g_ij
    dg[0, 0, 0] = G[0, 1, 0]
    dg[0, 0, 1] = G[1, 1, 0]
    dg[0, 1, 0] = G[1, 1, 0]
    dg[0, 1, 1] = G[2, 1, 0]
    dg[1, 0, 0] = G[0, 0, 1]
    dg[1, 0, 1] = G[1, 0, 1]
    dg[1, 1, 0] = G[1, 0, 1]
    dg[1, 1, 1] = G[2, 0, 1]
    det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
    ginv = np.array([[g[1, 1], -g[0, 1]], [-g[1, 0], g[0, 0]]]) / det
    gam = np.zeros((2, 2, 2))
    for k in range(2):
        for i in range(2):
            for j in range(2):
                s = 0.0
                for l in range(2):
                    s += ginv[k, l] * (dg[i, j, l] + dg[j, i, l] - dg[l, i, j])
                gam[k, i, j] = 0.5 * s
    return gam


@njit(cache=True)
def acceleration(x, y, vx, vy, P):
    if is_conformal(P):
        phi, _ = perturbation_jets(x, y, 1, P)
        sx = phi[1, 0]
        sy = phi[0, 1] - 1.0 / y
        ax = -(sx * vx * vx + 2.0 * sy * vx * vy - sx * vy * vy)
        ay = -(-sy * vx * vx + 2.0 * sx * vx * vy + sy * vy * vy)
        return ax, ay
    gam = christoffel_from_jets(metric_jets(x, y, 1, P))
    v = (vx, vy)
    acc = np.zeros(2)
    for k in range(2):
        s = 0.0
        for i in range(2):
            for j in range(2):
                s += gam[k, i, j] * v[i] * v[j]
        acc[k] = -s
    return acc[0], acc[1]


@njit(cache=True)
def brioschi(G):
    E, F, Gg = G[0, 0, 0], G[1, 0, 0], G[2, 0, 0]
    Ex, Ey = G[0, 1, 0], G[0, 0, 1]
    Fx, Fy = G[1, 1, 0], G[1, 0, 1]
    Gx, Gy = G[2, 1, 0], G[2, 0, 1]
    Eyy = 2.0 * G[0, 0, 2]
    Fxy = G[1, 1, 1]
    Gxx = 2.0 * G[2, 2, 0]
    m1 = np.array([[-0.5 * Eyy + Fxy - 0.5 * Gxx, 0.5 * Ex, Fx - 0.5 * Ey],
                   [Fy - 0.5 * Gx, E, F],
                   [0.5 * Gy, F, Gg]])
    m2 = np.array([[0.0, 0.5 * Ey, 0.5 * Gx],
                   [0.5 * Ey, E, F],
                   [0.5 * Gx, F, Gg]])
    w = E * Gg - F * F
    return (np.linalg.det(m1) - np.linalg.det(m2)) / (w * w)


@njit(cache=True)
def gauss_curvature(x, y, P):
    if is_conformal(P):
        phi, _ = perturbation_jets(x, y, 2, P)
        lap = 2.0 * (phi[2, 0] + phi[0, 2])
        return math.exp(-2.0 * phi[0, 0]) * (-1.0 - y * y * lap) / P[3]
    return brioschi(metric_jets(x, y, 2, P))


@njit(cache=True)
def metric_at(x, y, P):
    G = metric_jets(x, y, 0, P)
    return G[0, 0, 0], G[1, 0, 0], G[2, 0, 0]


@njit(cache=True)
def unit_velocity(x, y, theta, P):
    E, F, Gg = metric_at(x, y, P)
    c, s = math.cos(theta), math.sin(theta)
    nrm = math.sqrt(E * c * c + 2.0 * F * c * s + Gg * s * s)
    return c / nrm, s / nrm


# --- flows -----------------------------------------------------------------

@njit(cache=True)
def _rhs(st, P):
    ax, ay = acceleration(st[0], st[1], st[2], st[3], P)
    return np.array([st[2], st[3], ax, ay])


@njit(cache=True)
def rk4_step(st, h, P):
    k1 = _rhs(st, P)
    k2 = _rhs(st + 0.5 * h * k1, P)
    k3 = _rhs(st + 0.5 * h * k2, P)
    k4 = _rhs(st + h * k3, P)
    return st + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True)
def flow(x, y, vx, vy, h, nsteps, P, ymin, record_curvature):
    """RK4 orbit in the universal cover.

    Returns (states (nsteps+1, 4), curvature at half steps (2 nsteps + 1), ok).
    """
    states = np.zeros((nsteps + 1, 4))
    states[0, 0] = x
    states[0, 1] = y
    states[0, 2] = vx
    states[0, 3] = vy
    ks = np.zeros(2 * nsteps + 1 if record_curvature else 0)
    st = states[0].copy()
    for i in range(nsteps):
        st = rk4_step(st, h, P)
        if not (st[1] > ymin) or not np.isfinite(st[0]):
            return states[: i + 1], ks, False
        states[i + 1] = st
    if record_curvature:
        for i in range(nsteps + 1):
            ks[2 * i] = gauss_curvature(states[i, 0], states[i, 1], P)
        for i in range(nsteps):
            # midpoint state from the cubic Hermite interpolant of the step
            a, b = states[i], states[i + 1]
            xm = 0.5 * (a[0] + b[0]) + 0.125 * h * (a[2] - b[2])
            ym = 0.5 * (a[1] + b[1]) + 0.125 * h * (a[3] - b[3])
            ks[2 * i + 1] = gauss_curvature(xm, ym, P)
    return states, ks, True


@njit(cache=True)
def flow_end(x, y, vx, vy, h, nsteps, P, ymin):
    st = np.array([x, y, vx, vy])
    for _ in range(nsteps):
        st = rk4_step(st, h, P)
        if not (st[1] > ymin) or not np.isfinite(st[0]):
            return st, False
    return st, True


@njit(cache=True)
def flow_curvature_reduced(x, y, vx, vy, h, nsteps, P):
    """Curvature samples at half steps along an orbit kept inside the fundamental domain.

    The state is moved back into the Dirichlet domain after every step.
    """
    gens, ccx, ccy = P[0], P[1], P[2]
    ks = np.zeros(2 * nsteps + 1)
    st = np.array([x, y, vx, vy])
    ks[0] = gauss_curvature(st[0], st[1], P)
    for i in range(nsteps):
        k1 = _rhs(st, P)
        s2 = st + 0.5 * h * k1
        k2 = _rhs(s2, P)
        k3 = _rhs(st + 0.5 * h * k2, P)
        k4 = _rhs(st + h * k3, P)
        nxt = st + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        xm = 0.5 * (st[0] + nxt[0]) + 0.125 * h * (st[2] - nxt[2])
        ym = 0.5 * (st[1] + nxt[1]) + 0.125 * h * (st[3] - nxt[3])
        ks[2 * i + 1] = gauss_curvature(xm, ym, P)
        if gens.shape[0] > 0:
            rx, ry, a, b, c, d, ok = reduce_point(nxt[0], nxt[1], gens, ccx, ccy)
            if not ok:
                ks[2 * i + 2:] = np.nan
                return ks, st
            w = c * complex(nxt[0], nxt[1]) + d
            dv = complex(nxt[2], nxt[3]) / (w * w)
            nxt = np.array([rx, ry, dv.real, dv.imag])
        st = nxt
        ks[2 * i + 2] = gauss_curvature(st[0], st[1], P)
    return ks, st


# --- linear equations along orbits ----------------------------------------

@njit(cache=True)
def jacobi_fundamental(ks, h):
    """Fundamental matrix of J'' + K J = 0 from curvature at half steps."""
    n = (ks.shape[0] - 1) // 2
    m = np.eye(2)
    for col in range(2):
        j, dj = m[0, col], m[1, col]
        for i in range(n):
            k0, km, k1 = ks[2 * i], ks[2 * i + 1], ks[2 * i + 2]
            a1, b1 = dj, -k0 * j
            a2, b2 = dj + 0.5 * h * b1, -km * (j + 0.5 * h * a1)
            a3, b3 = dj + 0.5 * h * b2, -km * (j + 0.5 * h * a2)
            a4, b4 = dj + h * b3, -k1 * (j + h * a3)
            j += h / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
            dj += h / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
        m[0, col], m[1, col] = j, dj
    return m


@njit(cache=True)
def riccati_path(ks, h, u0):
    """u' = -u^2 - K; returns u at whole steps (len n+1)."""
    n = (ks.shape[0] - 1) // 2
    us = np.zeros(n + 1)
    u = u0
    us[0] = u
    for i in range(n):
        k0, km, k1 = ks[2 * i], ks[2 * i + 1], ks[2 * i + 2]
        a1 = -u * u - k0
        t = u + 0.5 * h * a1
        a2 = -t * t - km
        t = u + 0.5 * h * a2
        a3 = -t * t - km
        t = u + h * a3
        a4 = -t * t - k1
        u += h / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
        us[i + 1] = u
    return us


@njit(cache=True)
def riccati_periodic(ks, h, u0, cycles):
    """Run the Riccati flow ``cycles`` times around a periodic curvature record, then once more."""
    u = u0
    for _ in range(cycles):
        us = riccati_path(ks, h, u)
        u = us[-1]
        if not (u > 0.0) or not np.isfinite(u):
            return us
    return riccati_path(ks, h, u)


@njit(cache=True)
def unstable_jacobians(xs, ys, thetas, burn_in, h, P):
    """Endpoint of a burn-in Riccati integration along the past orbit of each tangent."""
    nb = max(1, int(math.ceil(burn_in / h)))
    hh = burn_in / nb
    out = np.zeros(xs.shape[0])
    for i in range(xs.shape[0]):
        vx, vy = unit_velocity(xs[i], ys[i], thetas[i] + math.pi, P)
        ks, _ = flow_curvature_reduced(xs[i], ys[i], vx, vy, hh, nb, P)
        us = riccati_path(ks[::-1].copy(), hh, 1.0)
        out[i] = us[-1]
    return out


@njit(cache=True)
def curvature_many(xs, ys, P):
    out = np.zeros(xs.shape[0])
    for i in range(xs.shape[0]):
        out[i] = gauss_curvature(xs[i], ys[i], P)
    return out


@njit(cache=True)
def metric_jets_many(xs, ys, n, P):
    out = np.zeros((xs.shape[0], 3, n + 1, n + 1))
    for i in range(xs.shape[0]):
        out[i] = metric_jets(xs[i], ys[i], n, P)
    return out


@njit(cache=True)
def perturbation_jets_many(xs, ys, n, P):
    phis = np.zeros((xs.shape[0], n + 1, n + 1))
    hs = np.zeros((xs.shape[0], 3, n + 1, n + 1))
    for i in range(xs.shape[0]):
        phi, h = perturbation_jets(xs[i], ys[i], n, P)
        phis[i] = phi
        hs[i] = h
    return phis, hs
