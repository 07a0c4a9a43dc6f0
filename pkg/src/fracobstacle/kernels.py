"""Numba kernels for operator application, energies, and nodewise sweeps.

Conventions shared by all kernels:

* arrays hold interior nodal values only (length m = n_cells - 1);
* ``K`` is the midpoint pair-weight matrix with zero diagonal and ``ncw``
  the additive singularity correction applied to adjacent pairs;
* ``cop`` is the operator prefactor (1 - s) * p, i.e. 4 * kappa_s;
* ``pcode`` selects a fast power branch: 0 -> p=2, 1 -> p=3, 2 -> p=1.5,
  3 -> p=4, 4 -> generic exponent;
* ``pen_code`` selects the zero-order term: 0 none, 1 clamp ramp,
  2 smoothstep, 3 linear;
* ``lower`` is the nodewise admissible floor (-1e308 when unconstrained).

Sweeps run in ascending node order and are strictly sequential, which is
part of the determinism contract.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

NO_LOWER = -1e308


@njit(cache=True, inline="always")
def _phi(t, pcode, pm1):
    # |t|^(p-2) * t
    if pcode == 0:
        return t
    if pcode == 1:
        return t * abs(t)
    if pcode == 2:
        if t >= 0.0:
            return math.sqrt(t)
        return -math.sqrt(-t)
    if pcode == 3:
        return t * t * t
    if t >= 0.0:
        return t**pm1
    return -((-t) ** pm1)


@njit(cache=True, inline="always")
def _powp(t, pcode, p):
    # |t|^p
    a = abs(t)
    if pcode == 0:
        return a * a
    if pcode == 1:
        return a * a * a
    if pcode == 2:
        return a * math.sqrt(a)
    if pcode == 3:
        a2 = a * a
        return a2 * a2
    return a**p


@njit(cache=True, inline="always")
def _pen(t, pen_code, zeta, shift, eps):
    if pen_code == 0 or zeta == 0.0:
        return 0.0
    if pen_code == 3:
        return zeta * (t - shift)
    tau = (t - shift) / eps
    if tau <= 0.0:
        return 0.0
    if tau >= 1.0:
        return zeta
    if pen_code == 1:
        return zeta * tau
    return zeta * tau * tau * (3.0 - 2.0 * tau)


@njit(cache=True)
def _g_nl(K, ncw, T, u, i, t, h, cop, pcode, pm1, pen_code, zeta_i, shift_i, eps, rhs_i):
    """Nodal residual of the nonlocal equation at trial value t for node i."""
    m = u.shape[0]
    S = 0.0
    Ki = K[i]
    for j in range(m):
        S += Ki[j] * _phi(t - u[j], pcode, pm1)
    if i > 0:
        S += ncw * _phi(t - u[i - 1], pcode, pm1)
    if i < m - 1:
        S += ncw * _phi(t - u[i + 1], pcode, pm1)
    return cop * (h * S + T[i] * _phi(t, pcode, pm1)) + _pen(t, pen_code, zeta_i, shift_i, eps) - rhs_i


@njit(cache=True, inline="always")
def _g_loc(u, i, t, h, pcode, pm1, pen_code, zeta_i, shift_i, eps, rhs_i):
    """Nodal residual of the local 3-point equation at trial value t."""
    m = u.shape[0]
    ul = u[i - 1] if i > 0 else 0.0
    ur = u[i + 1] if i < m - 1 else 0.0
    a = (_phi((t - ul) / h, pcode, pm1) - _phi((ur - t) / h, pcode, pm1)) / h
    return a + _pen(t, pen_code, zeta_i, shift_i, eps) - rhs_i


@njit(cache=True, inline="always")
def _pw_linear_root(a, c, lower_i, pen_code, zeta, shift, eps):
    """Root of a*t - c + pen(t) = 0 for the piecewise-linear penalty variants."""
    if pen_code == 0 or zeta == 0.0:
        t = c / a
    elif pen_code == 3:
        t = (c + zeta * shift) / (a + zeta)
    else:
        # clamp ramp: three monotone linear pieces
        if a * shift - c >= 0.0:
            t = c / a
        elif a * (shift + eps) - c + zeta <= 0.0:
            t = (c - zeta) / a
        else:
            t = (c + (zeta / eps) * shift) / (a + zeta / eps)
    if t < lower_i:
        t = lower_i
    return t


@njit(cache=True)
def sweep_nl_lin(K, ncw, T, R, u, lower, rhs, h, cop, D, pen_code, zeta, shift, eps, omega):
    """One ascending sweep for p = 2 with the running row-sum cache R = K_eff @ u."""
    m = u.shape[0]
    maxstep = 0.0
    for i in range(m):
        a = cop * D[i]
        c = cop * h * R[i] + rhs[i]
        root = _pw_linear_root(a, c, lower[i], pen_code, zeta[i], shift[i], eps)
        t = u[i] + omega * (root - u[i])
        if t < lower[i]:
            t = lower[i]
        d = t - u[i]
        if d != 0.0:
            ad = abs(d)
            if ad > maxstep:
                maxstep = ad
            u[i] = t
            Ki = K[i]
            for j in range(m):
                R[j] += Ki[j] * d
            if i > 0:
                R[i - 1] += ncw * d
            if i < m - 1:
                R[i + 1] += ncw * d
    return maxstep


@njit(cache=True)
def sweep_loc_lin(u, lower, rhs, h, pen_code, zeta, shift, eps, omega):
    """One ascending sweep for the local operator at p = 2."""
    m = u.shape[0]
    h2 = h * h
    a = 2.0 / h2
    maxstep = 0.0
    for i in range(m):
        ul = u[i - 1] if i > 0 else 0.0
        ur = u[i + 1] if i < m - 1 else 0.0
        c = (ul + ur) / h2 + rhs[i]
        root = _pw_linear_root(a, c, lower[i], pen_code, zeta[i], shift[i], eps)
        t = u[i] + omega * (root - u[i])
        if t < lower[i]:
            t = lower[i]
        d = t - u[i]
        if d != 0.0:
            ad = abs(d)
            if ad > maxstep:
                maxstep = ad
            u[i] = t
    return maxstep


@njit(cache=True)
def sweep_nl_gen(
    K, ncw, T, u, lower, rhs, h, cop, pcode, pm1, pen_code, zeta, shift, eps, omega, inner_tol, hint
):
    """One ascending sweep for general p: bracketed Illinois root per node."""
    m = u.shape[0]
    maxstep = 0.0
    for i in range(m):
        zi = zeta[i]
        si = shift[i]
        li = lower[i]
        ri = rhs[i]
        t0 = u[i]
        root = t0
        if li > NO_LOWER:
            glo = _g_nl(K, ncw, T, u, i, li, h, cop, pcode, pm1, pen_code, zi, si, eps, ri)
            if glo >= 0.0:
                root = li
            else:
                w = hint[i]
                if w <= 0.0:
                    w = 1e-4 * (1.0 + abs(t0))
                lo = li
                hi = (t0 if t0 > li else li) + w
                ghi = _g_nl(K, ncw, T, u, i, hi, h, cop, pcode, pm1, pen_code, zi, si, eps, ri)
                k = 0
                while ghi < 0.0 and k < 400:
                    lo = hi
                    glo = ghi
                    w *= 2.0
                    hi += w
                    ghi = _g_nl(K, ncw, T, u, i, hi, h, cop, pcode, pm1, pen_code, zi, si, eps, ri)
                    k += 1
                root = _illinois_nl(
                    K, ncw, T, u, i, lo, hi, glo, ghi, h, cop, pcode, pm1, pen_code, zi, si, eps, ri, inner_tol
                )
        else:
            w = hint[i]
            if w <= 0.0:
                w = 1e-4 * (1.0 + abs(t0))
            lo = t0 - w
            hi = t0 + w
            glo = _g_nl(K, ncw, T, u, i, lo, h, cop, pcode, pm1, pen_code, zi, si, eps, ri)
            ghi = _g_nl(K, ncw, T, u, i, hi, h, cop, pcode, pm1, pen_code, zi, si, eps, ri)
            k = 0
            while glo > 0.0 and k < 400:
                hi = lo
                ghi = glo
                w *= 2.0
                lo -= w
                glo = _g_nl(K, ncw, T, u, i, lo, h, cop, pcode, pm1, pen_code, zi, si, eps, ri)
                k += 1
            k = 0
            while ghi < 0.0 and k < 400:
                lo = hi
                glo = ghi
                w *= 2.0
                hi += w
                ghi = _g_nl(K, ncw, T, u, i, hi, h, cop, pcode, pm1, pen_code, zi, si, eps, ri)
                k += 1
            root = _illinois_nl(
                K, ncw, T, u, i, lo, hi, glo, ghi, h, cop, pcode, pm1, pen_code, zi, si, eps, ri, inner_tol
            )
        t = t0 + omega * (root - t0)
        if t < li:
            t = li
        step = abs(t - t0)
        hint[i] = 2.0 * step + 1e-12
        if step > maxstep:
            maxstep = step
        u[i] = t
    return maxstep


@njit(cache=True)
def _illinois_nl(K, ncw, T, u, i, lo, hi, glo, ghi, h, cop, pcode, pm1, pen_code, zi, si, eps, ri, inner_tol):
    if glo >= 0.0:
        return lo
    if ghi <= 0.0:
        return hi
    side = 0
    t = 0.5 * (lo + hi)
    for _ in range(200):
        denom = glo - ghi
        if denom != 0.0:
            t = (glo * hi - ghi * lo) / denom
        if not (lo < t < hi):
            t = 0.5 * (lo + hi)
        gt = _g_nl(K, ncw, T, u, i, t, h, cop, pcode, pm1, pen_code, zi, si, eps, ri)
        if abs(gt) <= inner_tol:
            return t
        if gt < 0.0:
            lo = t
            glo = gt
            if side == -1:
                ghi *= 0.5
            side = -1
        else:
            hi = t
            ghi = gt
            if side == 1:
                glo *= 0.5
            side = 1
        if hi - lo <= 1e-15 * (1.0 + abs(t)):
            return t
    return t


@njit(cache=True)
def sweep_loc_gen(u, lower, rhs, h, pcode, pm1, pen_code, zeta, shift, eps, omega, inner_tol, hint):
    """One ascending sweep for the local operator at general p."""
    m = u.shape[0]
    maxstep = 0.0
    for i in range(m):
        zi = zeta[i]
        si = shift[i]
        li = lower[i]
        ri = rhs[i]
        t0 = u[i]
        root = t0
        if li > NO_LOWER:
            glo = _g_loc(u, i, li, h, pcode, pm1, pen_code, zi, si, eps, ri)
            if glo >= 0.0:
                root = li
            else:
                w = hint[i]
                if w <= 0.0:
                    w = 1e-4 * (1.0 + abs(t0))
                lo = li
                hi = (t0 if t0 > li else li) + w
                ghi = _g_loc(u, i, hi, h, pcode, pm1, pen_code, zi, si, eps, ri)
                k = 0
                while ghi < 0.0 and k < 400:
                    lo = hi
                    glo = ghi
                    w *= 2.0
                    hi += w
                    ghi = _g_loc(u, i, hi, h, pcode, pm1, pen_code, zi, si, eps, ri)
                    k += 1
                root = _illinois_loc(u, i, lo, hi, glo, ghi, h, pcode, pm1, pen_code, zi, si, eps, ri, inner_tol)
        else:
            w = hint[i]
            if w <= 0.0:
                w = 1e-4 * (1.0 + abs(t0))
            lo = t0 - w
            hi = t0 + w
            glo = _g_loc(u, i, lo, h, pcode, pm1, pen_code, zi, si, eps, ri)
            ghi = _g_loc(u, i, hi, h, pcode, pm1, pen_code, zi, si, eps, ri)
            k = 0
            while glo > 0.0 and k < 400:
                hi = lo
                ghi = glo
                w *= 2.0
                lo -= w
                glo = _g_loc(u, i, lo, h, pcode, pm1, pen_code, zi, si, eps, ri)
                k += 1
            k = 0
            while ghi < 0.0 and k < 400:
                lo = hi
                glo = ghi
                w *= 2.0
                hi += w
                ghi = _g_loc(u, i, hi, h, pcode, pm1, pen_code, zi, si, eps, ri)
                k += 1
            root = _illinois_loc(u, i, lo, hi, glo, ghi, h, pcode, pm1, pen_code, zi, si, eps, ri, inner_tol)
        t = t0 + omega * (root - t0)
        if t < li:
            t = li
        step = abs(t - t0)
        hint[i] = 2.0 * step + 1e-12
        if step > maxstep:
            maxstep = step
        u[i] = t
    return maxstep


@njit(cache=True)
def _illinois_loc(u, i, lo, hi, glo, ghi, h, pcode, pm1, pen_code, zi, si, eps, ri, inner_tol):
    if glo >= 0.0:
        return lo
    if ghi <= 0.0:
        return hi
    side = 0
    t = 0.5 * (lo + hi)
    for _ in range(200):
        denom = glo - ghi
        if denom != 0.0:
            t = (glo * hi - ghi * lo) / denom
        if not (lo < t < hi):
            t = 0.5 * (lo + hi)
        gt = _g_loc(u, i, t, h, pcode, pm1, pen_code, zi, si, eps, ri)
        if abs(gt) <= inner_tol:
            return t
        if gt < 0.0:
            lo = t
            glo = gt
            if side == -1:
                ghi *= 0.5
            side = -1
        else:
            hi = t
            ghi = gt
            if side == 1:
                glo *= 0.5
            side = 1
        if hi - lo <= 1e-15 * (1.0 + abs(t)):
            return t
    return t


@njit(cache=True)
def apply_nl(K, ncw, T, u, h, cop, pcode, pm1, out):
    """out_i = operator value at node i (gradient of the discrete energy / h)."""
    m = u.shape[0]
    for i in range(m):
        out[i] = _g_nl(K, ncw, T, u, i, u[i], h, cop, pcode, pm1, 0, 0.0, 0.0, 1.0, 0.0)
    return out


@njit(cache=True)
def residual_nl(K, ncw, T, u, lower, rhs, h, cop, pcode, pm1, pen_code, zeta, shift, eps, vi):
    """Max-norm residual; complementarity form when vi is nonzero."""
    m = u.shape[0]
    res = 0.0
    for i in range(m):
        g = _g_nl(K, ncw, T, u, i, u[i], h, cop, pcode, pm1, pen_code, zeta[i], shift[i], eps, rhs[i])
        if vi != 0:
            slack = u[i] - lower[i]
            v = slack if slack < g else g
            v = abs(v)
        else:
            v = abs(g)
        if v > res:
            res = v
    return res


@njit(cache=True)
def residual_loc(u, lower, rhs, h, pcode, pm1, pen_code, zeta, shift, eps, vi):
    m = u.shape[0]
    res = 0.0
    for i in range(m):
        g = _g_loc(u, i, u[i], h, pcode, pm1, pen_code, zeta[i], shift[i], eps, rhs[i])
        if vi != 0:
            slack = u[i] - lower[i]
            v = slack if slack < g else g
            v = abs(v)
        else:
            v = abs(g)
        if v > res:
            res = v
    return res


@njit(cache=True)
def energy_sums_nl(K, ncw, T, u, pcode, p):
    """Pair sum over unordered pairs (near-corrected) and obstacle tail sum."""
    m = u.shape[0]
    pair = 0.0
    tail = 0.0
    for i in range(m):
        ui = u[i]
        Ki = K[i]
        for j in range(i + 1, m):
            w = Ki[j]
            if j == i + 1:
                w += ncw
            pair += w * _powp(ui - u[j], pcode, p)
        tail += T[i] * _powp(ui, pcode, p)
    return pair, tail


def pcode_of(p: float) -> tuple[int, float]:
    """Fast-path code and p-1 for the power helpers."""
    table = {2.0: 0, 3.0: 1, 1.5: 2, 4.0: 3}
    return table.get(float(p), 4), float(p) - 1.0


def warm_kernels() -> None:
    """Compile every kernel on a tiny problem (first call is slow, then cached)."""
    m = 4
    K = np.zeros((m, m))
    T = np.ones(m)
    u = np.zeros(m)
    z = np.zeros(m)
    lo = np.full(m, NO_LOWER)
    hint = np.full(m, 1e-3)
    out = np.zeros(m)
    R = np.zeros(m)
    for pcode, p in ((0, 2.0), (1, 3.0)):
        pm1 = p - 1.0
        apply_nl(K, 0.0, T, u, 0.1, 1.0, pcode, pm1, out)
        energy_sums_nl(K, 0.0, T, u, pcode, p)
        residual_nl(K, 0.0, T, u, z, z, 0.1, 1.0, pcode, pm1, 0, z, z, 1.0, 1)
        residual_loc(u, z, z, 0.1, pcode, pm1, 0, z, z, 1.0, 1)
        sweep_nl_gen(K, 0.0, T, u, lo, z, 0.1, 1.0, pcode, pm1, 0, z, z, 1.0, 1.0, 1e-10, hint)
        sweep_loc_gen(u, lo, z, 0.1, pcode, pm1, 0, z, z, 1.0, 1.0, 1e-10, hint)
    sweep_nl_lin(K, 0.0, T, R, u, z, z, 0.1, 1.0, T, 0, z, z, 1.0, 1.0)
    sweep_loc_lin(u, z, z, 0.1, 0, z, z, 1.0, 1.0)
