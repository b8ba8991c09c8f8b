"""Compiled panel sums.  Each routine loops over evaluation points and panels
without forming the point-by-panel matrix."""

import math

import numba
import numpy as np

_INV_2PI = 1.0 / (2.0 * math.pi)


@numba.njit(cache=True, error_model="numpy")
def _log_integral(wr, wi, L):
    # int_0^L ln|w - s| ds in the panel frame
    ur = wr - L
    r1 = math.hypot(wr, wi)
    r2 = math.hypot(ur, wi)
    a = wr * math.log(r1) if r1 > 0.0 else 0.0
    b = ur * math.log(r2) if r2 > 0.0 else 0.0
    theta = 0.0
    if wi != 0.0:
        # arg(w / (w - L))
        theta = math.atan2(wi * ur - wr * wi, wr * ur + wi * wi)
    return a - b - wi * theta - L


@numba.njit(cache=True, error_model="numpy")
def potential_sum(zr, zi, z1r, z1i, tcr, tci, L, sigma):
    m = zr.shape[0]
    n = z1r.shape[0]
    out = np.empty(m)
    for p in range(m):
        acc = 0.0
        for j in range(n):
            dr = zr[p] - z1r[j]
            di = zi[p] - z1i[j]
            wr = dr * tcr[j] - di * tci[j]
            wi = dr * tci[j] + di * tcr[j]
            acc += sigma[j] * _log_integral(wr, wi, L[j])
        out[p] = -acc * _INV_2PI
    return out


@numba.njit(cache=True, error_model="numpy")
def log_matrix(zr, zi, z1r, z1i, tcr, tci, L):
    m = zr.shape[0]
    n = z1r.shape[0]
    out = np.empty((m, n))
    for p in range(m):
        for j in range(n):
            dr = zr[p] - z1r[j]
            di = zi[p] - z1i[j]
            wr = dr * tcr[j] - di * tci[j]
            wi = dr * tci[j] + di * tcr[j]
            out[p, j] = _log_integral(wr, wi, L[j])
    return out


@numba.njit(cache=True, error_model="numpy")
def conj_field_sum(zr, zi, z1r, z1i, tcr, tci, L, sigma):
    """Ex - i Ey as (real, imag) arrays."""
    m = zr.shape[0]
    n = z1r.shape[0]
    fr = np.empty(m)
    fi = np.empty(m)
    for p in range(m):
        ar = 0.0
        ai = 0.0
        for j in range(n):
            dr = zr[p] - z1r[j]
            di = zi[p] - z1i[j]
            wr = dr * tcr[j] - di * tci[j]
            wi = dr * tci[j] + di * tcr[j]
            ur = wr - L[j]
            # log(w / (w - L)) = ln(|w|/|w-L|) + i arg
            lr = 0.5 * math.log((wr * wr + wi * wi) / (ur * ur + wi * wi))
            li = math.atan2(wi * ur - wr * wi, wr * ur + wi * wi)
            s = sigma[j]
            ar += s * (tcr[j] * lr - tci[j] * li)
            ai += s * (tcr[j] * li + tci[j] * lr)
        fr[p] = ar * _INV_2PI
        fi[p] = ai * _INV_2PI
    return fr, fi


@numba.njit(cache=True, error_model="numpy")
def conj_field_derivative_sum(zr, zi, z1r, z1i, tcr, tci, L, sigma):
    """d(Ex - i Ey)/dz as (real, imag) arrays."""
    m = zr.shape[0]
    n = z1r.shape[0]
    fr = np.empty(m)
    fi = np.empty(m)
    for p in range(m):
        ar = 0.0
        ai = 0.0
        for j in range(n):
            dr = zr[p] - z1r[j]
            di = zi[p] - z1i[j]
            wr = dr * tcr[j] - di * tci[j]
            wi = dr * tci[j] + di * tcr[j]
            ur = wr - L[j]
            # q = w (w - L)
            qr = wr * ur - wi * wi
            qi = wr * wi + wi * ur
            # c = -tc^2 L
            cr = -(tcr[j] * tcr[j] - tci[j] * tci[j]) * L[j]
            ci = -(2.0 * tcr[j] * tci[j]) * L[j]
            den = qr * qr + qi * qi
            s = sigma[j] / den
            ar += s * (cr * qr + ci * qi)
            ai += s * (ci * qr - cr * qi)
        fr[p] = ar * _INV_2PI
        fi[p] = ai * _INV_2PI
    return fr, fi
