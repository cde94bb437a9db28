"""Pure numpy implementation of the hot kernels.

Same call signatures as the compiled ``_kernels`` extension; selected by
:mod:`dressedtls._backend` when the extension is missing or disabled.
"""
import math

import numpy as np

_RESCALE = 1e250
_SERIES_X = 1e-6
_SQRT3 = math.sqrt(3.0)


def _miller_start(nmax, x):
    top = max(nmax, int(x))
    return 2 * ((top + 16 + int(math.sqrt(160.0 * max(top, 1)))) // 2)


def bessel_table(x, nmax):
    """J_0(x) ... J_nmax(x) by Miller's backward recurrence.

    The recurrence is normalised with ``J_0 + 2 * sum(J_2k) = 1``.
    """
    x = float(x)
    nmax = int(nmax)
    if nmax < 0:
        raise ValueError("nmax must be >= 0")
    return bessel_table_many(np.array([x]), nmax)[0]


def _miller(x, nmax, start):
    tab = np.zeros((x.size, nmax + 1))
    j_next = np.zeros(x.size)
    j_cur = np.full(x.size, 1e-30)
    norm = np.zeros(x.size)
    for k in range(start, 0, -1):
        # j_cur holds J_k, produce J_{k-1}
        j_prev = (2.0 * k / x) * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        km1 = k - 1
        if km1 <= nmax:
            tab[:, km1] = j_cur
        if km1 > 0 and km1 % 2 == 0:
            norm += 2.0 * j_cur
        big = np.abs(j_cur) > _RESCALE
        if np.any(big):
            j_cur[big] /= _RESCALE
            j_next[big] /= _RESCALE
            norm[big] /= _RESCALE
            tab[big] /= _RESCALE
    norm += tab[:, 0]
    return tab / norm[:, None]


def bessel_table_many(xs, nmax):
    """Vectorised :func:`bessel_table`; returns shape ``(len(xs), nmax + 1)``."""
    xs = np.asarray(xs, dtype=float)
    flip = xs < 0
    ax = np.abs(xs)
    out = np.zeros((ax.size, nmax + 1))
    zero = ax == 0.0
    out[zero, 0] = 1.0
    small = (ax < _SERIES_X) & ~zero
    if np.any(small):
        # two-term power series; the recurrence would overflow in one step
        xs_ = ax[small]
        k = np.arange(nmax + 1)
        lead = np.ones((xs_.size, nmax + 1))
        for i in range(1, nmax + 1):
            lead[:, i] = lead[:, i - 1] * (0.5 * xs_ / i)
        out[small] = lead * (1.0 - 0.25 * xs_[:, None] ** 2 / (k + 1))
    live = np.flatnonzero(~zero & ~small)
    if live.size:
        # group by recurrence start so every point sees the same arithmetic
        # as it would alone (results independent of batch composition)
        starts = np.array([_miller_start(nmax, float(v)) for v in ax[live]])
        for start in np.unique(starts):
            idx = live[starts == start]
            out[idx] = _miller(ax[idx], nmax, int(start))
    if np.any(flip):
        sign = np.where(np.arange(nmax + 1) % 2 == 0, 1.0, -1.0)
        out[flip] *= sign
    return out


def dressed_coefficients(alpha, cos_eta, sin2_eta, n, ej_over_f, m_max):
    """Rate coefficients per bias point, linear in the spectral parameters.

    The mixing angle enters through ``cos(eta)`` and ``sin(eta)**2``.

    Returns ``(a_corr, c_rel, c_exc, c_phi, x0, x1, tail)``; see
    :func:`dressedtls.rates.dressed_coefficients` for the meaning of each.
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    ce = np.atleast_1d(np.asarray(cos_eta, dtype=float))
    sin2 = np.atleast_1d(np.asarray(sin2_eta, dtype=float))
    n = np.atleast_1d(np.asarray(n, dtype=np.int64))
    m_max = int(m_max)
    npts = alpha.size
    kmax = m_max + int(n.max(initial=0)) + 1
    # per-point order keeps results independent of the batch
    table = np.zeros((npts, kmax + 1))
    for nn in np.unique(n):
        idx = np.flatnonzero(n == nn)
        table[idx, : m_max + nn + 2] = bessel_table_many(alpha[idx], m_max + int(nn) + 1)
    rows = np.arange(npts)

    def signed(k):
        k = np.asarray(k)
        ak = np.abs(k)
        val = table[rows, ak]
        return np.where((k < 0) & (ak % 2 == 1), -val, val)

    r2 = ej_over_f * ej_over_f
    c_rel = np.zeros(npts)
    c_exc = np.zeros(npts)
    c_phi = np.zeros(npts)
    tail_sum = np.zeros(npts)
    a_sum = np.zeros(npts)
    for m in range(1, m_max + 1):
        jp = signed(m - n)
        jm = signed(-(m + n))
        w = r2 / m
        even, odd = 0.5 * (jp + jm), 0.5 * (jp - jm)
        rel = w * (even + ce * odd) ** 2
        exc = w * (even - ce * odd) ** 2
        phi = 0.25 * w * sin2 * (jp - jm) ** 2
        c_rel += rel
        c_exc += exc
        c_phi += phi
        if m > m_max - 3:
            tail_sum += rel + exc + phi
        a_sum += (jp * jp + signed(-m - n) ** 2) / (m * m)
    total = c_rel + c_exc + c_phi
    tail = np.divide(tail_sum, total, out=np.zeros(npts), where=total > 0)
    a_corr = 1.0 - 0.25 * r2 * a_sum
    j_mn = signed(-n)
    x0 = sin2 * (2.0 * j_mn) ** 2
    x1 = sin2 * (signed(-(1 + n)) + signed(1 - n)) ** 2
    return a_corr, c_rel, c_exc, c_phi, x0, x1, tail


def magnus_propagate(e_ch, e_j, alpha, f_mu, steps):
    """Propagator samples ``U(k T / steps)`` for ``k = 0..steps``.

    Hamiltonian (in Hz) ``-(eps(t)/2) sz - (e_j/2) sx`` with
    ``eps(t) = e_ch + alpha * f_mu * cos(2 pi f_mu t)``; fourth-order Magnus
    step with two Gauss points, exponentiated in closed form.
    """
    steps = int(steps)
    h = 1.0 / (f_mu * steps)
    t0 = np.arange(steps) * h
    g = _SQRT3 / 6.0
    w = 2.0 * math.pi * f_mu
    z1 = -0.5 * (e_ch + alpha * f_mu * np.cos(w * (t0 + (0.5 - g) * h)))
    z2 = -0.5 * (e_ch + alpha * f_mu * np.cos(w * (t0 + (0.5 + g) * h)))
    xk = -0.5 * e_j
    th_z = math.pi * h * (z1 + z2)
    th_x = np.full(steps, 2.0 * math.pi * h * xk)
    th_y = (2.0 * _SQRT3 / 3.0) * math.pi**2 * h * h * xk * (z2 - z1)
    norm = np.sqrt(th_x**2 + th_y**2 + th_z**2)
    cs = np.cos(norm)
    sn = np.divide(np.sin(norm), norm, out=np.ones(steps), where=norm > 0)
    a = (cs - 1j * sn * th_z).tolist()
    b = (-1j * sn * th_x - sn * th_y).tolist()
    cc = (-1j * sn * th_x + sn * th_y).tolist()
    d = (cs + 1j * sn * th_z).tolist()
    out = np.empty((steps + 1, 2, 2), dtype=complex)
    u00, u01, u10, u11 = 1.0 + 0j, 0j, 0j, 1.0 + 0j
    out[0] = ((u00, u01), (u10, u11))
    for k in range(steps):
        a_, b_, c_, d_ = a[k], b[k], cc[k], d[k]
        u00, u01, u10, u11 = (
            a_ * u00 + b_ * u10,
            a_ * u01 + b_ * u11,
            c_ * u00 + d_ * u10,
            c_ * u01 + d_ * u11,
        )
        out[k + 1] = ((u00, u01), (u10, u11))
    return out
