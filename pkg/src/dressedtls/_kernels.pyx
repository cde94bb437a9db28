# cython: language_level=3
"""Compiled hot kernels: Bessel tables, dressed-rate coefficients, Magnus steps.

Mirrors ``_kernels_py`` function for function.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, cos, sin, fabs, M_PI
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef double _RESCALE = 1e250
cdef double _SERIES_X = 1e-6
cdef double _SQRT3 = 1.7320508075688772


cdef inline int _miller_start(int nmax, double x) noexcept nogil:
    cdef int top = nmax
    if <int>x > top:
        top = <int>x
    cdef int t1 = top if top > 1 else 1
    return 2 * ((top + 16 + <int>sqrt(160.0 * t1)) // 2)


cdef void _miller_fill(double ax, int nmax, double* out) noexcept nogil:
    cdef int k, km1, i, start
    cdef double j_next, j_cur, j_prev, norm
    start = _miller_start(nmax, ax)
    j_next = 0.0
    j_cur = 1e-30
    norm = 0.0
    for k in range(start, 0, -1):
        j_prev = (2.0 * k / ax) * j_cur - j_next
        j_next = j_cur
        j_cur = j_prev
        km1 = k - 1
        if km1 <= nmax:
            out[km1] = j_cur
        if km1 > 0 and km1 % 2 == 0:
            norm += 2.0 * j_cur
        if fabs(j_cur) > _RESCALE:
            j_cur /= _RESCALE
            j_next /= _RESCALE
            norm /= _RESCALE
            for i in range(km1, nmax + 1):
                out[i] /= _RESCALE
    norm += out[0]
    for i in range(nmax + 1):
        out[i] /= norm


cdef void _bessel_fill(double x, int nmax, double* out) noexcept nogil:
    """Write J_0(x)..J_nmax(x) into ``out`` (length nmax + 1)."""
    cdef int k, i
    cdef double ax = fabs(x)
    cdef double j_cur
    for i in range(nmax + 1):
        out[i] = 0.0
    if ax == 0.0:
        out[0] = 1.0
        return
    if ax < _SERIES_X:
        # two-term power series; the recurrence would overflow in one step
        j_cur = 1.0
        for k in range(nmax + 1):
            if k > 0:
                j_cur *= 0.5 * ax / k
            out[k] = j_cur * (1.0 - 0.25 * ax * ax / (k + 1))
    else:
        _miller_fill(ax, nmax, out)
    if x < 0:
        for i in range(1, nmax + 1, 2):
            out[i] = -out[i]


cdef inline double _signed(const double* tab, long k) noexcept nogil:
    if k >= 0:
        return tab[k]
    if (-k) % 2 == 1:
        return -tab[-k]
    return tab[-k]


def bessel_table(double x, int nmax):
    if nmax < 0:
        raise ValueError("nmax must be >= 0")
    out = np.empty(nmax + 1, dtype=np.float64)
    cdef double[::1] view = out
    with nogil:
        _bessel_fill(x, nmax, &view[0])
    return out


def bessel_table_many(xs, int nmax):
    cdef double[::1] xv = np.ascontiguousarray(xs, dtype=np.float64).ravel()
    cdef Py_ssize_t npts = xv.shape[0], p
    out = np.empty((npts, nmax + 1), dtype=np.float64)
    cdef double[:, ::1] ov = out
    with nogil:
        for p in range(npts):
            _bessel_fill(xv[p], nmax, &ov[p, 0])
    return out


def dressed_coefficients(alpha, cos_eta, sin2_eta, n, double ej_over_f, int m_max):
    cdef double[::1] av = np.ascontiguousarray(np.atleast_1d(alpha), dtype=np.float64)
    cdef double[::1] cv = np.ascontiguousarray(np.atleast_1d(cos_eta), dtype=np.float64)
    cdef double[::1] sv = np.ascontiguousarray(np.atleast_1d(sin2_eta), dtype=np.float64)
    cdef long[::1] nv = np.ascontiguousarray(np.atleast_1d(n), dtype=np.int64)
    cdef Py_ssize_t npts = av.shape[0], p
    if cv.shape[0] != npts or sv.shape[0] != npts or nv.shape[0] != npts:
        raise ValueError("alpha, cos_eta, sin2_eta and n must have equal length")
    cdef long nmax_res = 0
    for p in range(npts):
        if nv[p] > nmax_res:
            nmax_res = nv[p]
    cdef int kmax = m_max + <int>nmax_res + 1
    a_corr = np.empty(npts)
    c_rel = np.empty(npts)
    c_exc = np.empty(npts)
    c_phi = np.empty(npts)
    x0 = np.empty(npts)
    x1 = np.empty(npts)
    tail = np.empty(npts)
    cdef double[::1] o_a = a_corr, o_r = c_rel, o_e = c_exc, o_p = c_phi
    cdef double[::1] o_x0 = x0, o_x1 = x1, o_t = tail
    cdef double* tab = <double*>malloc((kmax + 1) * sizeof(double))
    if tab == NULL:
        raise MemoryError()
    cdef double r2 = ej_over_f * ej_over_f
    cdef double ce, sin2, jp, jm, even, odd, jneg, w, rel, exc, phi, tr, te, tp, tt, asum, tot
    cdef long m, nn
    try:
        with nogil:
            for p in range(npts):
                nn = nv[p]
                # per-point order keeps results independent of the batch
                _bessel_fill(av[p], m_max + <int>nn + 1, tab)
                ce = cv[p]
                sin2 = sv[p]
                tr = 0.0
                te = 0.0
                tp = 0.0
                tt = 0.0
                asum = 0.0
                for m in range(1, m_max + 1):
                    jp = _signed(tab, m - nn)
                    jm = _signed(tab, -(m + nn))
                    w = r2 / m
                    even = 0.5 * (jp + jm)
                    odd = 0.5 * (jp - jm)
                    rel = w * (even + ce * odd) ** 2
                    exc = w * (even - ce * odd) ** 2
                    phi = 0.25 * w * sin2 * (jp - jm) ** 2
                    tr += rel
                    te += exc
                    tp += phi
                    if m > m_max - 3:
                        tt += rel + exc + phi
                    asum += (jp * jp + jm * jm) / (<double>m * m)
                tot = tr + te + tp
                o_r[p] = tr
                o_e[p] = te
                o_p[p] = tp
                o_t[p] = tt / tot if tot > 0 else 0.0
                o_a[p] = 1.0 - 0.25 * r2 * asum
                jneg = _signed(tab, -nn)
                o_x0[p] = sin2 * (2.0 * jneg) ** 2
                o_x1[p] = sin2 * (_signed(tab, -(1 + nn)) + _signed(tab, 1 - nn)) ** 2
    finally:
        free(tab)
    return a_corr, c_rel, c_exc, c_phi, x0, x1, tail


def magnus_propagate(double e_ch, double e_j, double alpha, double f_mu, int steps):
    cdef double h = 1.0 / (f_mu * steps)
    cdef double g = _SQRT3 / 6.0
    cdef double w = 2.0 * M_PI * f_mu
    cdef double xk = -0.5 * e_j
    out = np.empty((steps + 1, 2, 2), dtype=np.complex128)
    cdef double complex[:, :, ::1] ov = out
    cdef double complex u00 = 1.0, u01 = 0.0, u10 = 0.0, u11 = 1.0
    cdef double complex a, b, cc, d, n00, n01, n10, n11
    cdef double t0, z1, z2, thz, thx, thy, nrm, cs, sn
    cdef int k
    with nogil:
        ov[0, 0, 0] = u00
        ov[0, 0, 1] = u01
        ov[0, 1, 0] = u10
        ov[0, 1, 1] = u11
        for k in range(steps):
            t0 = k * h
            z1 = -0.5 * (e_ch + alpha * f_mu * cos(w * (t0 + (0.5 - g) * h)))
            z2 = -0.5 * (e_ch + alpha * f_mu * cos(w * (t0 + (0.5 + g) * h)))
            thz = M_PI * h * (z1 + z2)
            thx = 2.0 * M_PI * h * xk
            thy = (2.0 * _SQRT3 / 3.0) * M_PI * M_PI * h * h * xk * (z2 - z1)
            nrm = sqrt(thx * thx + thy * thy + thz * thz)
            cs = cos(nrm)
            sn = sin(nrm) / nrm if nrm > 0 else 1.0
            a = cs - 1j * sn * thz
            b = -1j * sn * thx - sn * thy
            cc = -1j * sn * thx + sn * thy
            d = cs + 1j * sn * thz
            n00 = a * u00 + b * u10
            n01 = a * u01 + b * u11
            n10 = cc * u00 + d * u10
            n11 = cc * u01 + d * u11
            u00 = n00
            u01 = n01
            u10 = n10
            u11 = n11
            ov[k + 1, 0, 0] = u00
            ov[k + 1, 0, 1] = u01
            ov[k + 1, 1, 0] = u10
            ov[k + 1, 1, 1] = u11
    return out
