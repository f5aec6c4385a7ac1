# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.

Every function here has a line-for-line numpy twin in :mod:`rcdyn._pykernels`;
the two must agree to rounding. Arrays are expected C-contiguous float64
(int32 for CSR index arrays); the thin wrappers in :mod:`rcdyn.kernels`
take care of conversion.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, log, fabs, isfinite

cnp.import_array()

cdef enum:
    LORENZ = 0
    ROSSLER = 1
    MAXD = 8


cdef inline void _rhs(int system, const double* p, const double* s, double* out) noexcept nogil:
    if system == LORENZ:
        out[0] = p[0] * (s[1] - s[0])
        out[1] = p[1] * s[0] - s[1] - s[0] * s[2]
        out[2] = s[0] * s[1] - p[2] * s[2]
    else:
        out[0] = -s[1] - s[2]
        out[1] = s[0] + p[0] * s[1]
        out[2] = p[1] + (s[0] - p[2]) * s[2]


cdef inline void _rk4(int system, const double* p, double* s, double h) noexcept nogil:
    cdef double k1[3]
    cdef double k2[3]
    cdef double k3[3]
    cdef double k4[3]
    cdef double tmp[3]
    cdef int i
    _rhs(system, p, s, k1)
    for i in range(3):
        tmp[i] = s[i] + 0.5 * h * k1[i]
    _rhs(system, p, tmp, k2)
    for i in range(3):
        tmp[i] = s[i] + 0.5 * h * k2[i]
    _rhs(system, p, tmp, k3)
    for i in range(3):
        tmp[i] = s[i] + h * k3[i]
    _rhs(system, p, tmp, k4)
    for i in range(3):
        s[i] = s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


def rk4_run(int system, const double[::1] params, const double[::1] s0, double dt,
            Py_ssize_t n_steps, Py_ssize_t n_transient):
    """Integrate a built-in 3-D flow; returns (samples, bad_step or -1)."""
    cdef double s[3]
    cdef Py_ssize_t i, k
    cdef int j
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n_steps, 3))
    cdef double[:, ::1] ov = out
    cdef const double* p = &params[0]
    cdef Py_ssize_t bad = -1
    for j in range(3):
        s[j] = s0[j]
    with nogil:
        for k in range(n_transient):
            _rk4(system, p, s, dt)
            if not (isfinite(s[0]) and isfinite(s[1]) and isfinite(s[2])):
                bad = k + 1
                break
        if bad < 0:
            for i in range(n_steps):
                if i > 0:
                    _rk4(system, p, s, dt)
                    if not (isfinite(s[0]) and isfinite(s[1]) and isfinite(s[2])):
                        bad = n_transient + i
                        break
                for j in range(3):
                    ov[i, j] = s[j]
    return out, bad


cdef inline double _tanh(double q) noexcept nogil:
    # ~2x faster than libm tanh; absolute error ~1e-16, saturates cleanly
    return 1.0 - 2.0 / (exp(2.0 * q) + 1.0)


cdef inline void _leaky_update(Py_ssize_t n, const int* indptr, const int* indices,
                               const double* data, const double* w_in, Py_ssize_t m,
                               const double* u, double alpha, double* r, double* q) noexcept nogil:
    cdef Py_ssize_t i, jj, c
    cdef double acc
    for i in range(n):
        acc = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            acc += data[jj] * r[indices[jj]]
        for c in range(m):
            acc += w_in[i * m + c] * u[c]
        q[i] = acc
    for i in range(n):
        r[i] = (1.0 - alpha) * r[i] + alpha * _tanh(q[i])


def reservoir_drive(const int[::1] indptr, const int[::1] indices, const double[::1] data,
                    const double[:, ::1] w_in, double alpha, const double[:, ::1] inputs,
                    double[::1] r):
    """Drive the reservoir in place; returns the state after each input."""
    cdef Py_ssize_t n = r.shape[0], m = w_in.shape[1], steps = inputs.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] states = np.empty((steps, n))
    cdef double[:, ::1] sv = states
    cdef double[::1] q = np.empty(n)
    cdef Py_ssize_t t, i
    if steps == 0:
        return states
    with nogil:
        for t in range(steps):
            _leaky_update(n, &indptr[0], &indices[0], &data[0], &w_in[0, 0], m,
                          &inputs[t, 0], alpha, &r[0], &q[0])
            for i in range(n):
                sv[t, i] = r[i]
    return states


def reservoir_autonomous(const int[::1] indptr, const int[::1] indices,
                         const double[::1] data, const double[:, ::1] w_in,
                         const double[:, ::1] w_out, double alpha,
                         double[::1] r, double[:, ::1] ring, Py_ssize_t head,
                         Py_ssize_t n_steps, bint use_readout, double limit):
    """Closed-loop run; r and ring are updated in place.

    ring holds the last k raw outputs, ring[head] being the oldest. Returns
    (outputs, new_head, bad_step or -1).
    """
    cdef Py_ssize_t n = r.shape[0], m = w_in.shape[1], d = m // 2
    cdef Py_ssize_t k = ring.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n_steps, d))
    cdef double[:, ::1] ov = out
    cdef double[::1] q = np.empty(n)
    cdef double[::1] y = np.empty(m)
    cdef double[::1] u = np.empty(m)
    cdef Py_ssize_t t, i, c, bad = -1
    cdef double acc, nrm
    if n_steps == 0:
        return out, head, bad
    with nogil:
        for t in range(n_steps):
            for c in range(m):
                acc = 0.0
                for i in range(n):
                    acc += w_out[c, i] * r[i]
                y[c] = acc
            nrm = 0.0
            for c in range(d):
                nrm += y[c] * y[c]
            if not isfinite(nrm) or sqrt(nrm) > limit:
                bad = t
                break
            if use_readout:
                for c in range(m):
                    u[c] = y[c]
            else:
                for c in range(d):
                    u[c] = y[c]
                    if k > 0:
                        u[d + c] = ring[head, c]
                        ring[head, c] = y[c]
                    else:
                        u[d + c] = y[c]
                if k > 0:
                    head = head + 1
                    if head == k:
                        head = 0
            for c in range(d):
                ov[t, c] = y[c]
            _leaky_update(n, &indptr[0], &indices[0], &data[0], &w_in[0, 0], m,
                          &u[0], alpha, &r[0], &q[0])
    if bad >= 0:
        out = out[:bad]
    return out, head, bad


cdef inline void _matvec(Py_ssize_t d, const double* a, const double* x, double* out) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(d):
        acc = 0.0
        for j in range(d):
            acc += a[i * d + j] * x[j]
        out[i] = acc


cdef inline void _tangent_rk4(Py_ssize_t d, const double* j1, const double* j2,
                              const double* j3, double* v, double h) noexcept nogil:
    cdef double k1[MAXD]
    cdef double k2[MAXD]
    cdef double k3[MAXD]
    cdef double k4[MAXD]
    cdef double tmp[MAXD]
    cdef Py_ssize_t i
    _matvec(d, j1, v, k1)
    for i in range(d):
        tmp[i] = v[i] + 0.5 * h * k1[i]
    _matvec(d, j2, tmp, k2)
    for i in range(d):
        tmp[i] = v[i] + 0.5 * h * k2[i]
    _matvec(d, j2, tmp, k3)
    for i in range(d):
        tmp[i] = v[i] + h * k3[i]
    _matvec(d, j3, tmp, k4)
    for i in range(d):
        v[i] = v[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


cdef inline void _mgs2(Py_ssize_t d, double* q, double* rr) noexcept nogil:
    # q is d x d row-major with tangent vectors in columns; two MGS sweeps
    cdef Py_ssize_t i, j, l, sweep
    cdef double dot, nrm
    for i in range(d * d):
        rr[i] = 0.0
    for j in range(d):
        for sweep in range(2):
            for l in range(j):
                dot = 0.0
                for i in range(d):
                    dot += q[i * d + l] * q[i * d + j]
                for i in range(d):
                    q[i * d + j] -= dot * q[i * d + l]
                rr[l * d + j] += dot
        nrm = 0.0
        for i in range(d):
            nrm += q[i * d + j] * q[i * d + j]
        nrm = sqrt(nrm)
        rr[j * d + j] = nrm
        for i in range(d):
            q[i * d + j] /= nrm


def tangent_blocks(const double[:, :, ::1] jacs, double[:, ::1] q, double h,
                   Py_ssize_t renorm, double[:, :, ::1] q_store=None,
                   double[:, :, ::1] r_store=None):
    """RK4 on dv/dt = J v with J sampled at h/2 spacing, QR every block.

    jacs[2i], jacs[2i+1], jacs[2i+2] are used for the i-th step. q is
    updated in place. Returns log|R_jj| per completed block.
    """
    cdef Py_ssize_t d = q.shape[0]
    cdef Py_ssize_t n_steps = (jacs.shape[0] - 1) // 2
    cdef Py_ssize_t n_blocks = n_steps // renorm
    cdef cnp.ndarray[cnp.float64_t, ndim=2] logs = np.empty((n_blocks, d))
    cdef double[:, ::1] lv = logs
    cdef double col[MAXD]
    cdef double rr[MAXD * MAXD]
    cdef Py_ssize_t b, s, step, i, j
    cdef bint store_q = q_store is not None
    cdef bint store_r = r_store is not None
    if d > MAXD:
        raise ValueError("tangent dimension too large for compiled kernel")
    if n_blocks == 0:
        return logs
    with nogil:
        for b in range(n_blocks):
            for s in range(renorm):
                step = b * renorm + s
                for j in range(d):
                    for i in range(d):
                        col[i] = q[i, j]
                    _tangent_rk4(d, &jacs[2 * step, 0, 0], &jacs[2 * step + 1, 0, 0],
                                 &jacs[2 * step + 2, 0, 0], col, h)
                    for i in range(d):
                        q[i, j] = col[i]
            _mgs2(d, &q[0, 0], rr)
            for j in range(d):
                lv[b, j] = log(fabs(rr[j * d + j]))
            if store_q:
                for i in range(d):
                    for j in range(d):
                        q_store[b, i, j] = q[i, j]
            if store_r:
                for i in range(d):
                    for j in range(d):
                        r_store[b, i, j] = rr[i * d + j]
    return logs


def clv_backward(const double[:, :, ::1] r_store, const double[:, ::1] c_last):
    """Ginelli backward sweep: C[k-1] = normalize(R[k]^-1 C[k])."""
    cdef Py_ssize_t nb = r_store.shape[0], d = c_last.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] cs = np.empty((nb, d, d))
    cdef double[:, :, ::1] cv = cs
    cdef double c[MAXD * MAXD]
    cdef Py_ssize_t k, i, j, l
    cdef double acc, nrm
    if d > MAXD:
        raise ValueError("tangent dimension too large for compiled kernel")
    if nb == 0:
        return cs
    for i in range(d):
        for j in range(d):
            c[i * d + j] = c_last[i, j]
    with nogil:
        k = nb - 1
        while True:
            for i in range(d):
                for j in range(d):
                    cv[k, i, j] = c[i * d + j]
            if k == 0:
                break
            # back substitution column by column, upper triangular R
            for j in range(d):
                i = d - 1
                while i >= 0:
                    acc = c[i * d + j]
                    for l in range(i + 1, d):
                        acc -= r_store[k, i, l] * c[l * d + j]
                    c[i * d + j] = acc / r_store[k, i, i]
                    i -= 1
                nrm = 0.0
                for i in range(d):
                    nrm += c[i * d + j] * c[i * d + j]
                nrm = sqrt(nrm)
                for i in range(d):
                    c[i * d + j] /= nrm
            k -= 1
    return cs


cdef inline void _jac(int system, const double* p, const double* s, double* out) noexcept nogil:
    cdef int i
    for i in range(9):
        out[i] = 0.0
    if system == LORENZ:
        out[0] = -p[0]
        out[1] = p[0]
        out[3] = p[1] - s[2]
        out[4] = -1.0
        out[5] = -s[0]
        out[6] = s[1]
        out[7] = s[0]
        out[8] = -p[2]
    else:
        out[1] = -1.0
        out[2] = -1.0
        out[3] = 1.0
        out[4] = p[0]
        out[6] = s[2]
        out[8] = s[0] - p[2]


def rk4_variational(int system, const double[::1] params, const double[:, ::1] states,
                    double h, Py_ssize_t n_steps):
    """Flow a batch of 3-D states n_steps RK4 steps with the tangent map."""
    cdef Py_ssize_t m = states.shape[0], b, step, i, j, l
    cdef cnp.ndarray[cnp.float64_t, ndim=2] ends = np.array(states, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] phis = np.zeros((m, 3, 3))
    cdef double[:, ::1] ev = ends
    cdef double[:, :, ::1] pv = phis
    cdef const double* p = &params[0]
    cdef double x[3]
    cdef double tx[3]
    cdef double kx[4][3]
    cdef double ph[9]
    cdef double tp[9]
    cdef double kp[4][9]
    cdef double jac[9]
    cdef int stage
    cdef double c
    with nogil:
        for b in range(m):
            for i in range(3):
                x[i] = ev[b, i]
            for i in range(9):
                ph[i] = 0.0
            ph[0] = 1.0
            ph[4] = 1.0
            ph[8] = 1.0
            for step in range(n_steps):
                for stage in range(4):
                    if stage == 0:
                        c = 0.0
                    elif stage == 3:
                        c = h
                    else:
                        c = 0.5 * h
                    for i in range(3):
                        tx[i] = x[i] + (c * kx[stage - 1][i] if stage > 0 else 0.0)
                    for i in range(9):
                        tp[i] = ph[i] + (c * kp[stage - 1][i] if stage > 0 else 0.0)
                    _rhs(system, p, tx, kx[stage])
                    _jac(system, p, tx, jac)
                    for i in range(3):
                        for j in range(3):
                            kp[stage][i * 3 + j] = 0.0
                            for l in range(3):
                                kp[stage][i * 3 + j] += jac[i * 3 + l] * tp[l * 3 + j]
                for i in range(3):
                    x[i] += h / 6.0 * (kx[0][i] + 2.0 * kx[1][i] + 2.0 * kx[2][i] + kx[3][i])
                for i in range(9):
                    ph[i] += h / 6.0 * (kp[0][i] + 2.0 * kp[1][i] + 2.0 * kp[2][i] + kp[3][i])
            for i in range(3):
                ev[b, i] = x[i]
            for i in range(3):
                for j in range(3):
                    pv[b, i, j] = ph[i * 3 + j]
    return ends, phis
