"""Pure numpy twins of the compiled kernels in ``_kernels.pyx``.

Same signatures, same in-place semantics. These are slow (Python-level
loops) and exist so the package works without a C toolchain.
"""

import numpy as np

LORENZ = 0
ROSSLER = 1


def _rhs(system, p, s):
    x, y, z = s[..., 0], s[..., 1], s[..., 2]
    if system == LORENZ:
        return np.stack([p[0] * (y - x), p[1] * x - y - x * z, x * y - p[2] * z], axis=-1)
    return np.stack([-y - z, x + p[0] * y, p[1] + (x - p[2]) * z], axis=-1)


def _rk4(system, p, s, h):
    k1 = _rhs(system, p, s)
    k2 = _rhs(system, p, s + 0.5 * h * k1)
    k3 = _rhs(system, p, s + 0.5 * h * k2)
    k4 = _rhs(system, p, s + h * k3)
    return s + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_run(system, params, s0, dt, n_steps, n_transient):
    s = np.array(s0, dtype=float)
    out = np.empty((n_steps, 3))
    for k in range(n_transient):
        s = _rk4(system, params, s, dt)
        if not np.all(np.isfinite(s)):
            return out, k + 1
    for i in range(n_steps):
        if i > 0:
            s = _rk4(system, params, s, dt)
            if not np.all(np.isfinite(s)):
                return out, n_transient + i
        out[i] = s
    return out, -1


def _csr_matvec(indptr, indices, data, r):
    prod = data * r[indices]
    out = np.add.reduceat(prod, indptr[:-1]) if prod.size else np.zeros(len(indptr) - 1)
    # reduceat misbehaves on empty rows
    empty = indptr[:-1] == indptr[1:]
    if empty.any():
        out[empty] = 0.0
    return out


def reservoir_drive(indptr, indices, data, w_in, alpha, inputs, r):
    steps = inputs.shape[0]
    states = np.empty((steps, r.shape[0]))
    for t in range(steps):
        q = _csr_matvec(indptr, indices, data, r) + w_in @ inputs[t]
        r[:] = (1.0 - alpha) * r + alpha * np.tanh(q)
        states[t] = r
    return states


def reservoir_autonomous(indptr, indices, data, w_in, w_out, alpha, r, ring, head,
                         n_steps, use_readout, limit):
    m = w_in.shape[1]
    d = m // 2
    k = ring.shape[0]
    out = np.empty((n_steps, d))
    u = np.empty(m)
    for t in range(n_steps):
        y = w_out @ r
        nrm = np.sqrt(np.sum(y[:d] ** 2))
        if not np.isfinite(nrm) or nrm > limit:
            return out[:t], head, t
        if use_readout:
            u[:] = y
        else:
            u[:d] = y[:d]
            if k > 0:
                u[d:] = ring[head]
                ring[head] = y[:d]
                head = (head + 1) % k
            else:
                u[d:] = y[:d]
        out[t] = y[:d]
        q = _csr_matvec(indptr, indices, data, r) + w_in @ u
        r[:] = (1.0 - alpha) * r + alpha * np.tanh(q)
    return out, head, -1


def _mgs2(q):
    d = q.shape[0]
    rr = np.zeros((d, d))
    for j in range(d):
        for _ in range(2):
            for l in range(j):
                dot = q[:, l] @ q[:, j]
                q[:, j] -= dot * q[:, l]
                rr[l, j] += dot
        nrm = np.sqrt(q[:, j] @ q[:, j])
        rr[j, j] = nrm
        q[:, j] /= nrm
    return rr


def tangent_blocks(jacs, q, h, renorm, q_store=None, r_store=None):
    d = q.shape[0]
    n_steps = (jacs.shape[0] - 1) // 2
    n_blocks = n_steps // renorm
    logs = np.empty((n_blocks, d))
    for b in range(n_blocks):
        for s in range(renorm):
            step = b * renorm + s
            j1, j2, j3 = jacs[2 * step], jacs[2 * step + 1], jacs[2 * step + 2]
            k1 = j1 @ q
            k2 = j2 @ (q + 0.5 * h * k1)
            k3 = j2 @ (q + 0.5 * h * k2)
            k4 = j3 @ (q + h * k3)
            q += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        rr = _mgs2(q)
        logs[b] = np.log(np.abs(np.diag(rr)))
        if q_store is not None:
            q_store[b] = q
        if r_store is not None:
            r_store[b] = rr
    return logs


def clv_backward(r_store, c_last):
    nb = r_store.shape[0]
    d = c_last.shape[0]
    cs = np.empty((nb, d, d))
    c = np.array(c_last, dtype=float)
    for k in range(nb - 1, -1, -1):
        cs[k] = c
        if k == 0:
            break
        r = r_store[k]
        for j in range(d):
            for i in range(d - 1, -1, -1):
                c[i, j] = (c[i, j] - r[i, i + 1:] @ c[i + 1:, j]) / r[i, i]
        c /= np.sqrt(np.sum(c * c, axis=0))
    return cs


def _jac(system, p, s):
    x, y, z = s[..., 0], s[..., 1], s[..., 2]
    jac = np.zeros(s.shape[:-1] + (3, 3))
    if system == LORENZ:
        jac[..., 0, 0] = -p[0]
        jac[..., 0, 1] = p[0]
        jac[..., 1, 0] = p[1] - z
        jac[..., 1, 1] = -1.0
        jac[..., 1, 2] = -x
        jac[..., 2, 0] = y
        jac[..., 2, 1] = x
        jac[..., 2, 2] = -p[2]
    else:
        jac[..., 0, 1] = -1.0
        jac[..., 0, 2] = -1.0
        jac[..., 1, 0] = 1.0
        jac[..., 1, 1] = p[0]
        jac[..., 2, 0] = z
        jac[..., 2, 2] = x - p[2]
    return jac


def rk4_variational(system, params, states, h, n_steps):
    x = np.array(states, dtype=float)
    m = x.shape[0]
    ph = np.broadcast_to(np.eye(3), (m, 3, 3)).copy()
    for _ in range(n_steps):
        k1x, k1p = _rhs(system, params, x), _jac(system, params, x) @ ph
        t = x + 0.5 * h * k1x
        k2x, k2p = _rhs(system, params, t), _jac(system, params, t) @ (ph + 0.5 * h * k1p)
        t = x + 0.5 * h * k2x
        k3x, k3p = _rhs(system, params, t), _jac(system, params, t) @ (ph + 0.5 * h * k2p)
        t = x + h * k3x
        k4x, k4p = _rhs(system, params, t), _jac(system, params, t) @ (ph + h * k3p)
        x = x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        ph = ph + h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
    return x, ph
