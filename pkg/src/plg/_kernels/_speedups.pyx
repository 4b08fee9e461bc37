# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch filtering kernels.

Same contracts as ``fallback.py`` (the reference semantics); plain C loops
instead of vectorized NumPy, which wins on sequential per-step work where the
matrices are tiny and the trace count is large.
"""

from libc.math cimport sqrt

import numpy as np

from plg.errors import DegenerateVariance

cdef double VARIANCE_FLOOR = 1e-12


cdef _plg_chain(double[:, ::1] sigma0, double[::1] g, double[::1] c,
                double sigma2, Py_ssize_t num_steps, bint strict):
    cdef Py_ssize_t n = g.shape[0]
    cdef Py_ssize_t t, i, j, l
    cdef double alpha, acc

    variances_np = np.empty(num_steps)
    gains_np = np.zeros((num_steps, n))
    degenerate_np = np.zeros(num_steps, dtype=np.uint8)
    sig_np = np.array(sigma0, dtype=np.float64, copy=True)
    b_np = np.zeros((n, n))
    f_np = np.empty(n)
    gsig_np = np.empty((n, n))
    nxt_np = np.empty((n, n))

    cdef double[::1] variances = variances_np
    cdef double[:, ::1] gains = gains_np
    cdef unsigned char[::1] degenerate = degenerate_np
    cdef double[:, ::1] sig = sig_np
    cdef double[:, ::1] b = b_np
    cdef double[::1] f = f_np
    cdef double[:, ::1] gsig = gsig_np
    cdef double[:, ::1] nxt = nxt_np

    # b = sigma2 e_n e_n' + (Gc) e_n' + e_n (Gc)' with Gc the shifted noise
    # covariance; constant along the chain.
    acc = 0.0
    for l in range(n):
        acc += g[l] * c[l]
    for i in range(n - 1):
        b[i, n - 1] += c[i + 1]
        b[n - 1, i] += c[i + 1]
    b[n - 1, n - 1] += 2.0 * acc + sigma2

    for t in range(num_steps):
        alpha = sig[0, 0]
        if alpha <= VARIANCE_FLOOR:
            if strict:
                raise DegenerateVariance(
                    f"predictive variance {alpha:.3e} at t={t}", t=t)
            degenerate[t] = 1
            variances[t] = alpha if alpha > 0.0 else 0.0
        else:
            variances[t] = alpha
        for i in range(n - 1):
            f[i] = sig[i + 1, 0]
        acc = c[0]
        for l in range(n):
            acc += g[l] * sig[l, 0]
        f[n - 1] = acc
        if not degenerate[t]:
            for i in range(n):
                gains[t, i] = f[i] / alpha
        if t < num_steps - 1:
            # gsig = G @ sig (shift rows, trend last row)
            for j in range(n):
                for i in range(n - 1):
                    gsig[i, j] = sig[i + 1, j]
                acc = 0.0
                for l in range(n):
                    acc += g[l] * sig[l, j]
                gsig[n - 1, j] = acc
            # nxt = gsig @ G' + b (- f f' / alpha unless degenerate)
            for i in range(n):
                for j in range(n - 1):
                    nxt[i, j] = gsig[i, j + 1] + b[i, j]
                acc = 0.0
                for l in range(n):
                    acc += gsig[i, l] * g[l]
                nxt[i, n - 1] = acc + b[i, n - 1]
            if not degenerate[t]:
                for i in range(n):
                    for j in range(n):
                        nxt[i, j] -= f[i] * f[j] / alpha
            for i in range(n):
                for j in range(i, n):
                    acc = (nxt[i, j] + nxt[j, i]) / 2.0
                    sig[i, j] = acc
                    sig[j, i] = acc
    return variances_np, gains_np, degenerate_np


def plg_filter_batch(mu0, sigma0, g, c, double sigma2, traces):
    """One-step predictive moments for every trace in the batch."""
    traces_np = np.ascontiguousarray(traces, dtype=np.float64)
    mu0_np = np.ascontiguousarray(mu0, dtype=np.float64)
    cdef double[:, ::1] y = traces_np
    cdef double[::1] mu0_v = mu0_np
    cdef double[::1] g_v = np.ascontiguousarray(g, dtype=np.float64)
    cdef Py_ssize_t num_traces = y.shape[0]
    cdef Py_ssize_t num_steps = y.shape[1]
    cdef Py_ssize_t n = mu0_v.shape[0]
    cdef Py_ssize_t t, k, i, l
    cdef double innovation, acc

    variances_np, gains_np, _ = _plg_chain(
        np.ascontiguousarray(sigma0, dtype=np.float64), g_v,
        np.ascontiguousarray(c, dtype=np.float64), sigma2, num_steps, True)
    means_np = np.empty((num_traces, num_steps))
    mu_np = np.repeat(mu0_np[None, :], num_traces, axis=0)
    tmp_np = np.empty(n)

    cdef double[:, ::1] gains = gains_np
    cdef double[:, ::1] means = means_np
    cdef double[:, ::1] mu = mu_np
    cdef double[::1] tmp = tmp_np

    for t in range(num_steps):
        for k in range(num_traces):
            means[k, t] = mu[k, 0]
        if t < num_steps - 1:
            for k in range(num_traces):
                innovation = y[k, t] - mu[k, 0]
                for i in range(n - 1):
                    tmp[i] = mu[k, i + 1] + gains[t, i] * innovation
                acc = 0.0
                for l in range(n):
                    acc += g_v[l] * mu[k, l]
                tmp[n - 1] = acc + gains[t, n - 1] * innovation
                for i in range(n):
                    mu[k, i] = tmp[i]
    return means_np, variances_np


def plg_sample_batch(mu0, sigma0, g, c, double sigma2, normals):
    """Sample traces from pre-drawn standard normals of shape (K, T)."""
    normals_np = np.ascontiguousarray(normals, dtype=np.float64)
    mu0_np = np.ascontiguousarray(mu0, dtype=np.float64)
    cdef double[:, ::1] xi = normals_np
    cdef double[::1] mu0_v = mu0_np
    cdef double[::1] g_v = np.ascontiguousarray(g, dtype=np.float64)
    cdef Py_ssize_t num_traces = xi.shape[0]
    cdef Py_ssize_t num_steps = xi.shape[1]
    cdef Py_ssize_t n = mu0_v.shape[0]
    cdef Py_ssize_t t, k, i, l
    cdef double noise, std, acc

    variances_np, gains_np, degenerate_np = _plg_chain(
        np.ascontiguousarray(sigma0, dtype=np.float64), g_v,
        np.ascontiguousarray(c, dtype=np.float64), sigma2, num_steps, False)
    traces_np = np.empty((num_traces, num_steps))
    mu_np = np.repeat(mu0_np[None, :], num_traces, axis=0)
    tmp_np = np.empty(n)

    cdef double[::1] variances = variances_np
    cdef double[:, ::1] gains = gains_np
    cdef unsigned char[::1] degenerate = degenerate_np
    cdef double[:, ::1] traces = traces_np
    cdef double[:, ::1] mu = mu_np
    cdef double[::1] tmp = tmp_np

    for t in range(num_steps):
        std = 0.0 if degenerate[t] else sqrt(variances[t])
        for k in range(num_traces):
            noise = std * xi[k, t]
            traces[k, t] = mu[k, 0] + noise
            if t < num_steps - 1:
                for i in range(n - 1):
                    tmp[i] = mu[k, i + 1] + gains[t, i] * noise
                acc = 0.0
                for l in range(n):
                    acc += g_v[l] * mu[k, l]
                tmp[n - 1] = acc + gains[t, n - 1] * noise
                for i in range(n):
                    mu[k, i] = tmp[i]
    return traces_np


cdef _kalman_chain(double[:, ::1] a, double[::1] h, double[:, ::1] q,
                   double r, double[:, ::1] p1, Py_ssize_t num_steps):
    cdef Py_ssize_t n = h.shape[0]
    cdef Py_ssize_t t, i, j, l
    cdef double s, acc

    variances_np = np.empty(num_steps)
    a_gains_np = np.empty((num_steps, n))
    p_np = np.array(p1, dtype=np.float64, copy=True)
    ph_np = np.empty(n)
    gain_np = np.empty(n)
    post_np = np.empty((n, n))
    ap_np = np.empty((n, n))
    nxt_np = np.empty((n, n))

    cdef double[::1] variances = variances_np
    cdef double[:, ::1] a_gains = a_gains_np
    cdef double[:, ::1] p = p_np
    cdef double[::1] ph = ph_np
    cdef double[::1] gain = gain_np
    cdef double[:, ::1] post = post_np
    cdef double[:, ::1] ap = ap_np
    cdef double[:, ::1] nxt = nxt_np

    for t in range(num_steps):
        for i in range(n):
            acc = 0.0
            for l in range(n):
                acc += p[i, l] * h[l]
            ph[i] = acc
        s = r
        for i in range(n):
            s += h[i] * ph[i]
        if s <= VARIANCE_FLOOR:
            raise DegenerateVariance(
                f"innovation variance {s:.3e} at t={t}", t=t)
        variances[t] = s
        for i in range(n):
            gain[i] = ph[i] / s
        for i in range(n):
            acc = 0.0
            for l in range(n):
                acc += a[i, l] * gain[l]
            a_gains[t, i] = acc
        if t < num_steps - 1:
            for i in range(n):
                for j in range(n):
                    post[i, j] = p[i, j] - gain[i] * ph[j]
            for i in range(n):
                for j in range(i, n):
                    acc = (post[i, j] + post[j, i]) / 2.0
                    post[i, j] = acc
                    post[j, i] = acc
            for i in range(n):
                for j in range(n):
                    acc = 0.0
                    for l in range(n):
                        acc += a[i, l] * post[l, j]
                    ap[i, j] = acc
            for i in range(n):
                for j in range(n):
                    acc = q[i, j]
                    for l in range(n):
                        acc += ap[i, l] * a[j, l]
                    nxt[i, j] = acc
            for i in range(n):
                for j in range(i, n):
                    acc = (nxt[i, j] + nxt[j, i]) / 2.0
                    p[i, j] = acc
                    p[j, i] = acc
    return variances_np, a_gains_np


def kalman_filter_batch(a, h, q, double r, x1hat, p1, traces):
    """One-step predictive moments for every trace under the latent-state model."""
    traces_np = np.ascontiguousarray(traces, dtype=np.float64)
    x1_np = np.ascontiguousarray(x1hat, dtype=np.float64)
    a_np = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] y = traces_np
    cdef double[::1] h_v = np.ascontiguousarray(h, dtype=np.float64)
    cdef double[:, ::1] a_v = a_np
    cdef Py_ssize_t num_traces = y.shape[0]
    cdef Py_ssize_t num_steps = y.shape[1]
    cdef Py_ssize_t n = h_v.shape[0]
    cdef Py_ssize_t t, k, i, l
    cdef double innovation, pred, acc

    variances_np, a_gains_np = _kalman_chain(
        a_np, h_v, np.ascontiguousarray(q, dtype=np.float64), r,
        np.ascontiguousarray(p1, dtype=np.float64), num_steps)
    means_np = np.empty((num_traces, num_steps))
    x_np = np.repeat(x1_np[None, :], num_traces, axis=0)
    tmp_np = np.empty(n)

    cdef double[:, ::1] a_gains = a_gains_np
    cdef double[:, ::1] means = means_np
    cdef double[:, ::1] x = x_np
    cdef double[::1] tmp = tmp_np

    for t in range(num_steps):
        for k in range(num_traces):
            pred = 0.0
            for l in range(n):
                pred += h_v[l] * x[k, l]
            means[k, t] = pred
            if t < num_steps - 1:
                innovation = y[k, t] - pred
                for i in range(n):
                    acc = a_gains[t, i] * innovation
                    for l in range(n):
                        acc += a_v[i, l] * x[k, l]
                    tmp[i] = acc
                for i in range(n):
                    x[k, i] = tmp[i]
    return means_np, variances_np
