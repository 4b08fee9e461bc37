"""Pure-NumPy batch filtering kernels.

These are the hot loops of the package: sequential per-observation filtering
and sampling applied to whole trace corpora.  The covariance recursions of
both models do not involve the observations, so each kernel computes one
variance/gain chain per parameter set and then runs only the mean recursion
across traces (vectorized over the corpus axis).

The compiled module in ``_speedups.pyx`` implements the same contracts; the
package picks one at import time.
"""

import numpy as np

from ..errors import DegenerateVariance

VARIANCE_FLOOR = 1e-12


def _plg_chain(sigma0, g, c, sigma2, num_steps, strict):
    """Predictive-variance chain and per-step innovation gains.

    Returns ``(variances, gains, degenerate)`` where ``gains[t]`` multiplies
    the innovation in the mean update.  In strict mode a variance at or below
    the floor raises ``DegenerateVariance`` with the failing step; otherwise
    the step is marked degenerate, its variance is clamped to zero, its gain
    stays zero, and the covariance recursion drops the conditioning
    correction (an almost-surely constant coordinate conditions away nothing).
    """
    n = g.size
    gc = np.empty(n)
    gc[:n - 1] = c[1:]
    gc[n - 1] = g @ c
    b = np.zeros((n, n))
    b[:, n - 1] += gc
    b[n - 1, :] += gc
    b[n - 1, n - 1] += sigma2

    sig = sigma0.copy()
    variances = np.empty(num_steps)
    gains = np.zeros((num_steps, n))
    degenerate = np.zeros(num_steps, dtype=bool)
    for t in range(num_steps):
        alpha = sig[0, 0]
        if alpha <= VARIANCE_FLOOR:
            if strict:
                raise DegenerateVariance(
                    f"predictive variance {alpha:.3e} at t={t}", t=t)
            degenerate[t] = True
            variances[t] = max(alpha, 0.0)
        else:
            variances[t] = alpha
        f = np.empty(n)
        f[:n - 1] = sig[1:, 0]
        f[n - 1] = g @ sig[:, 0] + c[0]
        if not degenerate[t]:
            gains[t] = f / alpha
        if t < num_steps - 1:
            gsig = np.empty((n, n))
            gsig[:n - 1] = sig[1:]
            gsig[n - 1] = g @ sig
            gsg = np.empty((n, n))
            gsg[:, :n - 1] = gsig[:, 1:]
            gsg[:, n - 1] = gsig @ g
            sig = gsg + b
            if not degenerate[t]:
                sig -= np.outer(f, f) / alpha
            sig = (sig + sig.T) / 2.0
    return variances, gains, degenerate


def _plg_shift(mu, g):
    """Apply the window shift to every row of a (K, n) mean array."""
    out = np.empty_like(mu)
    out[:, :mu.shape[1] - 1] = mu[:, 1:]
    out[:, mu.shape[1] - 1] = mu @ g
    return out


def plg_filter_batch(mu0, sigma0, g, c, sigma2, traces):
    """One-step predictive moments for every trace in the batch.

    Returns ``(means, variances)`` of shapes ``(K, T)`` and ``(T,)``; the
    variance sequence is shared by all traces.  Raises ``DegenerateVariance``
    with the step index if the chain collapses.
    """
    traces = np.asarray(traces, dtype=float)
    num_traces, num_steps = traces.shape
    variances, gains, _ = _plg_chain(sigma0, g, c, sigma2, num_steps, True)
    means = np.empty((num_traces, num_steps))
    mu = np.repeat(mu0[None, :], num_traces, axis=0)
    for t in range(num_steps):
        means[:, t] = mu[:, 0]
        if t < num_steps - 1:
            innovation = traces[:, t] - mu[:, 0]
            mu = _plg_shift(mu, g) + innovation[:, None] * gains[t][None, :]
    return means, variances


def plg_sample_batch(mu0, sigma0, g, c, sigma2, normals):
    """Sample traces from pre-drawn standard normals of shape (K, T).

    Observation t of trace k is ``mean + sqrt(variance) * normals[k, t]``;
    degenerate steps emit the mean exactly and shift the window without a
    conditioning correction.  Never raises.
    """
    normals = np.asarray(normals, dtype=float)
    num_traces, num_steps = normals.shape
    variances, gains, degenerate = _plg_chain(
        sigma0, g, c, sigma2, num_steps, False)
    stds = np.sqrt(variances)
    stds[degenerate] = 0.0
    traces = np.empty((num_traces, num_steps))
    mu = np.repeat(mu0[None, :], num_traces, axis=0)
    for t in range(num_steps):
        noise = stds[t] * normals[:, t]
        traces[:, t] = mu[:, 0] + noise
        if t < num_steps - 1:
            mu = _plg_shift(mu, g) + noise[:, None] * gains[t][None, :]
    return traces


def _kalman_chain(a, h, q, r, p1, num_steps):
    """Innovation-variance chain and per-step (A @ gain) vectors."""
    n = h.size
    p = p1.copy()
    variances = np.empty(num_steps)
    a_gains = np.empty((num_steps, n))
    for t in range(num_steps):
        ph = p @ h
        s = float(h @ ph) + r
        if s <= VARIANCE_FLOOR:
            raise DegenerateVariance(
                f"innovation variance {s:.3e} at t={t}", t=t)
        variances[t] = s
        gain = ph / s
        a_gains[t] = a @ gain
        if t < num_steps - 1:
            post = p - np.outer(gain, ph)
            post = (post + post.T) / 2.0
            p = a @ post @ a.T + q
            p = (p + p.T) / 2.0
    return variances, a_gains


def kalman_filter_batch(a, h, q, r, x1hat, p1, traces):
    """One-step predictive moments for every trace under the latent-state model.

    Same output contract as :func:`plg_filter_batch`.  The mean recursion per
    trace folds the measurement and time updates into
    ``x' = A x + (A gain) * innovation``.
    """
    traces = np.asarray(traces, dtype=float)
    num_traces, num_steps = traces.shape
    variances, a_gains = _kalman_chain(a, h, q, r, p1, num_steps)
    means = np.empty((num_traces, num_steps))
    x = np.repeat(x1hat[None, :], num_traces, axis=0)
    for t in range(num_steps):
        pred = x @ h
        means[:, t] = pred
        if t < num_steps - 1:
            innovation = traces[:, t] - pred
            x = x @ a.T + innovation[:, None] * a_gains[t][None, :]
    return means, variances
