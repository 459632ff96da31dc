"""Compiled objective, derivatives and Newton loop for one model.

Arguments shared by every kernel:

xk, y
    restricted design (n x k) and response.
r, a_tau, n_tau, a_sig, alpha2, const
    pMOM order, the exponent of tau, the weight of the ``1/tau`` term from the
    tau prior (zero when tau is fixed), the exponent of sigma2, the sigma2
    prior scale, and every additive constant of the log joint.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def log_joint_value(xk, y, beta, tau, sig, r, a_tau, n_tau, a_sig, alpha2, const, hier):
    resid = y - xk @ beta
    rss = resid @ resid
    ss = beta @ beta
    logb = 0.0
    for i in range(beta.size):
        logb += math.log(abs(beta[i]))
    out = (const - a_sig * math.log(sig)
           - (rss + ss / tau + 2.0 * alpha2) / (2.0 * sig)
           + 2.0 * r * logb)
    if hier:
        out -= a_tau * math.log(tau) + n_tau / (2.0 * tau)
    return out


@njit(cache=True)
def grad_original(xk, y, beta, tau, sig, r, a_tau, n_tau, a_sig, alpha2, hier):
    k = beta.size
    dim = k + 2 if hier else k + 1
    resid = y - xk @ beta
    rss = resid @ resid
    ss = beta @ beta
    g = np.empty(dim)
    xr = xk.T @ resid
    for i in range(k):
        g[i] = xr[i] / sig - beta[i] / (tau * sig) + 2.0 * r / beta[i]
    g_sig = -a_sig / sig + (rss + ss / tau + 2.0 * alpha2) / (2.0 * sig * sig)
    if hier:
        g[k] = -a_tau / tau + ss / (2.0 * tau * tau * sig) + n_tau / (2.0 * tau * tau)
        g[k + 1] = g_sig
    else:
        g[k] = g_sig
    return g


@njit(cache=True)
def hess_original(xk, y, xtx, beta, tau, sig, r, a_tau, n_tau, a_sig, alpha2, hier):
    """Hessian of the log joint (not its negative) in (beta, tau, sigma2)."""
    k = beta.size
    dim = k + 2 if hier else k + 1
    resid = y - xk @ beta
    rss = resid @ resid
    ss = beta @ beta
    xr = xk.T @ resid
    h = np.empty((dim, dim))
    for i in range(k):
        for j in range(k):
            h[i, j] = -xtx[i, j] / sig
        h[i, i] -= 1.0 / (tau * sig) + 2.0 * r / (beta[i] * beta[i])
    s_col = k + 1 if hier else k
    for i in range(k):
        h_bs = -xr[i] / (sig * sig) + beta[i] / (tau * sig * sig)
        h[i, s_col] = h_bs
        h[s_col, i] = h_bs
    h[s_col, s_col] = a_sig / (sig * sig) - (rss + ss / tau + 2.0 * alpha2) / (sig * sig * sig)
    if hier:
        for i in range(k):
            h_bt = beta[i] / (tau * tau * sig)
            h[i, k] = h_bt
            h[k, i] = h_bt
        h[k, k] = a_tau / (tau * tau) - ss / (tau ** 3 * sig) - n_tau / tau ** 3
        h_ts = -ss / (2.0 * tau * tau * sig * sig)
        h[k, k + 1] = h_ts
        h[k + 1, k] = h_ts
    return h


@njit(cache=True)
def _unpack(theta, k, hier, fixed_tau):
    beta = theta[:k].copy()
    if hier:
        return beta, math.exp(theta[k]), math.exp(theta[k + 1])
    return beta, fixed_tau, math.exp(theta[k])


@njit(cache=True)
def _theta_derivs(xk, y, xtx, theta, r, a_tau, n_tau, a_sig, alpha2, hier, fixed_tau):
    k = xk.shape[1]
    beta, tau, sig = _unpack(theta, k, hier, fixed_tau)
    g = grad_original(xk, y, beta, tau, sig, r, a_tau, n_tau, a_sig, alpha2, hier)
    h = hess_original(xk, y, xtx, beta, tau, sig, r, a_tau, n_tau, a_sig, alpha2, hier)
    dim = g.size
    jac = np.ones(dim)
    if hier:
        jac[k] = tau
        jac[k + 1] = sig
    else:
        jac[k] = sig
    for i in range(dim):
        for j in range(dim):
            h[i, j] *= jac[i] * jac[j]
    for i in range(k, dim):
        h[i, i] += g[i] * jac[i]
    return g * jac, h


@njit(cache=True)
def _solve_spd(a, b):
    """Solve ``a x = b`` by Cholesky; ``ok`` is False when ``a`` is not positive definite."""
    m = a.shape[0]
    low = np.zeros((m, m))
    for j in range(m):
        d = a[j, j]
        for s in range(j):
            d -= low[j, s] * low[j, s]
        if not d > 0.0:
            return b, False
        low[j, j] = math.sqrt(d)
        for i in range(j + 1, m):
            v = a[i, j]
            for s in range(j):
                v -= low[i, s] * low[j, s]
            low[i, j] = v / low[j, j]
    z = np.empty(m)
    for i in range(m):
        v = b[i]
        for s in range(i):
            v -= low[i, s] * z[s]
        z[i] = v / low[i, i]
    x = np.empty(m)
    for i in range(m - 1, -1, -1):
        v = z[i]
        for s in range(i + 1, m):
            v -= low[s, i] * x[s]
        x[i] = v / low[i, i]
    return x, True


@njit(cache=True)
def newton(xk, y, xtx, theta0, r, a_tau, n_tau, a_sig, alpha2, const, hier, fixed_tau,
           tol, max_iter, armijo):
    """Safeguarded Newton ascent on theta = (beta, [log tau], log sigma2).

    Returns ``(theta, f, iterations, grad_norm, converged, history)``.
    """
    k = xk.shape[1]
    theta = theta0.copy()
    history = np.empty(max_iter + 1)
    beta, tau, sig = _unpack(theta, k, hier, fixed_tau)
    f = log_joint_value(xk, y, beta, tau, sig, r, a_tau, n_tau, a_sig, alpha2, const, hier)
    history[0] = f
    it = 0
    converged = False
    gnorm = np.inf
    while True:
        g, h = _theta_derivs(xk, y, xtx, theta, r, a_tau, n_tau, a_sig, alpha2, hier, fixed_tau)
        gnorm = np.max(np.abs(g))
        if gnorm <= tol * (1.0 + abs(f)):
            converged = True
            break
        if it >= max_iter:
            break
        direction, ok = _solve_spd(-h, g)
        if not ok:
            scale = max(1.0, math.sqrt(g @ g))
            direction = g / scale
        slope = g @ direction
        step = 1.0
        for i in range(k):
            if direction[i] * theta[i] < 0.0:
                step = min(step, -0.9 * theta[i] / direction[i])
        accepted = False
        f_new = f
        trial = theta
        while step > 1e-14:
            trial = theta + step * direction
            tb, tt, ts = _unpack(trial, k, hier, fixed_tau)
            f_new = -np.inf
            if np.min(np.abs(tb)) > 1e-300:
                f_new = log_joint_value(xk, y, tb, tt, ts, r, a_tau, n_tau, a_sig, alpha2,
                                        const, hier)
            if f_new >= f + armijo * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        theta = trial
        f = f_new
        it += 1
        history[it] = f
    return theta, f, it, gnorm, converged, history[:it + 1].copy()
