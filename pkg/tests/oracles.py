"""Independent reference computations used by the test suite."""
import math

import numpy as np


def ou_dense_gamma(path, level, t, obs_scale=1.0, sigma=0.5, x0=0.0):
    """``(gamma_t^l(1), gamma_t^l(id))`` for discretized OU by one dense Gaussian integral.

    The weighted states ``x_0..x_{n-1}`` are jointly Gaussian; the log-weight is
    ``b'x - x'Dx/2`` so the expectation is a ratio of Gaussian normalisers.
    """
    dt = 2.0 ** -level
    n = t * 2 ** level
    a = 1.0 - dt
    q = sigma * sigma * dt
    dy = path.increments(level)[:n, 0]
    mean = x0 * a ** np.arange(n)
    cov = np.zeros((n, n))
    for i in range(1, n):
        for j in range(1, n):
            k = min(i, j)
            cov[i, j] = q * sum(a ** (i - m) * a ** (j - m) for m in range(1, k + 1))
    b = obs_scale * dy
    D = dt * obs_scale ** 2 * np.eye(n)
    # condition on the deterministic x_0 by working with the free coordinates 1..n-1
    free = slice(1, n)
    const = b[0] * x0 - 0.5 * D[0, 0] * x0 * x0
    S = cov[free, free]
    bf, Df, mf = b[free], D[free, free], mean[free]
    if S.size == 0:
        log_g = const
        tilted_last = x0
    else:
        prec = np.linalg.inv(S) + Df
        rhs = np.linalg.solve(S, mf) + bf
        post_mean = np.linalg.solve(prec, rhs)
        _, logdet_s = np.linalg.slogdet(S)
        _, logdet_p = np.linalg.slogdet(prec)
        log_g = (const - 0.5 * logdet_s - 0.5 * logdet_p - 0.5 * mf @ np.linalg.solve(S, mf)
                 + 0.5 * rhs @ post_mean)
        tilted_last = post_mean[-1]
    g1 = math.exp(log_g)
    return g1, g1 * a * tilted_last


def ou_quadrature_gamma(path, level, t, obs_scale=1.0, sigma=0.5, nodes=80):
    """The same two quantities by tensor Gauss-Hermite quadrature over the free states.

    Each free state is ``a x_prev + sqrt(q) z`` with ``z`` on probabilists' Hermite
    nodes, so the Gaussian transition density is absorbed into the weights and
    the remaining integrand ``exp(sum h dy - dt h^2 / 2)`` is smooth and entire.
    """
    dt = 2.0 ** -level
    K = t * 2 ** level
    dy = path.increments(level)[:K, 0]
    a = 1.0 - dt
    dims = K - 1
    if dims == 0:
        return 1.0, 0.0
    z, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / math.sqrt(2 * math.pi)
    grids = np.meshgrid(*([z] * dims), indexing="ij")
    weight = np.ones_like(grids[0])
    for g in np.meshgrid(*([w] * dims), indexing="ij"):
        weight = weight * g
    x = np.zeros_like(grids[0])
    log_w = np.zeros_like(x)
    for k in range(K):
        h = obs_scale * x
        log_w = log_w + h * dy[k] - 0.5 * dt * h * h
        if k < dims:
            x = a * x + sigma * math.sqrt(dt) * grids[k]
    tilt = weight * np.exp(log_w)
    return float(np.sum(tilt)), float(np.sum(tilt * a * x))
