"""Independent reference implementations used to cross-check the solvers.

Everything here deliberately avoids the library's solution paths: the
likelihood oracle is a scalar loop, the ROF reference is a dual
fixed-point iteration, and the synthesis oracle is plain subgradient
descent with best-iterate tracking.  Shared operator definitions
(gradient/divergence) are the problem statement itself, not a solver.
"""

import math

import numpy as np

from mixdenoise.tv import divergence, fidelity_coefficient, gradient


def nll_scalar_loop(u, f, params):
    """Negative log-likelihood by direct per-pixel summation."""
    total = 0.0
    ratios = params.ratios
    variances = params.variances
    for i in range(u.shape[0]):
        for j in range(u.shape[1]):
            z = u[i, j] - f[i, j]
            dens = 0.0
            for r, var in zip(ratios, variances):
                dens += r / math.sqrt(2.0 * math.pi * var) * math.exp(
                    -z * z / (2.0 * var)
                )
            total -= math.log(dens)
    return total


def laplacian_scalar_loop(v):
    """Neumann 5-point Laplacian by explicit neighbor sums."""
    out = np.zeros_like(v)
    h, w = v.shape
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                ii, jj = i + di, j + dj
                if 0 <= ii < h and 0 <= jj < w:
                    acc += v[ii, jj] - v[i, j]
            out[i, j] = acc
    return out


def rof_energy(v, f, weight):
    g = gradient(v)
    return float(
        0.5 * ((v - f) ** 2).sum() + weight * np.sqrt((g ** 2).sum(axis=0)).sum()
    )


def chambolle_rof(f, weight, n_iter=3000, tau=0.25):
    """Dual fixed-point iteration for min 0.5||v-f||^2 + weight*TV(v)."""
    p = np.zeros((2,) + f.shape)
    for _ in range(n_iter):
        g = gradient(divergence(p) - f / weight)
        norm = np.sqrt((g ** 2).sum(axis=0))
        p = (p + tau * g) / (1.0 + tau * norm)[None]
    return f - weight * divergence(p)


def synthesis_objective(v, f, u_next, mu, w, params, tv_weight, coupling):
    c = fidelity_coefficient(w, params)
    g = gradient(v)
    return float(
        0.5 * (c * (v - f) ** 2).sum()
        + tv_weight * np.sqrt((g ** 2).sum(axis=0)).sum()
        + 0.5 * coupling * ((u_next - v - mu) ** 2).sum()
    )


def subgradient_descent(f, u_next, mu, w, params, tv_weight, coupling,
                        iters=30000):
    """Diminishing-step subgradient descent on the synthesis objective.

    Returns the best energy seen.  Slow but solver-free; adequate for
    8x8 instances.
    """
    c = fidelity_coefficient(w, params)
    v = f.copy()
    best = synthesis_objective(v, f, u_next, mu, w, params, tv_weight, coupling)
    gamma0 = 1.0 / (c.max() + coupling)
    for t in range(iters):
        g = gradient(v)
        norm = np.sqrt((g ** 2).sum(axis=0))
        unit = np.where(norm[None] > 0, g / np.maximum(norm, 1e-300)[None], 0.0)
        step_dir = c * (v - f) - tv_weight * divergence(unit) + coupling * (
            v - (u_next - mu)
        )
        v = v - gamma0 / math.sqrt(t + 1.0) * step_dir
        e = synthesis_objective(v, f, u_next, mu, w, params, tv_weight, coupling)
        if e < best:
            best = e
    return best
