"""Weighted-fidelity TV synthesis step, solved by split Bregman.

The synthesis objective blends a per-pixel weighted quadratic data term
with isotropic TV and a quadratic coupling to the denoiser output:

    E(v) = 0.5 sum_x sum_k w_k(x) (v - f)^2 / var_k
         + tv_weight * sum_x |grad v(x)|
         + 0.5 * coupling * sum_x (u_next - v - mu)^2

Splitting introduces d = grad v with a Bregman variable b; each inner
iteration solves the per-pixel linear system by lexicographic
Gauss-Seidel (the fidelity coefficient varies per pixel, so a spectral
solve is unavailable), then applies vector shrinkage to d and the
Bregman update to b.

Discretization: forward-difference gradient with replicate (Neumann)
boundary, divergence built as its exact negative adjoint, so
<grad v, p> = -<v, div p> holds to rounding error.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .em import validate_weights


@dataclass(frozen=True)
class TvConfig:
    """Knobs of the synthesis solver.

    tv_weight may be 0 (pure weighted quadratic blend); penalty is the
    split quadratic weight and must be positive whenever tv_weight is.
    coupling may be 0, which detaches the solve from the denoiser
    variable (plain weighted ROF).
    """

    tv_weight: float = 0.01
    penalty: float = 0.05
    coupling: float = 0.8
    bregman_iters: int = 5
    sweeps: int = 20
    linear_tol: float = 1e-6
    literal_bregman_step: bool = False

    def validate(self):
        if self.tv_weight < 0:
            raise ValueError("tv_weight must be >= 0")
        if self.penalty < 0 or (self.tv_weight > 0 and self.penalty == 0):
            raise ValueError("penalty must be > 0 when tv_weight > 0")
        if self.coupling < 0:
            raise ValueError("coupling must be >= 0")
        if self.bregman_iters < 1 or self.sweeps < 1:
            raise ValueError("iteration counts must be >= 1")
        return self


def gradient(v):
    """Forward-difference gradient, zero across the replicate boundary.

    Returns a (2, H, W) field: component 0 along x (columns), 1 along y
    (rows); the last column/row of the respective component is 0.
    """
    v = np.asarray(v, dtype=np.float64)
    g = np.zeros((2,) + v.shape)
    g[0, :, :-1] = v[:, 1:] - v[:, :-1]
    g[1, :-1, :] = v[1:, :] - v[:-1, :]
    return g


def divergence(p):
    """Exact negative adjoint of `gradient` (backward differences)."""
    p = np.asarray(p, dtype=np.float64)
    out = np.zeros(p.shape[1:])
    out[:, 0] += p[0, :, 0]
    out[:, 1:-1] += p[0, :, 1:-1] - p[0, :, :-2]
    out[:, -1] -= p[0, :, -2]
    out[0, :] += p[1, 0, :]
    out[1:-1, :] += p[1, 1:-1, :] - p[1, :-2, :]
    out[-1, :] -= p[1, -2, :]
    return out


def shrink(q, threshold):
    """Vector soft-threshold: q/|q| * max(|q| - threshold, 0).

    Accepts a single 2-vector or a (2, ...) field; zero vectors map to
    zero.  Never increases the vector norm.
    """
    q = np.asarray(q, dtype=np.float64)
    norm = np.sqrt((q ** 2).sum(axis=0))
    scale = np.zeros_like(norm)
    nz = norm > 0
    scale[nz] = np.maximum(norm[nz] - threshold, 0.0) / norm[nz]
    return q * scale[None]


def fidelity_coefficient(w, params):
    """Per-pixel quadratic data weight sum_k w_k / var_k."""
    var = np.array(params.variances)[:, None, None]
    return (np.asarray(w, dtype=np.float64) / var).sum(axis=0)


def synthesis_energy(v, f, u_next, mu, w, params, tv_weight, coupling):
    """Value of the synthesis objective at v."""
    v = np.asarray(v, dtype=np.float64)
    c = fidelity_coefficient(w, params)
    g = gradient(v)
    tv = np.sqrt((g ** 2).sum(axis=0)).sum()
    quad = 0.5 * (c * (v - f) ** 2).sum()
    couple = 0.5 * coupling * ((u_next - v - mu) ** 2).sum()
    return float(quad + tv_weight * tv + couple)


@njit(cache=True)
def _gauss_seidel(v, coeff, rhs, penalty, coupling, sweeps, tol):
    """In-place lexicographic Gauss-Seidel for [c - penalty*L + coupling] v = rhs.

    L is the Neumann 5-point Laplacian; each pixel's diagonal is
    c + penalty*deg + coupling with deg its in-grid neighbor count.
    Stops early when the max-norm residual falls below tol.  Returns the
    last measured residual.
    """
    h, w = v.shape
    res = 0.0
    for _ in range(sweeps):
        for i in range(h):
            for j in range(w):
                acc = 0.0
                deg = 0.0
                if i > 0:
                    acc += v[i - 1, j]
                    deg += 1.0
                if i < h - 1:
                    acc += v[i + 1, j]
                    deg += 1.0
                if j > 0:
                    acc += v[i, j - 1]
                    deg += 1.0
                if j < w - 1:
                    acc += v[i, j + 1]
                    deg += 1.0
                v[i, j] = (rhs[i, j] + penalty * acc) / (
                    coeff[i, j] + penalty * deg + coupling
                )
        res = 0.0
        for i in range(h):
            for j in range(w):
                acc = 0.0
                deg = 0.0
                if i > 0:
                    acc += v[i - 1, j]
                    deg += 1.0
                if i < h - 1:
                    acc += v[i + 1, j]
                    deg += 1.0
                if j > 0:
                    acc += v[i, j - 1]
                    deg += 1.0
                if j < w - 1:
                    acc += v[i, j + 1]
                    deg += 1.0
                r = rhs[i, j] + penalty * acc - (
                    coeff[i, j] + penalty * deg + coupling
                ) * v[i, j]
                if abs(r) > res:
                    res = abs(r)
        if res < tol:
            break
    return res


def solve_v(f, u_next, mu, w, params, cfg, warm=None):
    """Minimize the synthesis objective; returns (v, d, b).

    Runs cfg.bregman_iters of: linear solve for v (Gauss-Seidel),
    shrinkage update of d = grad v, Bregman update of b.  Warm-starts
    from a previous (v, d, b) triple when given, else v = f, d = grad f,
    b = 0.  With tv_weight == 0 and penalty == 0 the solve reduces to
    the per-pixel closed form in a single sweep.
    """
    cfg.validate()
    params.validate()
    f = _finite(f, "f")
    u_next = _finite(u_next, "u_next")
    mu = _finite(mu, "mu")
    w = validate_weights(w)
    c = fidelity_coefficient(w, params)
    rhs_fixed = c * f + cfg.coupling * (u_next - mu)

    if warm is not None:
        v, d, b = warm
        v = np.array(v, dtype=np.float64)
        d = np.array(d, dtype=np.float64)
        b = np.array(b, dtype=np.float64)
    else:
        v = np.array(f, dtype=np.float64)
        d = gradient(f)
        b = np.zeros_like(d)

    step = cfg.penalty if cfg.literal_bregman_step else 1.0
    for _ in range(cfg.bregman_iters):
        rhs = rhs_fixed + cfg.penalty * divergence(b - d)
        _gauss_seidel(v, c, rhs, cfg.penalty, cfg.coupling, cfg.sweeps, cfg.linear_tol)
        if cfg.penalty > 0:
            g = gradient(v)
            d = shrink(g + b, cfg.tv_weight / cfg.penalty)
            b = b + step * (g - d)
    return v, d, b


def _finite(arr, name):
    a = np.asarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a
