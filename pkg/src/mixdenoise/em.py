"""EM core for per-pixel Gaussian mixture noise.

Works on the residual z = u - f.  The negative log-likelihood of a
zero-mean K-component Gaussian mixture is bounded above by a surrogate
that introduces per-pixel component probabilities w plus an entropy
term; both closed-form updates (mixture parameters and weights) are
implemented here, together with the fixed-residual EM loop.

All reductions use numpy's fixed-order pairwise summation (no parallel
reductions), so results are independent of any external scheduling.
"""

from dataclasses import dataclass

import numpy as np

#: Lower clamp for per-pixel weights; keeps w ln w finite.
WEIGHT_EPS = 1e-12
#: Lower bound for component variances (internal [0,1]^2 scale).
VARIANCE_FLOOR = 1e-10

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class NoiseParams:
    """Mixture ratios and component variances of the noise model.

    Scale-agnostic: the pipeline keeps variances on the internal [0,1]^2
    scale, but nothing here depends on the unit.  Library-produced
    parameter sets are kept in canonical order (variances ascending);
    direct construction may use any order, which the label-equivariance
    tests rely on.
    """

    ratios: tuple
    variances: tuple

    def __post_init__(self):
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        object.__setattr__(self, "variances", tuple(float(v) for v in self.variances))

    @property
    def ncomponents(self):
        return len(self.ratios)

    def validate(self):
        r = np.array(self.ratios)
        v = np.array(self.variances)
        if len(r) != len(v) or len(r) < 1:
            raise ValueError("ratios and variances must have equal length >= 1")
        if abs(r.sum() - 1.0) > 1e-12:
            raise ValueError(f"ratios sum to {r.sum()!r}, expected 1")
        if np.any(r <= 0) or np.any(r > 1):
            raise ValueError("each ratio must lie in (0, 1]")
        if np.any(v < VARIANCE_FLOOR):
            raise ValueError(f"variances must be >= {VARIANCE_FLOOR}")
        return self

    def canonical(self):
        """Copy with components sorted by ascending variance."""
        order = np.argsort(self.variances, kind="stable")
        return NoiseParams(
            tuple(self.ratios[i] for i in order),
            tuple(self.variances[i] for i in order),
        )

    @classmethod
    def from_sigmas255(cls, ratios, sigmas):
        """Build from standard deviations on the 0-255 scale."""
        return cls(tuple(ratios), tuple((s / 255.0) ** 2 for s in sigmas))


def uniform_weights(ncomponents, shape):
    """Weight field with every component at 1/K."""
    return np.full((ncomponents,) + tuple(shape), 1.0 / ncomponents)


def validate_weights(w, tol=1e-10):
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 3:
        raise ValueError(f"weight field must be (K, H, W), got {w.shape}")
    colsum = w.sum(axis=0)
    if np.any(np.abs(colsum - 1.0) > tol):
        raise ValueError("per-pixel weights do not sum to 1")
    if np.any(w < 0) or np.any(w > 1):
        raise ValueError("weights outside [0, 1]")
    return w


def _component_log_densities(z, params):
    """(K, H, W) array of ln[r_k p_k(z)] for zero-mean Gaussian p_k."""
    var = np.array(params.variances)[:, None, None]
    logr = np.log(params.ratios)[:, None, None]
    return logr - _HALF_LOG_2PI - 0.5 * np.log(var) - z[None] ** 2 / (2.0 * var)


def neg_log_likelihood(u, f, params):
    """-sum_x ln sum_k r_k p_k(u(x) - f(x)) with Gaussian components."""
    z = np.asarray(u, dtype=np.float64) - np.asarray(f, dtype=np.float64)
    logd = _component_log_densities(z, params)
    m = logd.max(axis=0)
    lse = m + np.log(np.exp(logd - m[None]).sum(axis=0))
    return -float(lse.sum())


def surrogate_upper_bound(u, f, params, w, include_constants=False):
    """Weighted-fidelity upper bound of the negative log-likelihood.

    Returns
        0.5 sum z^2 w_k / var_k  -  sum w_k ln r_k
        + 0.5 sum w_k ln var_k  +  sum w_k ln w_k
    summed over pixels and components.  With include_constants=True the
    per-pixel 0.5 ln(2 pi) dropped from that expression is restored, so
    the bound touches neg_log_likelihood exactly at the closed-form
    weights (the minimizing w recovers the likelihood).
    """
    z = np.asarray(u, dtype=np.float64) - np.asarray(f, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    var = np.array(params.variances)[:, None, None]
    logr = np.log(params.ratios)[:, None, None]
    # Accumulate per pixel before the global sum: the four raw terms are
    # large and cancel, and summing them separately would cost several
    # digits against the likelihood they bound.
    per_pixel = (
        w * (z[None] ** 2 / (2.0 * var) - logr + 0.5 * np.log(var))
        + w * np.log(np.maximum(w, WEIGHT_EPS))
    ).sum(axis=0)
    if include_constants:
        per_pixel = per_pixel + _HALF_LOG_2PI
    return float(per_pixel.sum())


def update_weights(u, f, params, clamp=True):
    """Closed-form per-pixel component probabilities.

    w_k(x) proportional to (r_k / sigma_k) exp(-z^2 / 2 var_k), computed
    in log space, normalized over k, clamped to [eps, 1 - eps] and
    renormalized.  Renormalization may undercut the lower clamp by an
    O(eps^2) amount, which downstream tolerances absorb.  clamp=False
    returns the raw posterior (weights may underflow to exact 0, which
    the surrogate handles via the 0 ln 0 = 0 convention); the raw form
    is the one that meets the likelihood bound with equality.
    """
    z = np.asarray(u, dtype=np.float64) - np.asarray(f, dtype=np.float64)
    logd = _component_log_densities(z, params)
    logd -= logd.max(axis=0)[None]
    w = np.exp(logd)
    w /= w.sum(axis=0)[None]
    if clamp:
        w = np.clip(w, WEIGHT_EPS, 1.0 - WEIGHT_EPS)
        w /= w.sum(axis=0)[None]
    return w


def update_params(u, f, w, canonicalize=True, return_permutation=False):
    """Closed-form mixture-parameter update from a weight field.

    r_k is the mean weight, var_k the weighted mean squared residual.
    The variance floor is applied, then components are re-sorted into
    canonical (ascending variance) order unless canonicalize is False.
    With return_permutation=True the applied ordering is also returned
    so callers holding weight maps can permute them in lockstep.
    """
    z = np.asarray(u, dtype=np.float64) - np.asarray(f, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    mass = w.sum(axis=(1, 2))
    ratios = mass / z.size
    variances = (w * z[None] ** 2).sum(axis=(1, 2)) / mass
    variances = np.maximum(variances, VARIANCE_FLOOR)
    if canonicalize:
        order = np.argsort(variances, kind="stable")
    else:
        order = np.arange(len(ratios))
    params = NoiseParams(tuple(ratios[order]), tuple(variances[order]))
    if return_permutation:
        return params, order
    return params


def em_fit(residual, ncomponents, init, max_iter=100, tol=1e-8):
    """Fit mixture parameters to a fixed residual field.

    Alternates update_weights / update_params starting from `init` until
    the relative change of the negative log-likelihood drops below `tol`
    or `max_iter` sweeps are done.  The likelihood sequence is monotone
    nonincreasing (standard EM descent).  Returns the last parameter set
    together with the weight field computed in the final sweep (i.e. the
    weights that produced those parameters).
    """
    z = validate_image_like(residual)
    init.validate()
    if init.ncomponents != ncomponents:
        raise ValueError(
            f"init has {init.ncomponents} components, expected {ncomponents}"
        )
    zeros = np.zeros_like(z)
    params = init
    w = None
    nll_prev = neg_log_likelihood(z, zeros, params)
    for _ in range(max_iter):
        w = update_weights(z, zeros, params)
        params, perm = update_params(z, zeros, w, return_permutation=True)
        w = w[perm]
        nll = neg_log_likelihood(z, zeros, params)
        rel = abs(nll_prev - nll) / max(abs(nll_prev), np.finfo(float).tiny)
        if rel <= tol:
            break
        nll_prev = nll
    return params, w


def validate_image_like(arr, name="residual"):
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a
