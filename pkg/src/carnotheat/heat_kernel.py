"""Heat kernels of ``sum X_i^2``: Euclidean closed form and the step-two
oscillatory integral

    p(g, e, t) = 2^{m2} (4 pi t)^{-Q/2} int cos(<sigma, lam>/t)
                 det(j(T))^{1/2} exp(-<T coth(T) z, z>/(4t)) dlam,

with ``T = sqrt(-J(lam)^2)`` and ``j(x) = x / sinh(x)``.  The spectral
functions are applied through an eigendecomposition of ``-J(lam)^2``; only
the cosine part of the Fourier factor survives because the amplitude is even
in ``lam``.

The lambda rule does not depend on ``t``; all quadrature data is computed
once per engine.  Every value comes with the difference between the
configured rule and a rule with half as many panels per axis, plus a tail
bound, as its error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .algebra import StructureConstants, gauge, kaplan_map
from .estimate import Estimate
from .quadrature import box_rule, gauss_legendre_panels, tensor_rule

__all__ = [
    "KernelEngine",
    "decoupling_marginal",
    "euclidean_kernel",
    "gaussian_bound_audit",
    "kernel_normalization",
    "step2_kernel",
]

_SMALL = 1e-3
_BLOCK = 1 << 16


def euclidean_kernel(z, t):
    """``(4 pi t)^{-n/2} exp(-|z|^2 / 4t)`` with ``n = z.shape[-1]``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    n = z.shape[-1]
    return (4 * np.pi * t) ** (-n / 2) * np.exp(-np.sum(z * z, axis=-1) / (4 * t))


def tau_over_sinh(tau):
    tau = np.asarray(tau, dtype=float)
    small = np.abs(tau) < _SMALL
    t2 = tau * tau
    safe = np.where(small, 1.0, tau)
    # 2 tau e^{-tau} / (1 - e^{-2 tau}) does not overflow for large tau
    big = 2 * safe * np.exp(-np.abs(safe)) / -np.expm1(-2 * np.abs(safe)) * np.sign(safe)
    return np.where(small, 1 - t2 / 6 + 7 * t2 * t2 / 360, big)


def tau_coth(tau):
    tau = np.asarray(tau, dtype=float)
    small = np.abs(tau) < _SMALL
    t2 = tau * tau
    safe = np.where(small, 1.0, np.abs(tau))
    big = safe / np.tanh(safe)
    return np.where(small, 1 + t2 / 3 - t2 * t2 / 45, big)


@dataclass(frozen=True)
class _LambdaRule:
    nodes: np.ndarray     # (K, m2)
    weights: np.ndarray   # (K,)
    amp: np.ndarray       # (K,) det(j(T))^{1/2}
    quad: np.ndarray      # (K, m, m) T coth T


@dataclass(frozen=True)
class KernelEngine:
    """Evaluator of ``p(g, e, t)`` on a catalog group.

    ``mode`` is ``"euclidean"`` for step one and ``"step2"`` for step two;
    other steps are rejected (no closed formula exists there; use the
    diffusion sampler).  ``lam_max`` truncates each lambda coordinate,
    ``n_panels`` and ``order`` set the Gauss-Legendre panels per axis.
    """

    sc: StructureConstants
    lam_max: float | None = None
    n_panels: int | None = None
    order: int | None = None
    mode: str = field(init=False)

    def __post_init__(self):
        step = self.sc.step
        if step == 1:
            mode = "euclidean"
        elif step == 2:
            mode = "step2"
        else:
            raise ValueError("explicit kernels exist only for step 1 and step 2 groups; "
                             "use the diffusion sampler for higher step")
        object.__setattr__(self, "mode", mode)
        m2 = self.sc.strat.layer_dims[1] if step == 2 else 0
        if self.lam_max is None:
            object.__setattr__(self, "lam_max", 44.0 if m2 == 1 else 30.0)
        if self.n_panels is None:
            object.__setattr__(self, "n_panels", 96 if m2 == 1 else 12)
        if self.order is None:
            object.__setattr__(self, "order", 16 if m2 == 1 else 8)

    @property
    def strat(self):
        return self.sc.strat

    @property
    def m2(self) -> int:
        return self.strat.layer_dims[1] if self.mode == "step2" else 0

    def _build_rule(self, n_panels) -> _LambdaRule:
        m2, m = self.m2, self.strat.m
        if m2 == 1:
            x, w = gauss_legendre_panels(0.0, self.lam_max, n_panels, self.order)
            nodes, weights = x[:, None], 2 * w
        else:
            nodes, weights = tensor_rule(
                [gauss_legendre_panels(-self.lam_max, self.lam_max, n_panels, self.order)] * m2)
        amp = np.empty(nodes.shape[0])
        quad = np.empty((nodes.shape[0], m, m))
        for s in range(0, nodes.shape[0], _BLOCK):
            j = kaplan_map(nodes[s:s + _BLOCK], self.sc)
            a = -np.einsum("kab,kbc->kac", j, j)
            a = 0.5 * (a + np.swapaxes(a, -1, -2))
            mu, vec = np.linalg.eigh(a)
            tau = np.sqrt(np.clip(mu, 0.0, None))
            amp[s:s + _BLOCK] = np.sqrt(np.prod(tau_over_sinh(tau), axis=-1))
            quad[s:s + _BLOCK] = np.einsum("kai,ki,kbi->kab", vec, tau_coth(tau), vec)
        return _LambdaRule(nodes, weights, amp, quad)

    @cached_property
    def fine(self) -> _LambdaRule:
        return self._build_rule(self.n_panels)

    @cached_property
    def coarse(self) -> _LambdaRule:
        return self._build_rule(max(1, self.n_panels // 2))

    def tail_bound(self) -> float:
        """Bound on the lambda integral of the amplitude outside the box."""
        if self.mode != "step2":
            return 0.0
        lam = self.lam_max
        # amplitude <= prod over nonzero eigenvalues of tau/sinh tau, each eigenvalue
        # of -J^2 is at least c |lam|^2 along some direction; bound radially by the
        # amplitude sampled on the box boundary times the exponential tail mass
        probe = np.zeros((1, self.m2))
        probe[0, 0] = lam
        j = kaplan_map(probe, self.sc)
        mu = np.linalg.eigvalsh(-j[0] @ j[0])
        rate = math.sqrt(max(mu.max(), 0.0)) / lam
        if rate == 0:
            return math.inf
        area = 2 * self.m2 * (2 * lam) ** (self.m2 - 1)
        return area * (lam + 1 / rate) * math.exp(-rate * lam) * 2 * lam / rate

    def prefactor(self, t: float) -> float:
        return 2.0 ** self.m2 * (4 * np.pi * t) ** (-self.strat.homogeneous_dim / 2)

    def _sum(self, rule: _LambdaRule, z, sigma, t, extra=None):
        """``sum_k w_k amp_k exp(-z M_k z/4t) * F_k`` over the rule, chunked over points."""
        out = np.zeros(z.shape[0])
        m = z.shape[1]
        k_total = rule.nodes.shape[0]
        k_step = min(k_total, _BLOCK)
        chunk = max(1, _BLOCK // k_step)
        base = rule.weights * rule.amp
        if extra is not None:
            base = base * extra
        for ks in range(0, k_total, k_step):
            kk = slice(ks, ks + k_step)
            quad_flat = rule.quad[kk].reshape(-1, m * m).T
            for s in range(0, z.shape[0], chunk):
                zc = z[s:s + chunk]
                q = (zc[:, :, None] * zc[:, None, :]).reshape(-1, m * m) @ quad_flat
                terms = np.exp(-q / (4 * t)) * base[kk]
                if sigma is not None:
                    terms = terms * np.cos(sigma[s:s + chunk] @ rule.nodes[kk].T / t)
                out[s:s + chunk] += terms.sum(axis=-1)
        return out

    def evaluate(self, points, t: float):
        """Kernel values and error bounds at ``points`` of shape ``(..., N)``."""
        if t <= 0:
            raise ValueError("t must be positive")
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, self.strat.total_dim)
        if self.mode == "euclidean":
            vals = euclidean_kernel(flat, t)
            return vals.reshape(pts.shape[:-1]), np.zeros(pts.shape[:-1])
        m = self.strat.m
        z, sigma = flat[:, :m], flat[:, m:]
        pref = self.prefactor(t)
        fine = pref * self._sum(self.fine, z, sigma, t)
        coarse = pref * self._sum(self.coarse, z, sigma, t)
        err = np.abs(fine - coarse) + pref * self.tail_bound()
        return fine.reshape(pts.shape[:-1]), err.reshape(pts.shape[:-1])


def step2_kernel(g, t: float, engine: KernelEngine) -> Estimate:
    """``p(g, e, t)`` as an Estimate (quadrature refinement error)."""
    if engine.mode != "step2":
        raise ValueError("step2_kernel needs a step-two group")
    val, err = engine.evaluate(np.asarray(g, dtype=float)[None, :], t)
    return Estimate(float(val[0]), float(err[0]), "quadrature")


def _sigma_weights(engine, rule, t, s_max, n_panels, order):
    """``prod_j sum_{sigma_j} w cos(sigma_j lam_j / t)`` on the lambda nodes."""
    xs, ws = gauss_legendre_panels(-s_max, s_max, n_panels, order)
    out = np.ones(rule.nodes.shape[0])
    step = max(1, (1 << 22) // xs.size)
    for j in range(engine.m2):
        for s in range(0, out.size, step):
            lam = rule.nodes[s:s + step, j]
            out[s:s + step] *= np.cos(np.outer(lam, xs) / t) @ ws
    return out


def _default_sigma_box(t, tol):
    # vertical decay of step-two kernels is exp(-c |sigma| / t) with c >= pi/4
    return t * (4.0 / np.pi * math.log(1.0 / tol) + 8.0)


def decoupling_marginal(engine: KernelEngine, z, t: float, tol: float = 1e-8,
                        sigma_max: float | None = None, sigma_panels: int | None = None,
                        order: int = 16) -> Estimate:
    """``int p((z, sigma), e, t) d sigma`` over the vertical coordinates.

    The vertical integral is a tensor Gauss-Legendre rule on
    ``[-sigma_max, sigma_max]^{m2}``.  The error sums the lambda-rule
    refinement difference, the sigma-rule refinement difference and the change
    from shrinking the box by a quarter.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if engine.mode == "euclidean":
        vals = euclidean_kernel(z, t)
        return _pack(vals, np.zeros_like(vals))
    if t <= 0:
        raise ValueError("t must be positive")
    s_max = sigma_max if sigma_max is not None else _default_sigma_box(t, tol)
    panels = sigma_panels or max(8, int(math.ceil(4 * s_max / t)))
    pref = engine.prefactor(t)

    def run(rule, s, npan):
        wts = _sigma_weights(engine, rule, t, s, npan, order)
        return pref * engine._sum(rule, z, None, t, extra=wts)

    best = run(engine.fine, s_max, panels)
    err_lam = np.abs(best - run(engine.coarse, s_max, panels))
    err_sig = np.abs(best - run(engine.fine, s_max, max(1, panels // 2)))
    err_box = np.abs(best - run(engine.fine, 0.75 * s_max, max(1, (3 * panels) // 4)))
    err = err_lam + err_sig + err_box
    return _pack(best, err, {"lambda": err_lam, "sigma": err_sig, "box": err_box})


def _pack(vals, errs, breakdown=None):
    breakdown = breakdown or {}
    if vals.size == 1:
        return Estimate(float(vals[0]), float(errs[0]), "quadrature",
                        {k: float(v[0]) for k, v in breakdown.items()})
    return Estimate(vals, errs, "quadrature", breakdown)


def kernel_normalization(engine: KernelEngine, t: float, tol: float = 1e-8,
                         z_panels: int | None = None, order: int | None = None) -> Estimate:
    """``int_G p(g, e, t) dg`` over a box sized from the Gaussian upper bound.

    The horizontal rule is a tensor product, so the defaults shrink with
    ``m``: 6 panels of order 16 per axis for ``m <= 2``, 2 of order 12 above.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    m = engine.strat.m
    z_panels = z_panels or (6 if m <= 2 else 2)
    order = order or (16 if m <= 2 else 12)
    z_max = math.sqrt(4 * t * math.log(1.0 / tol)) * 1.25
    nodes, weights = box_rule(np.full(m, -z_max), np.full(m, z_max), z_panels, order)
    if engine.mode == "euclidean":
        total = float(weights @ euclidean_kernel(nodes, t))
        coarse_n, coarse_w = box_rule(np.full(m, -z_max), np.full(m, z_max),
                                      max(1, z_panels // 2), order)
        err = abs(total - float(coarse_w @ euclidean_kernel(coarse_n, t)))
        return Estimate(total, err, "quadrature")
    marg = decoupling_marginal(engine, nodes, t, tol=tol)
    total = float(weights @ marg.value)
    err_inner = float(weights @ marg.error)
    coarse_n, coarse_w = box_rule(np.full(m, -z_max), np.full(m, z_max),
                                  max(1, z_panels // 2), order)
    coarse = float(coarse_w @ decoupling_marginal(engine, coarse_n, t, tol=tol).value)
    err_z = abs(total - coarse)
    return Estimate(total, err_inner + err_z, "quadrature",
                    {"inner": err_inner, "z": err_z})


def gaussian_bound_audit(engine: KernelEngine, points, ts, n_bins: int = 12) -> dict:
    """Fit ``C t^{-Q/2} exp(-c |g|^2/t)`` envelopes bracketing sampled kernel values.

    For every sample ``y = log(t^{Q/2} p)`` and ``x = |g|^2 / t``.  The
    per-bin maxima and minima of ``y`` are fit by straight lines whose
    negated slopes are ``beta`` (upper) and ``alpha`` (lower); intercepts are
    then shifted so the envelopes bracket every sample.  Qualitative only.
    """
    q = engine.strat.homogeneous_dim
    xs, ys = [], []
    pts = np.asarray(points, dtype=float)
    for t in np.atleast_1d(ts):
        vals, errs = engine.evaluate(pts, float(t))
        keep = vals > 10 * errs + 1e-300
        xs.append(gauge(pts[keep], engine.sc) ** 2 / t)
        ys.append(np.log(vals[keep] * t ** (q / 2)))
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    edges = np.linspace(x.min(), x.max(), n_bins + 1)
    which = np.clip(np.digitize(x, edges) - 1, 0, n_bins - 1)
    up_x, up_y, lo_x, lo_y = [], [], [], []
    for b in range(n_bins):
        sel = which == b
        if not sel.any():
            continue
        i = np.argmax(np.where(sel, y, -np.inf))
        k = np.argmin(np.where(sel, y, np.inf))
        up_x.append(x[i]); up_y.append(y[i])
        lo_x.append(x[k]); lo_y.append(y[k])
    beta = -np.polyfit(up_x, up_y, 1)[0] if len(up_x) > 1 else math.nan
    alpha = -np.polyfit(lo_x, lo_y, 1)[0] if len(lo_x) > 1 else math.nan
    log_c_up = float(np.max(y + beta * x))
    log_c_lo = float(np.min(y + alpha * x))
    c = math.exp(max(log_c_up, -log_c_lo))
    upper = y <= math.log(c) - beta * x + 1e-9
    lower = y >= -math.log(c) - alpha * x - 1e-9
    return {
        "alpha": float(alpha),
        "beta": float(beta),
        "C": c,
        "brackets": bool(upper.all() and lower.all()),
        "n_samples": int(x.size),
    }
