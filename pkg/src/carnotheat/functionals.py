"""Heat-semigroup energies: BBM functional, Sobolev energy, heat-Besov seminorms.

The double integral ``int int p(g, g', t) |f(g') - f(g)|^p dg' dg`` is
reduced, by right invariance of Haar measure, to ``E_h[I(h)]`` with
``I(h) = int |f(g o h) - f(g)|^p dg`` and ``h`` distributed by the heat
kernel at time ``t``.  The inner integral is taken on the support box ``B``
of ``f`` through

    I(h) = ||f||_p^p + int_B (|f(g o h) - f(g)|^p - |f(g o h)|^p) dg,

which holds because ``int_G |f(g o h)|^p dg = ||f||_p^p`` and ``f = 0`` off
``B``.  Monte Carlo over ``h`` uses the linear control variate
``L(h) = int_B |<grad_H f(g), z(h)>|^p dg`` whose mean is known in closed
form: ``<grad_H f(g), z>`` is ``N(0, 2t |grad_H f(g)|^2)``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special
from scipy.interpolate import PchipInterpolator

from .algebra import StructureConstants, bch_product
from .diffusion import DiffusionSampler, ledoux_constant, sample_endpoints
from .estimate import SCHEMA_VERSION, Estimate, LimitReport, extrapolate
from .frame import horizontal_frame, horizontal_gradient
from .quadrature import box_rule, gauss_legendre_panels, tensor_rule
from .testfns import ScalarField

__all__ = [
    "PhiProfile",
    "absolute_moment",
    "bbm_energy",
    "bbm_limit",
    "bbm_limits",
    "bbm_seminorm_limit",
    "besov_embedding_bound",
    "besov_seminorm",
    "diffquot_bound_check",
    "diffquot_bound_profile",
    "gaussian_moment_constant",
    "lp_norm",
    "ms_limit",
    "phi_p2_oracle",
    "phi_profile",
    "phi_profiles",
    "sandwich_check",
    "sobolev_energy",
]

Law = "DiffusionSampler | StructureConstants"


# -- constants ---------------------------------------------------------------

def absolute_moment(p: float, var: float = 1.0) -> float:
    """``E|N(0, var)|^p``."""
    return (2 * var) ** (p / 2) * math.gamma((p + 1) / 2) / math.sqrt(math.pi)


def gaussian_moment_constant(p: float, m: int) -> float:
    """``C_p = E ||N(0, 2 I_m)||^p = 2^p Gamma((m+p)/2) / Gamma(m/2)``."""
    return 2 ** p * math.gamma((m + p) / 2) / math.gamma(m / 2)


def _check_p(p):
    if not (np.isfinite(p) and p >= 1):
        raise ValueError("p must be finite and >= 1")


def _is_zero(f: ScalarField) -> bool:
    return f.name == "zero"


def _check_support(f: ScalarField):
    if not (np.all(np.isfinite(f.lo)) and np.all(np.isfinite(f.hi))):
        raise ValueError("f must have a bounded support box")


# -- inner quadrature --------------------------------------------------------

def default_resolution(dim: int):
    """``(panels, order)`` for the fine and coarse inner rules in dimension ``dim``."""
    table = {1: ((32, 8), (16, 8)), 2: ((8, 8), (4, 8)), 3: ((4, 8), (2, 8)),
             4: ((2, 8), (1, 8))}
    return table.get(dim, ((1, 6), (1, 4)))


@dataclass
class _InnerGrid:
    nodes: np.ndarray
    weights: np.ndarray
    fg: np.ndarray
    grad: np.ndarray

    def norm(self, p):
        return float(np.sum(self.weights * np.abs(self.fg) ** p))

    def grad_energy(self, p):
        return float(np.sum(self.weights * np.sum(self.grad ** 2, axis=-1) ** (p / 2)))


def _inner_grid(f, sc, panels, order):
    nodes, weights = box_rule(f.lo, f.hi, panels, order)
    frame = horizontal_frame(sc)
    return _InnerGrid(nodes, weights, f(nodes), horizontal_gradient(f, nodes, frame))


def _inner_values(f, grid: _InnerGrid, sc, pts, ps):
    """``I_p(h)`` and ``L_p(h)`` for a batch of endpoints ``pts`` (b, N)."""
    m = sc.strat.m
    fgh = f(bch_product(grid.nodes[None, :, :], pts[:, None, :], sc))
    diff = np.abs(fgh - grid.fg)
    afgh = np.abs(fgh)
    proj = np.abs(pts[:, :m] @ grid.grad.T)
    out_i, out_l = [], []
    for p in ps:
        out_i.append(grid.norm(p) + (diff ** p - afgh ** p) @ grid.weights)
        out_l.append(proj ** p @ grid.weights)
    return np.array(out_i), np.array(out_l)


# -- heat laws ---------------------------------------------------------------

@dataclass
class _Law:
    points: np.ndarray
    weights: np.ndarray | None  # None -> equal-weight Monte Carlo
    outside: float = 0.0  # Gaussian mass outside the quadrature box
    outside_uncertain: float = 0.0  # part of it where I may differ from 2 ||f||_p^p
    method: str = "MC"


def _euclidean_law(sc, f, t, n_panels):
    """Gaussian ``N(0, 2t I)`` on a box of half-widths ``min(diam_k, 12 sd)``.

    Off the box either ``|z_k|`` exceeds the support diameter (so
    ``I = 2 ||f||_p^p`` exactly) or the mass is below ``e^-72``.
    """
    sd = math.sqrt(2 * t)
    half = np.minimum(f.hi - f.lo, 12 * sd)
    rules = []
    for c in half:
        # even panel count keeps z = 0 (a kink of I for p = 1) on a panel edge
        x, w = gauss_legendre_panels(-c, c, 2 * n_panels, 8)
        rules.append((x, w * np.exp(-x * x / (2 * sd * sd)) / (sd * math.sqrt(2 * math.pi))))
    nodes, weights = tensor_rule(rules)
    inside = float(np.prod(special.erf(half / (sd * math.sqrt(2)))))
    # only axes cut at 12 sd (short of the diameter) leave I undetermined outside
    cut = half < (f.hi - f.lo)
    uncertain = float(np.sum(special.erfc(half[cut] / (sd * math.sqrt(2)))))
    return _Law(nodes, weights, max(1.0 - inside, 0.0), min(uncertain, 1.0), "quadrature")


def _resolve_law(sampler, f, t, seed_offset, n_panels_law=None):
    if isinstance(sampler, StructureConstants):
        n_panels_law = n_panels_law or (6 if sampler.strat.total_dim == 1 else 2)
        if sampler.step != 1:
            raise ValueError("deterministic heat law is only available for Euclidean groups; "
                             "pass a DiffusionSampler")
        return sampler, [_euclidean_law(sampler, f, t, n) for n in (n_panels_law,
                                                                    n_panels_law // 2)]
    if isinstance(sampler, DiffusionSampler):
        s = sampler.at(t, seed=_mix_seed(sampler.seed, seed_offset),
                       h=min(sampler.h, t / MIN_STEPS))
        return sampler.sc, [_Law(sample_endpoints(s).points, None)]
    if callable(sampler):
        s = sampler(t, seed_offset)
        return s.sc, [_Law(sample_endpoints(s).points, None)]
    raise TypeError("sampler must be a DiffusionSampler, a factory, or a Euclidean group")


MIN_STEPS = 20


def _mix_seed(seed, offset):
    if offset == 0:
        return seed
    return int(np.random.SeedSequence([int(seed), int(offset)]).generate_state(1, np.uint64)[0])


def _estimate_from(i_vals, l_vals, law: _Law, p, t, grid, sc):
    """Control-variate estimate of ``E[I] / t^(p/2)``; returns ``(value, se)``."""
    el = absolute_moment(p, 2 * t) * grid.grad_energy(p)
    scale = t ** (-p / 2)
    if law.weights is None:
        n = i_vals.size
        var_l = np.var(l_vals)
        beta = float(np.cov(i_vals, l_vals)[0, 1] / var_l) if var_l > 0 and n > 2 else 0.0
        y = i_vals - beta * l_vals
        se = float(np.std(y, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return (float(np.mean(y)) + beta * el) * scale, se * scale
    # quadrature law: beta = 1, the outside mass carries I = 2 ||f||_p^p
    inside = float(np.sum(law.weights * (i_vals - l_vals)))
    el_inside = float(np.sum(law.weights * l_vals))
    value = inside + el_inside + law.outside * 2 * grid.norm(p)
    return value * scale, 0.0


def _batches(n, size):
    return [slice(s, min(s + size, n)) for s in range(0, n, size)]


def _energies(f, ps, t, sampler, *, seed_offset=0, resolution=None, batch=8, threads=1):
    """``t^{-p/2} E[I_p]`` for every ``p`` in ``ps``; one pass over the samples."""
    _check_support(f)
    sc_or = sampler.sc if isinstance(sampler, DiffusionSampler) else None
    sc, laws = _resolve_law(sampler, f, t, seed_offset)
    if sc_or is not None:
        threads = max(threads, sampler.threads)
    dim = sc.strat.total_dim
    fine_res, coarse_res = resolution or default_resolution(dim)
    grids = [_inner_grid(f, sc, *fine_res), _inner_grid(f, sc, *coarse_res)]

    def run(law, grid):
        chunks = _batches(law.points.shape[0], batch)

        def work(sl):
            return _inner_values(f, grid, sc, law.points[sl], ps)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                parts = list(ex.map(work, chunks))
        else:
            parts = [work(sl) for sl in chunks]
        return (np.concatenate([a for a, _ in parts], axis=1),
                np.concatenate([b for _, b in parts], axis=1))

    fine_i, fine_l = run(laws[0], grids[0])
    coarse_i, coarse_l = run(laws[0], grids[1])
    out = {}
    for k, p in enumerate(ps):
        value, se = _estimate_from(fine_i[k], fine_l[k], laws[0], p, t, grids[0], sc)
        coarse, _ = _estimate_from(coarse_i[k], coarse_l[k], laws[0], p, t, grids[1], sc)
        quad = abs(value - coarse)
        breakdown = {"inner_quadrature": quad}
        if laws[0].weights is None:
            breakdown["standard_error"] = se
            method = "MC"
        else:
            law_c = laws[1]
            ci, cl = run(law_c, grids[0])
            lv, _ = _estimate_from(ci[k], cl[k], law_c, p, t, grids[0], sc)
            breakdown["law_quadrature"] = abs(value - lv)
            breakdown["outside_mass"] = (2 ** p * grids[0].norm(p) * laws[0].outside_uncertain
                                         * t ** (-p / 2))
            method = "quadrature"
        err = se + sum(v for k2, v in breakdown.items() if k2 != "standard_error")
        out[p] = Estimate(value, err, method, breakdown)
    return out


def bbm_energy(f: ScalarField, p: float, t: float, sampler, *, resolution=None,
               seed_offset: int = 0) -> Estimate:
    """``t^{-p/2} int P_t(|f - f(g)|^p)(g) dg``.

    ``sampler`` is a :class:`DiffusionSampler` (Monte Carlo endpoints at time
    ``t``; its step is capped at ``t / 20``), a factory ``(t, offset) ->
    DiffusionSampler``, or, for Euclidean groups, the group itself, in which
    case the Gaussian law is integrated by quadrature.  The error adds the
    standard error and the inner-quadrature refinement difference.
    """
    _check_p(p)
    if not t > 0:
        raise ValueError("t must be positive")
    if _is_zero(f):
        return Estimate(0.0, 0.0, "quadrature")
    return _energies(f, [p], t, sampler, seed_offset=seed_offset, resolution=resolution)[p]


def lp_norm(f: ScalarField, p: float, resolution=None) -> Estimate:
    """``||f||_p^p`` on the support box with a refinement error."""
    _check_p(p)
    fine, coarse = resolution or default_resolution(f.dim)
    vals = []
    for panels, order in (fine, coarse):
        x, w = box_rule(f.lo, f.hi, panels, order)
        vals.append(float(np.sum(w * np.abs(f(x)) ** p)))
    return Estimate(vals[0], abs(vals[0] - vals[1]), "quadrature")


def sobolev_energy(f: ScalarField, p: float, frame, panels=None, order: int = 8,
                   tol: float | None = None) -> Estimate:
    """``int |grad_H f|^p`` by tensor Gauss-Legendre on the support box.

    The error is the difference to the rule with half the panels.  Without
    analytic partials the gradient falls back to finite differences; if
    ``tol`` is given and that fallback is used, a ValueError is raised when
    the error estimate exceeds it.
    """
    _check_p(p)
    _check_support(f)
    if _is_zero(f):
        return Estimate(0.0, 0.0, "quadrature")
    if panels is None:
        panels = {1: 64, 2: 32, 3: 16, 4: 6}.get(f.dim, 2)

    def run(npan):
        x, w = box_rule(f.lo, f.hi, npan, order)
        total, fd = 0.0, False
        for sl in _batches(len(w), 1 << 16):
            g, fd = horizontal_gradient(f, x[sl], frame, return_flag=True)
            total += float(np.sum(w[sl] * np.sum(g * g, axis=-1) ** (p / 2)))
        return total, fd

    fine, fd = run(panels)
    coarse, _ = run(max(panels // 2, 1))
    est = Estimate(fine, abs(fine - coarse), "quadrature", {"finite_difference": float(fd)})
    if fd and tol is not None and est.error > tol:
        raise ValueError(f"finite-difference gradient too inaccurate: {est.error:.3g} > {tol}")
    return est


# -- limits in t ----------------------------------------------------------------

def _target_constant(p):
    return ledoux_constant(p)


def _check_t_grid(t_grid, geometric=True):
    t = np.asarray(t_grid, dtype=float)
    if t.size < 3 or np.any(t <= 0) or np.any(np.diff(t) >= 0):
        raise ValueError("t_grid must hold >= 3 strictly decreasing positive values")
    if geometric and np.any(t[:-1] / t[1:] < 2 - 1e-12):
        raise ValueError("t_grid must be geometric with ratio >= 2")
    return t


def bbm_limits(f: ScalarField, ps: Sequence[float], t_grid, sampler, frame=None, *,
               rate: float = 1.0, resolution=None, threads: int = 1) -> dict:
    """:func:`bbm_limit` for several ``p`` sharing one set of endpoints per ``t``."""
    for p in ps:
        _check_p(p)
    t = _check_t_grid(t_grid)
    sc = sampler if isinstance(sampler, StructureConstants) else sampler.sc
    frame = frame or horizontal_frame(sc)
    ps = [float(p) for p in ps]
    if _is_zero(f):
        per_t = [{p: Estimate(0.0, 0.0) for p in ps} for _ in t]
    else:
        per_t = [_energies(f, ps, float(ti), sampler, seed_offset=k, resolution=resolution,
                           threads=threads) for k, ti in enumerate(t)]
    return {p: _limit_report(f, p, t, [d[p] for d in per_t], frame, rate, None) for p in ps}


def bbm_limit(f: ScalarField, p: float, t_grid, sampler, frame=None, *, rate: float = 1.0,
              resolution=None, name: str | None = None) -> LimitReport:
    """BBM energies on a decreasing ``t_grid`` and their ``t -> 0`` extrapolation.

    The fit is ``a + b t^rate``; ``rate = 1`` matches the even-order Taylor
    structure of the energy for C^2 data (odd terms cancel by the symmetry
    ``p(h) = p(h^-1)``).  Residual diagnostics for ``rate = 1/2`` are kept in
    the metadata.  The target is ``2 Gamma(p) / Gamma(p/2) int |grad_H f|^p``.
    """
    rep = bbm_limits(f, [p], t_grid, sampler, frame, rate=rate, resolution=resolution)[float(p)]
    if name:
        rep.name = name
    return rep


def _limit_report(f, p, t, ests, frame, rate, name):
    vals = [e.value for e in ests]
    errs = [e.error for e in ests]
    sob = sobolev_energy(f, p, frame)
    target = _target_constant(p) * sob.value
    if _is_zero(f):
        lim = Estimate(0.0, 0.0, "extrapolation")
        alt = lim
    else:
        lim = extrapolate(t, vals, errs, rate=rate)
        alt = extrapolate(t, vals, errs, rate=0.5)
    flags = []
    if lim.breakdown.get("statistical", 0) > abs(lim.value - vals[-1]) > 0:
        flags.append("mc-error-exceeds-extrapolation-signal")
    return LimitReport(name or f"bbm:{f.name}:p={p}", "t", t.tolist(), vals, errs, lim, 0.0,
                       target, flags,
                       {"p": p, "rate": rate, "sobolev_energy": sob.as_dict(),
                        "constant": _target_constant(p), "alt_rate_0.5": alt.as_dict(),
                        "breakdowns": [e.breakdown for e in ests]})


def diffquot_bound_check(f: ScalarField, p: float, t_grid, sampler, frame=None, *,
                         k: float = 3.0, resolution=None) -> dict:
    """Check ``t^{-p/2} int P_t(|f-f(g)|^p) <= C_p int |grad_H f|^p`` on the grid."""
    _check_p(p)
    t = np.asarray(t_grid, dtype=float)
    sc = sampler if isinstance(sampler, StructureConstants) else sampler.sc
    frame = frame or horizontal_frame(sc)
    cp = gaussian_moment_constant(p, sc.strat.m)
    sob = sobolev_energy(f, p, frame)
    bound = cp * sob.value
    rows, violations = [], []
    for i, ti in enumerate(t):
        e = bbm_energy(f, p, float(ti), sampler, resolution=resolution, seed_offset=i)
        ok = e.value <= bound + k * (e.error + cp * sob.error)
        rows.append({"t": float(ti), "lhs": e.value, "lhs_error": e.error, "rhs": bound,
                     "ok": bool(ok)})
        if not ok:
            violations.append(float(ti))
    return {"C_p": cp, "sobolev_energy": sob.value, "rows": rows, "violations": violations,
            "ok": not violations}


# -- Phi profile and Besov seminorms -----------------------------------------

@dataclass
class PhiProfile:
    """``Phi(t) = int P_t(|f - f(g)|^p)(g) dg`` on an increasing log-spaced grid."""

    name: str
    p: float
    t: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    Q: int
    norm_p: float
    grad_energy: float
    flags: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def bbm(self):
        """``Phi(t) / t^(p/2)`` with errors."""
        s = self.t ** (-self.p / 2)
        return self.values * s, self.errors * s

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "phi", "error", "bbm"])
        for ti, v, e, b in zip(self.t, self.values, self.errors, self.bbm[0]):
            w.writerow([repr(float(ti)), repr(float(v)), repr(float(e)), repr(float(b))])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {"schema_version": SCHEMA_VERSION, "name": self.name, "p": self.p,
               "t": self.t.tolist(), "phi": self.values.tolist(), "errors": self.errors.tolist(),
               "Q": self.Q, "norm_p": self.norm_p, "grad_energy": self.grad_energy,
               "flags": self.flags, "metadata": self.metadata}
        return json.dumps(doc, indent=2, sort_keys=True, default=float)


def diffquot_bound_profile(profile: PhiProfile, m: int, *, k: float = 3.0) -> dict:
    """:func:`diffquot_bound_check` on the nodes of an existing profile."""
    cp = gaussian_moment_constant(profile.p, m)
    bound = cp * profile.grad_energy
    lhs, err = profile.bbm
    rows = [{"t": float(ti), "lhs": float(v), "lhs_error": float(e), "rhs": bound,
             "ok": bool(v <= bound + k * e)} for ti, v, e in zip(profile.t, lhs, err)]
    violations = [r["t"] for r in rows if not r["ok"]]
    return {"C_p": cp, "sobolev_energy": profile.grad_energy, "rows": rows,
            "violations": violations, "ok": not violations,
            "max_ratio": float(np.max(lhs) / bound) if bound else 0.0}


def default_t_grid(t_min: float = 1e-2, t_max: float = 1e2, per_octave: float = 1.0):
    n = int(round(math.log2(t_max / t_min) * per_octave)) + 1
    return np.geomspace(t_min, t_max, n)


def phi_profiles(f: ScalarField, ps: Sequence[float], t_grid, sampler, frame=None, *,
                 resolution=None, n_small: int = 3, n_tail: int = 3) -> dict:
    """Profiles for several ``p`` sharing the same endpoints; see :func:`phi_profile`."""
    for p in ps:
        _check_p(p)
    t = np.asarray(t_grid, dtype=float)
    if t.size < max(n_small, n_tail) + 2 or np.any(np.diff(t) <= 0) or np.any(t <= 0):
        raise ValueError("t_grid must be increasing, positive and long enough")
    sc = sampler if isinstance(sampler, StructureConstants) else sampler.sc
    frame = frame or horizontal_frame(sc)
    Q = sc.strat.homogeneous_dim
    ps = [float(p) for p in ps]
    if _is_zero(f):
        rows = {p: [Estimate(0.0, 0.0)] * t.size for p in ps}
    else:
        per_t = [_energies(f, ps, float(ti), sampler, seed_offset=1000 + k,
                           resolution=resolution) for k, ti in enumerate(t)]
        rows = {p: [d[p] for d in per_t] for p in ps}
    out = {}
    for p in ps:
        scale = t ** (p / 2)
        vals = np.array([e.value for e in rows[p]]) * scale
        errs = np.array([e.error for e in rows[p]]) * scale
        norm = lp_norm(f, p).value if not _is_zero(f) else 0.0
        sob = sobolev_energy(f, p, frame).value
        prof = PhiProfile(f.name, p, t, vals, errs, Q, norm, sob,
                          metadata={"n_small": n_small, "n_tail": n_tail,
                                    "methods": sorted({e.method for e in rows[p]})})
        if norm > 0:
            plateau = _plateau(prof, n_tail)[0]
            a = _small_t_fit(prof, n_small)[0]
            prof.metadata["plateau_ratio"] = plateau / (2 * norm)
            prof.metadata["small_t_ratio"] = a / (_target_constant(p) * sob)
            if abs(plateau / (2 * norm) - 1) > 0.02:
                prof.flags.append("plateau-not-reached")
            if abs(prof.metadata["small_t_ratio"] - 1) > 0.05:
                prof.flags.append("bbm-regime-not-reached")
        out[p] = prof
    return out


def phi_profile(f: ScalarField, p: float, t_grid, sampler, frame=None, **kw) -> PhiProfile:
    """``Phi(t)`` on a log-spaced grid with plateau and small-t diagnostics.

    ``metadata["plateau_ratio"]`` compares the fitted plateau with
    ``2 ||f||_p^p``; ``metadata["small_t_ratio"]`` compares the small-t
    coefficient with ``2 Gamma(p)/Gamma(p/2) int |grad_H f|^p``.  Grid ends
    outside these regimes are flagged.
    """
    return phi_profiles(f, [p], t_grid, sampler, frame, **kw)[float(p)]


def _small_t_fit(prof: PhiProfile, n_small, phi=None):
    """Fit ``Phi / t^(p/2) = a + b t`` on the smallest ``n_small`` nodes."""
    phi = prof.values if phi is None else phi
    t = prof.t[:n_small]
    y = phi[:n_small] / t ** (prof.p / 2)
    a_mat = np.stack([np.ones_like(t), t], axis=-1)
    coef, *_ = np.linalg.lstsq(a_mat, y, rcond=None)
    return float(coef[0]), float(coef[1])


def _plateau(prof: PhiProfile, n_tail, phi=None):
    """Fit ``Phi = Phi_inf - c t^(-Q/2)`` on the largest ``n_tail`` nodes."""
    phi = prof.values if phi is None else phi
    t = prof.t[-n_tail:]
    a_mat = np.stack([np.ones_like(t), -t ** (-prof.Q / 2)], axis=-1)
    coef, *_ = np.linalg.lstsq(a_mat, phi[-n_tail:], rcond=None)
    return float(coef[0]), float(coef[1])


def _assemble(prof: PhiProfile, s, phi=None, interp="pchip", n_small=None, n_tail=None,
              sub=64):
    p = prof.p
    phi = prof.values if phi is None else phi
    n_small = n_small or prof.metadata.get("n_small", 3)
    n_tail = n_tail or prof.metadata.get("n_tail", 3)
    t0, t1 = prof.t[0], prof.t[-1]
    alpha = p * (1 - s) / 2
    a, b = _small_t_fit(prof, n_small, phi)
    small = a * t0 ** alpha / alpha + b * t0 ** (alpha + 1) / (alpha + 1)
    u = np.log(prof.t)
    fine = np.linspace(u[0], u[-1], sub * (u.size - 1) + 1)
    logphi = np.log(np.maximum(phi, 1e-300))
    if interp == "pchip":
        vals = np.exp(PchipInterpolator(u, logphi)(fine))
    else:
        vals = np.exp(np.interp(fine, u, logphi))
    mid = np.trapezoid(np.exp(-s * p * fine / 2) * vals, fine)
    inf, c = _plateau(prof, n_tail, phi)
    beta = s * p / 2
    tail = inf * t1 ** (-beta) / beta - c * t1 ** (-beta - prof.Q / 2) / (beta + prof.Q / 2)
    return small + mid + tail, {"small_t": small, "middle": mid, "tail": tail}


def besov_seminorm(f: ScalarField, s: float, p: float, profile: PhiProfile) -> Estimate:
    """``N_{s,p}(f)^p = int_0^inf t^{-sp/2-1} Phi(t) dt`` from a profile.

    Pieces: the small-t model ``t^{p/2} (a + b t)`` below the grid, the
    trapezoid rule in ``log t`` over the monotone cubic interpolant of
    ``log Phi`` on the grid, and the tail of the plateau model
    ``Phi_inf - c t^{-Q/2}``.  Errors: propagated profile errors, the change
    when the interpolant is replaced by a piecewise-linear one, and the
    change when the small-t and plateau fits drop their farthest node.
    """
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    if profile.p != p:
        raise ValueError("profile was computed for a different p")
    if not np.any(profile.values > 0):
        return Estimate(0.0, 0.0, "quadrature")
    value, pieces = _assemble(profile, s)
    sens = []
    for k in range(profile.t.size):
        bumped = profile.values.copy()
        bumped[k] += profile.errors[k]
        sens.append(_assemble(profile, s, bumped)[0] - value)
    stat = float(np.sqrt(np.sum(np.square(sens))))
    interp = abs(_assemble(profile, s, interp="linear")[0] - value)
    ns, nt = profile.metadata.get("n_small", 3), profile.metadata.get("n_tail", 3)
    model = (abs(_assemble(profile, s, n_small=max(ns - 1, 2))[0] - value)
             + abs(_assemble(profile, s, n_tail=max(nt - 1, 2))[0] - value))
    return Estimate(value, stat + interp + model, "quadrature",
                    {"propagated": stat, "interpolation": interp, "end_models": model,
                     **pieces})


def besov_embedding_bound(profile: PhiProfile, s: float, C_p: float) -> float:
    """``2 C_p / (p (1-s)) int |grad_H f|^p + 2^(p+1) / (s p) ||f||_p^p``."""
    p = profile.p
    return (2 * C_p / (p * (1 - s)) * profile.grad_energy
            + 2 ** (p + 1) / (s * p) * profile.norm_p)


def _s_report(name, f, p, profile, s_grid, weight, limit_at, target, frame_energy):
    s = np.asarray(s_grid, dtype=float)
    ests = [besov_seminorm(f, float(si), p, profile).scaled(weight(si)) for si in s]
    vals = [e.value for e in ests]
    errs = [e.error for e in ests]
    if not np.any(profile.values > 0):
        lim = Estimate(0.0, 0.0, "extrapolation")
    else:
        lim = extrapolate(s, vals, errs, rate=1.0, limit_at=limit_at)
    flags = list(profile.flags)
    return LimitReport(name, "s", s.tolist(), vals, errs, lim, limit_at, target, flags,
                       {"p": p, "profile_t": profile.t.tolist(), "energy": frame_energy,
                        "breakdowns": [e.breakdown for e in ests]})


def bbm_seminorm_limit(f: ScalarField, p: float, s_grid, profile: PhiProfile) -> LimitReport:
    """``(1-s) N_{s,p}^p`` on ``s_grid -> 1`` and its limit.

    Target: ``4 Gamma(p) / (p Gamma(p/2)) int |grad_H f|^p``.
    """
    s = np.asarray(s_grid, dtype=float)
    if s.size < 2 or np.any(np.diff(s) <= 0) or np.any((s <= 0) | (s >= 1)):
        raise ValueError("s_grid must increase within (0, 1)")
    target = 2 / p * _target_constant(p) * profile.grad_energy
    return _s_report(f"besov-s->1:{f.name}:p={p}", f, p, profile, s, lambda x: 1 - x, 1.0,
                     target, profile.grad_energy)


def ms_limit(f: ScalarField, p: float, s_grid, profile: PhiProfile) -> LimitReport:
    """``s N_{s,p}^p`` on ``s_grid -> 0`` and its limit; target ``(4/p) ||f||_p^p``."""
    s = np.asarray(s_grid, dtype=float)
    if s.size < 2 or np.any(np.diff(s) >= 0) or np.any((s <= 0) | (s >= 1)):
        raise ValueError("s_grid must decrease within (0, 1)")
    target = 4 / p * profile.norm_p
    return _s_report(f"besov-s->0:{f.name}:p={p}", f, p, profile, s, lambda x: x, 0.0,
                     target, profile.norm_p)


def sandwich_check(profile: PhiProfile, t_grid, s_grid, *, k: float = 3.0,
                   include_limit: bool = True) -> dict:
    """Finite-grid surrogate of the liminf/limsup chain.

    ``(2/p) min_t BBM(t) <= min_s (1-s) N^p`` and
    ``max_s (1-s) N^p <= (2/p) max_t BBM(t)``, each within ``k`` combined
    errors.  BBM values are read off the profile at the ``t_grid`` nodes.
    With ``include_limit`` the ``t -> 0`` extrapolation of those values
    joins the t-side: BBM values typically increase towards their limit
    while ``(1-s) N^p`` may approach it from above, so grid values alone
    cannot bound the s-side from above at any finite grid.
    """
    p = profile.p
    t_grid = np.asarray(t_grid, dtype=float)
    idx = [int(np.argmin(np.abs(profile.t - ti))) for ti in t_grid]
    if any(abs(profile.t[i] / ti - 1) > 1e-9 for i, ti in zip(idx, t_grid)):
        raise ValueError("t_grid values must be nodes of the profile")
    bbm, bbm_err = profile.bbm
    side = [(float(bbm[i]), float(bbm_err[i]), float(profile.t[i])) for i in idx]
    if include_limit and len(idx) >= 2 and np.any(profile.values > 0):
        lim = extrapolate(profile.t[idx], bbm[idx], bbm_err[idx], rate=1.0)
        side.append((lim.value, lim.error, 0.0))
    lo = min(side, key=lambda r: r[0])
    hi = max(side, key=lambda r: r[0])
    f_stub = ScalarField(profile.name, None, None, np.zeros(1), np.zeros(1))
    ests = [besov_seminorm(f_stub, float(s), p, profile).scaled(1 - s) for s in s_grid]
    mid_lo = min(ests, key=lambda e: e.value)
    mid_hi = max(ests, key=lambda e: e.value)
    left, left_err = 2 / p * lo[0], 2 / p * lo[1]
    right, right_err = 2 / p * hi[0], 2 / p * hi[1]
    first = left <= mid_lo.value + k * (left_err + mid_lo.error)
    second = mid_hi.value <= right + k * (right_err + mid_hi.error)
    return {"p": p, "left": left, "left_error": left_err, "left_t": lo[2],
            "min_s": mid_lo.value, "min_s_error": mid_lo.error, "max_s": mid_hi.value,
            "max_s_error": mid_hi.error, "right": right, "right_error": right_err,
            "right_t": hi[2], "s_values": [e.value for e in ests],
            "lower_ok": bool(first), "upper_ok": bool(second), "ok": bool(first and second),
            "spread": (right - left) / right if right else 0.0}


# -- exact p = 2 oracle --------------------------------------------------------

def phi_p2_oracle(f: ScalarField, t: float, engine, sc: StructureConstants, *,
                  h_panels: int = 4, h_order: int = 8, inner=None) -> Estimate:
    """``Phi(t) = 2 ||f||_2^2 - 2 <P_t f, f>`` by double quadrature with kernel values.

    ``<P_t f, f> = int p(h, e, t) C(h) dh`` with the autocorrelation
    ``C(h) = int f(g) f(g o h) dg``, supported where ``g o h`` meets the box;
    the outer rule covers the bounding box of ``{g^-1 o g'}``.  The error is
    the refinement difference of the outer rule.
    """
    from .heat_kernel import euclidean_kernel

    inner = inner or default_resolution(f.dim)[1]
    xg, wg = box_rule(f.lo, f.hi, *inner)
    fg = f(xg)
    norm2 = float(np.sum(wg * fg * fg))
    # bounding box of g^-1 o g' over sampled box points
    axes = [np.linspace(a, b, 5) for a, b in zip(f.lo, f.hi)]
    pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
    pairs = bch_product(-pts[:, None, :], pts[None, :, :], sc).reshape(-1, f.dim)
    lo, hi = pairs.min(axis=0), pairs.max(axis=0)
    span = hi - lo
    lo, hi = lo - 0.02 * span, hi + 0.02 * span

    def corr(h):
        out = np.empty(len(h))
        for sl in _batches(len(h), 16):
            fgh = f(bch_product(xg[None], h[sl, None, :], sc))
            out[sl] = fgh @ (wg * fg)
        return out

    def outer(npan):
        xh, wh = box_rule(lo, hi, npan, h_order)
        if sc.step == 1:
            k = euclidean_kernel(xh, t)
        else:
            k, _ = engine.evaluate(xh, t)
        return float(np.sum(wh * k * corr(xh)))

    fine = outer(h_panels)
    coarse = outer(max(h_panels // 2, 1))
    return Estimate(2 * norm2 - 2 * fine, 2 * abs(fine - coarse), "quadrature",
                    {"norm2": norm2, "cross": fine})
