"""The acceptance suite: fourteen seed-pinned checks shared by the CLI and the tests.

Each criterion is a function of an :class:`AcceptanceConfig` and a
:class:`_Context` that caches endpoint samples and profiles, so criteria
that read the same diffusion (Ledoux, Huisken, KDE) or the same profile
(uniform bound, s -> 1, s -> 0, sandwich) compute it once.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .algebra import axiom_audit, dilate
from .catalog import CATALOG, get_group
from .diffusion import (DiffusionSampler, huisken_statistic, kde_kernel_estimate,
                        ledoux_constant, ledoux_statistic, marginal_gaussian_test,
                        sample_endpoints)
from .functionals import (bbm_limits, bbm_seminorm_limit, diffquot_bound_profile,
                          ms_limit, phi_profiles, sandwich_check)
from .heat_kernel import KernelEngine, decoupling_marginal, kernel_normalization, step2_kernel
from .testfns import FUNCTIONS, get_function

__all__ = ["AcceptanceConfig", "CriterionResult", "CRITERIA", "run_acceptance"]


@dataclass
class AcceptanceConfig:
    """Knobs of the suite.  Defaults are the documented acceptance settings."""

    seed: int = 42
    threads: int = 1
    groups: tuple = tuple(CATALOG)            # function sweeps of criteria 10 and 13
    functions: tuple = tuple(FUNCTIONS)
    axiom_samples: int = 1000
    step_size: float = 0.01
    # z is sampled exactly by both schemes, so z-only statistics may use a coarse step
    z_step_size: float = 0.05
    marginal_paths: int = 100_000
    ledoux_paths: int = 1_000_000
    kde_paths: int = 1_000_000
    bbm_paths: int = 256
    bbm_t_grid: tuple = (0.02, 0.01, 0.005, 0.0025)
    euclidean_t_grid: tuple = (4e-4, 2e-4, 1e-4, 5e-5)
    profile_paths: int = 128
    profile_t_range: tuple = (0.0025, 100.0)  # in units of the function's t_scale
    profile_nodes: int = 16
    s1_grid: tuple = (0.9, 0.95, 0.975, 0.99)
    ms_s: float = 0.01
    sandwich_s_grid: tuple = (0.9999, 0.99999, 0.999999)
    sandwich_t_nodes: int = 4

    @classmethod
    def from_dict(cls, doc: dict) -> AcceptanceConfig:
        names = {f.name for f in fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ValueError(f"unknown acceptance config keys: {sorted(unknown)}")
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in doc.items()}
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def validate(self):
        for g in self.groups:
            if g not in CATALOG:
                raise ValueError(f"unknown group {g!r}")
        for f in self.functions:
            if f not in FUNCTIONS:
                raise ValueError(f"unknown function {f!r}")
        if min(self.marginal_paths, self.ledoux_paths, self.kde_paths) < 10_000:
            raise ValueError("Monte Carlo path counts must be at least 1e4")
        if self.step_size <= 0 or self.z_step_size <= 0:
            raise ValueError("step sizes must be positive")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


@dataclass
class CriterionResult:
    number: int
    title: str
    ok: bool
    summary: str
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.number:2d} {self.title}: {self.summary}"


class _Context:
    def __init__(self, cfg: AcceptanceConfig, log=None):
        self.cfg = cfg
        self.log = log or (lambda msg: None)
        self._samples = {}
        self._profiles = {}

    def seed(self, *tags) -> int:
        return int(np.random.SeedSequence([self.cfg.seed, *tags]).generate_state(1)[0])

    def samples(self, group, t, h, n, tag):
        key = (group, t, h, n, tag)
        if key not in self._samples:
            self.log(f"sampling {n} paths on {group} at t={t} (h={h})")
            sampler = DiffusionSampler(get_group(group), t, min(h, t), n,
                                       seed=self.seed(1, tag), threads=self.cfg.threads)
            self._samples[key] = sample_endpoints(sampler)
        return self._samples[key]

    def t_grid(self, name):
        lo, hi = self.cfg.profile_t_range
        return np.geomspace(lo, hi, self.cfg.profile_nodes) * get_function(name).t_scale

    def profiles(self, name):
        if name not in self._profiles:
            entry = get_function(name)
            sc = get_group(entry.group)
            self.log(f"profile of {name} on {entry.group}")
            law = sc if sc.step == 1 else DiffusionSampler(
                sc, 1.0, self.cfg.step_size, self.cfg.profile_paths,
                seed=self.seed(2, sorted(FUNCTIONS).index(name)), threads=self.cfg.threads)
            self._profiles[name] = phi_profiles(entry.field, [1.0, 2.0], self.t_grid(name), law)
        return self._profiles[name]

    def swept_functions(self):
        return [f for f in self.cfg.functions if FUNCTIONS[f][0] in self.cfg.groups]


# -- criteria -------------------------------------------------------------------

def _c1(ctx):
    rows = {g: axiom_audit(get_group(g), n=ctx.cfg.axiom_samples, seed=ctx.seed(10, i))
            for i, g in enumerate(CATALOG)}
    worst = max(max(r["errors"].values()) for r in rows.values())
    bad = [f"{g}:{k}" for g, r in rows.items() for k, v in r["checks"].items() if not v]
    return not bad, f"max relative defect {worst:.2e} over {len(rows)} groups (tol 1e-12)", \
        {"groups": rows, "failures": bad}


def _c2(ctx):
    est = step2_kernel(np.zeros(3), 1.0, KernelEngine(get_group("h1")))
    rel = abs(est.value - 1 / 16) * 16
    return rel <= 1e-6, f"p(e,e,1) = {est.value:.12f}, relative error {rel:.2e} (tol 1e-6)", \
        {"value": est.value, "error": est.error, "relative_error": rel}


def _c3(ctx):
    sc = get_group("h1")
    engine = KernelEngine(sc)
    norms = {}
    for t in (0.25, 1.0, 4.0):
        e = kernel_normalization(engine, t)
        norms[t] = {"value": e.value, "error": e.error, "ok": abs(e.value - 1) <= 1e-4}
    rng = np.random.default_rng(ctx.seed(30))
    g = rng.uniform(-2, 2, size=(20, 3))
    t = rng.uniform(0.25, 4, size=20)
    lam = np.exp(rng.uniform(-math.log(2), math.log(2), size=20))
    Q = sc.strat.homogeneous_dim
    scaling = []
    for gi, ti, li in zip(g, t, lam):
        v1, e1 = engine.evaluate(dilate(li, gi, sc), li * li * ti)
        v0, e0 = engine.evaluate(gi, ti)
        lhs, rhs = float(v1), float(v0) * li ** -Q
        # combined quadrature error plus a round-off floor for the cosine sums
        tol = 3 * (float(e1) + float(e0) * li ** -Q) + 1e-13 * max(abs(lhs), abs(rhs))
        scaling.append({"g": gi.tolist(), "t": float(ti), "lam": float(li), "lhs": lhs,
                        "rhs": rhs, "tol": tol, "ok": abs(lhs - rhs) <= tol})
    ok = all(r["ok"] for r in norms.values()) and all(r["ok"] for r in scaling)
    dev = max(abs(r["value"] - 1) for r in norms.values())
    sdev = max(abs(r["lhs"] - r["rhs"]) / max(abs(r["rhs"]), 1e-300) for r in scaling)
    return ok, (f"max |mass - 1| {dev:.2e} (tol 1e-4); scaling max relative defect "
                f"{sdev:.2e} on 20 points"), \
        {"normalization": {str(k): v for k, v in norms.items()}, "scaling": scaling}


def decoupling_grid(n: int = 21, r_max: float = 3 * math.sqrt(2)):
    """Radii ``linspace(0, r_max, n)`` at golden-angle directions."""
    r = np.linspace(0, r_max, n)
    theta = np.arange(n) * math.pi * (3 - math.sqrt(5))
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)


def _c4(ctx):
    z = decoupling_grid()
    est = decoupling_marginal(KernelEngine(get_group("h1")), z, 1.0)
    exact = np.exp(-np.sum(z * z, axis=-1) / 4) / (4 * math.pi)
    dev = np.abs(est.value - exact)
    return bool(dev.max() <= 1e-5), f"max deviation {dev.max():.2e} on 21 points (tol 1e-5)", \
        {"z": z.tolist(), "value": est.value.tolist(), "exact": exact.tolist(),
         "quadrature_error": est.error.tolist()}


def _c5(ctx):
    s = ctx.samples("engel", 1.0, ctx.cfg.step_size, ctx.cfg.marginal_paths, 5)
    rep = marginal_gaussian_test(s, 1.0)
    failed = [k for k, v in rep["checks"].items() if not v]
    return rep["ok"], (f"n={rep['n']}, scheme {s.scheme}, KS max {max(rep['ks']):.2e} "
                       f"(thr {rep['ks_threshold']:.2e})"
                       + (f", failed {failed}" if failed else "")), rep


def _ledoux_samples(ctx, group):
    if group == "h1":  # shared with the KDE check, which needs the full point
        return ctx.samples("h1", 1.0, ctx.cfg.step_size, ctx.cfg.kde_paths, 6)
    return ctx.samples(group, 1.0, ctx.cfg.z_step_size, ctx.cfg.ledoux_paths, 7)


def _c6(ctx):
    rows, ok, worst, worst_se = [], True, 0.0, 0.0
    for group in ("h1", "engel"):
        s = _ledoux_samples(ctx, group)
        for p in (1.0, 2.0, 3.0):
            target = ledoux_constant(p)
            for k in range(8):
                nu = [math.cos(k * math.pi / 8), math.sin(k * math.pi / 8)]
                e = ledoux_statistic(s, nu, p)
                z = abs(e.value - target) / e.error
                good = z <= 3 and e.error / target <= 0.005
                ok &= good
                worst, worst_se = max(worst, z), max(worst_se, e.error / target)
                rows.append({"group": group, "p": p, "k": k, "value": e.value, "se": e.error,
                             "target": target, "z": z, "ok": good})
    return ok, f"48 statistics, max |dev|/SE {worst:.2f} (tol 3), max relative SE " \
               f"{worst_se:.2%} (target 0.5%)", {"rows": rows}


def _c7(ctx):
    rows, ok = [], True
    for group, nu in (("h1", (1.0, 0.0)), ("engel", (0.0, 1.0))):
        for t in (0.5, 1.0):
            s = (_ledoux_samples(ctx, group) if t == 1.0 else
                 ctx.samples(group, t, ctx.cfg.z_step_size, ctx.cfg.ledoux_paths, 8))
            e = huisken_statistic(s, nu, t)
            good = abs(e.value - 1) <= 3 * e.error
            ok &= good
            rows.append({"group": group, "t": t, "value": e.value, "error": e.error,
                         "ok": good, **e.breakdown})
    worst = max(abs(r["value"] - 1) / r["error"] for r in rows)
    return ok, f"4 statistics, max |dev|/(SE+bias) {worst:.2f} (tol 3)", {"rows": rows}


def _bbm_reports(ctx):
    if not hasattr(ctx, "_bbm"):
        h1 = DiffusionSampler(get_group("h1"), 1.0, ctx.cfg.step_size, ctx.cfg.bbm_paths,
                              seed=ctx.seed(8), threads=ctx.cfg.threads)
        ctx.log("BBM energies on h1_bump")
        ctx._bbm = {
            "h1": bbm_limits(get_function("h1_bump").field, [1, 2], ctx.cfg.bbm_t_grid, h1),
            "r1": bbm_limits(get_function("r1_bump").field, [1, 2], ctx.cfg.euclidean_t_grid,
                             get_group("r1")),
        }
    return ctx._bbm


def _c8(ctx):
    rep = _bbm_reports(ctx)
    h1 = rep["h1"][2.0]
    r1 = rep["r1"]
    ok_h1 = 0.98 <= h1.ratio <= 1.02
    r1_dev = {p: abs(r.ratio - 1) for p, r in r1.items()}
    ok_r1 = all(abs(r.ratio - 1) <= 3 * r.ratio_error for r in r1.values())
    return ok_h1 and ok_r1, (f"H1 ratio {h1.ratio:.4f}+-{h1.ratio_error:.4f} (in [0.98,1.02]); "
                             f"R1 |ratio-1| {max(r1_dev.values()):.1e} within 3 quadrature errors"), \
        {"h1": _report_summary(h1), "r1": {str(p): _report_summary(r) for p, r in r1.items()}}


def _c9(ctx):
    h1 = _bbm_reports(ctx)["h1"][1.0]
    return 0.97 <= h1.ratio <= 1.03, \
        f"H1 ratio {h1.ratio:.4f}+-{h1.ratio_error:.4f} (in [0.97,1.03])", _report_summary(h1)


def _c10(ctx):
    rows, ok, worst = [], True, 0.0
    for name in ctx.swept_functions():
        m = get_group(FUNCTIONS[name][0]).strat.m
        for p, prof in ctx.profiles(name).items():
            chk = diffquot_bound_profile(prof, m)
            ok &= chk["ok"]
            worst = max(worst, chk["max_ratio"])
            rows.append({"function": name, "p": p, "ok": chk["ok"],
                         "violations": chk["violations"], "max_ratio": chk["max_ratio"]})
    nviol = sum(len(r["violations"]) for r in rows)
    return ok, f"{len(rows)} profiles, {nviol} violations, max lhs/rhs {worst:.3f}", {"rows": rows}


def _c11(ctx):
    out, ok = {}, True
    f = get_function("h1_bump").field
    for p, prof in ctx.profiles("h1_bump").items():
        rep = bbm_seminorm_limit(f, p, ctx.cfg.s1_grid, prof)
        out[str(p)] = _report_summary(rep)
        if p == 2.0:
            ok = 0.95 <= rep.ratio <= 1.05
            line = f"p=2 ratio {rep.ratio:.4f}+-{rep.ratio_error:.4f} (in [0.95,1.05])"
    line += f"; p=1 ratio {out['1.0']['ratio']:.4f}"
    return ok, line, out


def _c12(ctx):
    rows, ok = [], True
    s = ctx.cfg.ms_s
    for name in ("h1_wide_bump", "r1_bump"):
        f = get_function(name).field
        for p, prof in ctx.profiles(name).items():
            rep = ms_limit(f, p, [2 * s, s], prof)
            ratio = rep.values[-1] / rep.target
            good = 0.98 <= ratio <= 1.02
            ok &= good
            rows.append({"function": name, "p": p, "s": s, "ratio": ratio,
                         "error": rep.errors[-1] / rep.target, "ok": good})
    rng = ", ".join(f"{r['function']} p={r['p']:g}: {r['ratio']:.4f}" for r in rows)
    return ok, f"s={s}: {rng} (in [0.98,1.02])", {"rows": rows}


def _c13(ctx):
    rows, ok = [], True
    for name in ctx.swept_functions():
        for p, prof in ctx.profiles(name).items():
            tg = prof.t[: ctx.cfg.sandwich_t_nodes]
            rep = sandwich_check(prof, tg, ctx.cfg.sandwich_s_grid)
            ok &= rep["ok"]
            rows.append({"function": name, "group": FUNCTIONS[name][0], **rep})
    bad = [f"{r['function']} p={r['p']:g}" for r in rows if not r["ok"]]
    return ok, f"{len(rows)} (group, function, p) triples" + \
        (f", failing: {', '.join(bad)}" if bad else ", all chains hold"), {"rows": rows}


KDE_POINTS = ((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 0.0, 1.0), (1.0, 1.0, 0.5),
              (0.5, -0.5, -1.0))


def _c14(ctx):
    s = ctx.samples("h1", 1.0, ctx.cfg.step_size, ctx.cfg.kde_paths, 6)
    engine = KernelEngine(get_group("h1"))
    rows, ok = [], True
    for g in KDE_POINTS:
        kde = kde_kernel_estimate(s, g)
        ref = step2_kernel(g, 1.0, engine)
        err = kde.error + ref.error
        good = abs(kde.value - ref.value) <= 3 * err
        ok &= good
        rows.append({"g": list(g), "kde": kde.value, "kde_error": kde.error,
                     "kernel": ref.value, "kernel_error": ref.error, "ok": good})
    worst = max(abs(r["kde"] - r["kernel"]) / (r["kde_error"] + r["kernel_error"])
                for r in rows)
    return ok, f"5 points, max |dev|/error {worst:.2f} (tol 3)", {"rows": rows}


def _report_summary(rep) -> dict:
    return {"ratio": rep.ratio, "ratio_error": rep.ratio_error, "limit": rep.limit.value,
            "limit_error": rep.limit.error, "target": rep.target, "params": rep.params,
            "values": rep.values, "errors": rep.errors, "flags": rep.flags}


CRITERIA = {
    1: ("algebra axioms", _c1),
    2: ("explicit kernel value", _c2),
    3: ("normalization and scaling", _c3),
    4: ("decoupling by quadrature", _c4),
    5: ("decoupling by Monte Carlo (Engel)", _c5),
    6: ("Ledoux constants", _c6),
    7: ("Huisken identity", _c7),
    8: ("BBM limit p=2", _c8),
    9: ("BBM limit p=1", _c9),
    10: ("uniform difference-quotient bound", _c10),
    11: ("Besov s->1", _c11),
    12: ("Maz'ya-Shaposhnikova s->0", _c12),
    13: ("sandwich chain", _c13),
    14: ("KDE vs explicit kernel", _c14),
}


def run_acceptance(cfg: AcceptanceConfig | None = None, criteria=None, log=None,
                   context=None) -> list[CriterionResult]:
    """Run the selected criteria (all by default) and return their results.

    A criterion that raises is reported as failed with the exception text.
    """
    cfg = cfg or AcceptanceConfig()
    cfg.validate()
    ctx = context or _Context(cfg, log)
    out = []
    for num in sorted(criteria or CRITERIA):
        if num not in CRITERIA:
            raise ValueError(f"unknown criterion {num}")
        title, fn = CRITERIA[num]
        t0 = time.perf_counter()
        try:
            ok, summary, details = fn(ctx)
        except Exception as exc:  # reported, not swallowed: the criterion fails
            ok, summary, details = False, f"error: {exc!r}", {}
        res = CriterionResult(num, title, bool(ok), summary, details, time.perf_counter() - t0)
        ctx.log(res.line())
        out.append(res)
    return out
