"""Command-line interface: one subcommand per experiment, CSV + JSON reports.

Exit status is 0 when every check of the subcommand passes, 1 when a check
fails (the first failing check goes to stderr) and 2 for configuration
errors.  ``--config`` reads a JSON document whose keys are flag names
(``t_grid``, ``paths``, ...); flags given on the command line win.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time

import numpy as np

from . import acceptance as acc
from .algebra import axiom_audit, validate_algebra
from .catalog import CATALOG, get_group
from .diffusion import (DiffusionSampler, huisken_statistic, ledoux_constant, ledoux_statistic,
                        marginal_gaussian_test, sample_endpoints)
from .estimate import SCHEMA_VERSION
from .functionals import (bbm_limits, besov_embedding_bound, besov_seminorm,
                          gaussian_moment_constant, ms_limit, phi_profiles, sandwich_check)
from .heat_kernel import KernelEngine, decoupling_marginal, kernel_normalization
from .testfns import FUNCTIONS, get_function


class ConfigError(ValueError):
    pass


# -- reports ----------------------------------------------------------------------

class Report:
    def __init__(self, command, config):
        self.command = command
        self.config = config
        self.rows = []
        self.checks = []  # (name, ok, message)
        self.details = {}

    def check(self, name, ok, message=""):
        self.checks.append((name, bool(ok), message))

    @property
    def ok(self):
        return all(ok for _, ok, _ in self.checks)

    def first_failure(self):
        return next(((n, m) for n, ok, m in self.checks if not ok), None)

    def to_csv(self) -> str:
        buf = io.StringIO()
        keys = []
        for r in self.rows:
            keys += [k for k in r if k not in keys]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys)
        for r in self.rows:
            w.writerow([_cell(r.get(k, "")) for k in keys])
        return buf.getvalue()

    def to_json(self, elapsed) -> str:
        doc = {"schema_version": SCHEMA_VERSION, "command": self.command, "ok": self.ok,
               "config": self.config, "rows": self.rows,
               "checks": [{"name": n, "ok": ok, "message": m} for n, ok, m in self.checks],
               "details": self.details,
               # run-specific values live here and are excluded from comparisons
               "run": {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"), "seconds": elapsed}}
        return json.dumps(doc, indent=2, sort_keys=True, default=_jsonable)

    def write(self, out, elapsed):
        d = os.path.dirname(out)
        if d:
            os.makedirs(d, exist_ok=True)
        with open(out + ".csv", "w") as fh:
            fh.write(self.to_csv())
        with open(out + ".json", "w") as fh:
            fh.write(self.to_json(elapsed))


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return " ".join(_cell(x) for x in v)
    return str(v)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return str(v)


# -- config handling ----------------------------------------------------------------

def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


def _merge(args, defaults):
    cfg = dict(defaults)
    if args.config:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        cfg.update({k.replace("-", "_"): v for k, v in doc.items()})
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "command", "func"):
            cfg[k] = v
    return cfg


def _group(cfg):
    try:
        return get_group(cfg["group"])
    except (KeyError, OSError, ValueError) as exc:
        raise ConfigError(f"cannot load group {cfg.get('group')!r}: {exc}") from exc


def _function(cfg):
    name = cfg.get("function")
    if name not in FUNCTIONS:
        raise ConfigError(f"unknown function {name!r}; choose from {sorted(FUNCTIONS)}")
    return get_function(name)


def _sampler(cfg, sc, t=1.0, paths=None):
    n = int(paths or cfg["paths"])
    h = float(cfg["step_size"])
    if n < 1 or h <= 0:
        raise ConfigError("paths and step size must be positive")
    return DiffusionSampler(sc, t, min(h, t), n, seed=int(cfg["seed"]),
                            threads=int(cfg["threads"]))


def _law(cfg, sc):
    return sc if sc.step == 1 else _sampler(cfg, sc)


def _profiles(cfg, entry, ps):
    sc = get_group(entry.group)
    if cfg.get("t_grid"):
        tg = np.asarray(_floats(cfg["t_grid"]))
    else:
        tg = np.geomspace(0.0025, 100, 16) * entry.t_scale
    return phi_profiles(entry.field, ps, tg, _law(cfg, sc))


# -- subcommands ----------------------------------------------------------------------

def cmd_validate_group(cfg, rep):
    source = cfg.get("source") or cfg.get("group")
    if source is None:
        raise ConfigError("give a group name or JSON file")
    try:
        sc = get_group(source)
    except (KeyError, OSError, ValueError) as exc:
        raise ConfigError(f"cannot load group {source!r}: {exc}") from exc
    val = validate_algebra(sc)
    audit = axiom_audit(sc, seed=int(cfg["seed"]))
    for name, ok in val.checks.items():
        rep.rows.append({"check": name, "kind": "exact", "ok": ok, "defect": 0.0 if ok else 1.0})
        rep.check(name, ok, "; ".join(val.details.get(name, [])))
    for name, ok in audit["checks"].items():
        rep.rows.append({"check": name, "kind": "float", "ok": ok,
                         "defect": audit["errors"][name]})
        rep.check(name, ok, f"defect {audit['errors'][name]:.2e}")
    rep.details = {"group": sc.name, "validation": val.as_dict(), "audit": audit}


def cmd_kernel_eval(cfg, rep):
    sc = _group(cfg)
    try:
        engine = KernelEngine(sc)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    pt = np.asarray(_floats(cfg.get("point") or "0"))
    if pt.size == 1 and sc.strat.total_dim > 1 and pt[0] == 0:
        pt = np.zeros(sc.strat.total_dim)
    if pt.shape != (sc.strat.total_dim,):
        raise ConfigError(f"point needs {sc.strat.total_dim} coordinates")
    t = float(cfg.get("t", 1.0))
    if t <= 0:
        raise ConfigError("t must be positive")
    val, err = engine.evaluate(pt, t)
    rep.rows.append({"point": pt.tolist(), "t": t, "value": float(val), "error": float(err)})
    rep.check("finite", math.isfinite(float(val)) and math.isfinite(float(err)))
    print(f"{float(val):.12g} +- {float(err):.2g}")


def cmd_normalization(cfg, rep):
    sc = _group(cfg)
    try:
        engine = KernelEngine(sc)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    tol = float(cfg.get("tol") or 1e-4)
    ts = [float(cfg["t"])] if cfg.get("t") and not cfg.get("t_grid") else \
        _floats(cfg.get("t_grid") or "0.25,1,4")
    for t in ts:
        if t <= 0:
            raise ConfigError("t must be positive")
        e = kernel_normalization(engine, t)
        ok = abs(e.value - 1) <= tol
        rep.rows.append({"t": t, "value": e.value, "error": e.error, "ok": ok})
        rep.check(f"mass(t={t})", ok, f"|{e.value!r} - 1| > {tol}")


def cmd_decoupling(cfg, rep):
    sc = _group(cfg)
    t = float(cfg.get("t", 1.0))
    # quadrature resolves the vertical integral only for one vertical direction
    if sc.step == 1 or (sc.step == 2 and sc.strat.layer_dims[1] == 1):
        z = acc.decoupling_grid()
        if sc.strat.m != 2:
            z = np.concatenate([z, np.zeros((z.shape[0], sc.strat.m - 2))], axis=-1) \
                if sc.strat.m > 2 else z[:, :1]
        est = decoupling_marginal(KernelEngine(sc), z, t)
        m = sc.strat.m
        exact = np.exp(-np.sum(z * z, axis=-1) / (4 * t)) / (4 * math.pi * t) ** (m / 2)
        tol = float(cfg.get("tol") or 1e-5)
        for zi, v, e, x in zip(z, np.atleast_1d(est.value), np.atleast_1d(est.error), exact):
            ok = abs(v - x) <= tol
            rep.rows.append({"z": zi.tolist(), "marginal": float(v), "error": float(e),
                             "gaussian": float(x), "ok": ok})
            rep.check(f"z={zi.tolist()}", ok, f"|{v!r} - {x!r}| > {tol}")
    else:
        _marginal(cfg, rep, sc, t)


def _marginal(cfg, rep, sc, t):
    s = sample_endpoints(_sampler(cfg, sc, t))
    res = marginal_gaussian_test(s, t)
    for i, ks in enumerate(res["ks"]):
        rep.rows.append({"direction": i, "mean": res["mean"][i], "se_mean": res["se_mean"],
                         "variance": res["covariance"][i][i], "ks": ks,
                         "ks_threshold": res["ks_threshold"],
                         "fourth_moment_ratio": res["fourth_moment_ratio"][i]})
    for name, ok in res["checks"].items():
        rep.check(name, ok, f"marginal {name} check failed")
    rep.details = res


def cmd_marginal_test(cfg, rep):
    _marginal(cfg, rep, _group(cfg), float(cfg.get("t", 1.0)))


def cmd_ledoux(cfg, rep):
    sc = _group(cfg)
    s = sample_endpoints(_sampler(cfg, sc, 1.0))
    m = sc.strat.m
    for p in _floats(cfg.get("p") or "1,2,3"):
        target = ledoux_constant(p)
        for k in range(8):
            nu = np.zeros(m)
            if m == 1:
                nu[0] = 1.0 if k % 2 == 0 else -1.0
            else:
                nu[:2] = [math.cos(k * math.pi / 8), math.sin(k * math.pi / 8)]
            e = ledoux_statistic(s, nu, p)
            ok = abs(e.value - target) <= 3 * e.error
            rep.rows.append({"p": p, "direction": k, "value": e.value, "se": e.error,
                             "target": target, "ok": ok})
            rep.check(f"p={p},k={k}", ok, f"{e.value!r} vs {target!r} (se {e.error:.2g})")


def cmd_huisken(cfg, rep):
    sc = _group(cfg)
    nu = np.zeros(sc.strat.m)
    nu[0] = 1.0
    for t in _floats(cfg.get("t_grid") or "0.5,1"):
        s = sample_endpoints(_sampler(cfg, sc, t))
        e = huisken_statistic(s, nu, t)
        ok = abs(e.value - 1) <= 3 * e.error
        rep.rows.append({"t": t, "value": e.value, "error": e.error,
                         "se": e.breakdown["standard_error"], "bias": e.breakdown["bias_bound"],
                         "ok": ok})
        rep.check(f"t={t}", ok, f"{e.value!r} not within 3 errors of 1")


def _limit_rows(rep, limit_report, band=None):
    for row in limit_report.rows():
        rep.rows.append(dict(zip(("param", "value", "error", "target", "ratio"),
                                 map(float, row)), name=limit_report.name))
    if band is not None:
        lo, hi = band
        ok = lo <= limit_report.ratio <= hi
        rep.check(limit_report.name, ok, f"ratio {limit_report.ratio:.5f} outside [{lo}, {hi}]")


def cmd_bbm_limit(cfg, rep):
    entry = _function(cfg)
    sc = get_group(entry.group)
    ps = _floats(cfg.get("p") or "2")
    default = "0.0004,0.0002,0.0001,0.00005" if sc.step == 1 else "0.02,0.01,0.005,0.0025"
    tg = _floats(cfg.get("t_grid") or default)
    try:
        reports = bbm_limits(entry.field, ps, tg, _law(cfg, sc))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for p, r in reports.items():
        w = 0.03 if p == 1 else 0.02
        _limit_rows(rep, r, (1 - w, 1 + w))
        rep.details[str(p)] = json.loads(r.to_json())


def cmd_besov(cfg, rep):
    entry = _function(cfg)
    ps = _floats(cfg.get("p") or "2")
    s_grid = _floats(cfg.get("s_grid") or "0.1,0.25,0.5,0.75,0.9")
    if any(not 0 < s < 1 for s in s_grid):
        raise ConfigError("s values must lie in (0, 1)")
    profs = _profiles(cfg, entry, ps)
    m = get_group(entry.group).strat.m
    for p, prof in profs.items():
        cp = gaussian_moment_constant(p, m)
        for s in s_grid:
            e = besov_seminorm(entry.field, s, p, prof)
            bound = besov_embedding_bound(prof, s, cp)
            ok = e.value <= bound + 3 * e.error
            rep.rows.append({"p": p, "s": s, "value": e.value, "error": e.error,
                             "embedding_bound": bound, "ok": ok})
            rep.check(f"embedding(p={p},s={s})", ok, f"{e.value!r} > bound {bound!r}")
        rep.details[str(p)] = json.loads(prof.to_json())


def cmd_ms_limit(cfg, rep):
    entry = _function(cfg)
    ps = _floats(cfg.get("p") or "1,2")
    s_grid = _floats(cfg.get("s_grid") or "0.02,0.01")
    profs = _profiles(cfg, entry, ps)
    for p, prof in profs.items():
        try:
            r = ms_limit(entry.field, p, s_grid, prof)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        for row in r.rows():
            rep.rows.append(dict(zip(("param", "value", "error", "target", "ratio"),
                                     map(float, row)), name=r.name))
        ratio = r.values[-1] / r.target
        rep.check(f"ms(p={p},s={s_grid[-1]})", 0.98 <= ratio <= 1.02,
                  f"s N^p / target = {ratio:.5f} outside [0.98, 1.02]")
        rep.details[str(p)] = json.loads(r.to_json())


def cmd_sandwich(cfg, rep):
    names = [cfg["function"]] if cfg.get("function") else [
        f for f, (g, _) in FUNCTIONS.items() if not cfg.get("group") or g == cfg["group"]]
    ps = _floats(cfg.get("p") or "1,2")
    s_grid = _floats(cfg.get("s_grid") or "0.9999,0.99999,0.999999")
    for name in names:
        entry = _function({"function": name})
        for p, prof in _profiles(cfg, entry, ps).items():
            r = sandwich_check(prof, prof.t[:4], s_grid)
            rep.rows.append({"function": name, "p": p, "left": r["left"], "min_s": r["min_s"],
                             "max_s": r["max_s"], "right": r["right"],
                             "lower_ok": r["lower_ok"], "upper_ok": r["upper_ok"]})
            rep.check(f"{name}(p={p})", r["ok"],
                      f"chain {r['left']:.5g} <= {r['min_s']:.5g} <= {r['max_s']:.5g} "
                      f"<= {r['right']:.5g} broken")


def cmd_acceptance(cfg, rep):
    doc = dict(cfg.get("acceptance") or {})
    doc["seed"] = int(cfg["seed"])
    doc["threads"] = int(cfg["threads"])
    if cfg.get("group"):
        if cfg["group"] not in CATALOG:
            raise ConfigError(f"unknown group {cfg['group']!r}")
        doc["groups"] = [cfg["group"]]
    if cfg.get("function"):
        doc["functions"] = [cfg["function"]]
    crit = [int(c) for c in _floats(cfg["criteria"])] if cfg.get("criteria") else None
    try:
        ac = acc.AcceptanceConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    log = (lambda msg: print(msg, file=sys.stderr, flush=True)) if cfg.get("verbose") else None
    results = acc.run_acceptance(ac, crit, log=log)
    for r in results:
        print(r.line(), flush=True)
        rep.rows.append({"criterion": r.number, "title": r.title, "ok": r.ok,
                         "summary": r.summary})
        rep.check(f"criterion {r.number} ({r.title})", r.ok, r.summary)
    rep.details = {"config": ac.to_dict(),
                   "criteria": {r.number: {"details": r.details, "seconds": r.seconds}
                                for r in results}}


COMMANDS = {
    "validate-group": (cmd_validate_group, "check a group's algebra axioms"),
    "kernel-eval": (cmd_kernel_eval, "evaluate the explicit heat kernel"),
    "normalization": (cmd_normalization, "total mass of the kernel"),
    "decoupling": (cmd_decoupling, "horizontal marginal vs the Euclidean kernel"),
    "marginal-test": (cmd_marginal_test, "Monte Carlo test of the horizontal marginal"),
    "ledoux": (cmd_ledoux, "Ledoux constants by Monte Carlo"),
    "huisken": (cmd_huisken, "Huisken identity by Monte Carlo"),
    "bbm-limit": (cmd_bbm_limit, "t -> 0 limit of the BBM energy"),
    "besov": (cmd_besov, "Besov seminorms from a Phi profile"),
    "ms-limit": (cmd_ms_limit, "s -> 0 behaviour of the Besov seminorm"),
    "sandwich": (cmd_sandwich, "finite-grid liminf/limsup chain"),
    "acceptance": (cmd_acceptance, "run the acceptance suite"),
}

DEFAULTS = {
    "group": None, "function": None, "p": None, "t_grid": None, "s_grid": None,
    "paths": None, "step_size": 0.01, "seed": 42, "threads": 1, "t": 1.0,
}

DEFAULT_PATHS = {"marginal-test": 100_000, "decoupling": 100_000, "ledoux": 1_000_000,
                 "huisken": 1_000_000, "bbm-limit": 256}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="carnotheat", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (fn, help_) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_)
        if name == "validate-group":
            sp.add_argument("source", nargs="?", help="catalog name or group JSON file")
        sp.add_argument("--config", help="JSON config; flags override its values")
        sp.add_argument("--group")
        sp.add_argument("--function")
        sp.add_argument("--p", help="exponent(s), comma separated")
        sp.add_argument("--t", type=float, help="time")
        sp.add_argument("--point", help="group element, comma separated coordinates")
        sp.add_argument("--t-grid", dest="t_grid", help="comma-separated t values")
        sp.add_argument("--s-grid", dest="s_grid", help="comma-separated s values")
        sp.add_argument("--paths", type=int)
        sp.add_argument("--step-size", dest="step_size", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int)
        sp.add_argument("--tol", type=float)
        sp.add_argument("--out", help="report path prefix (writes .csv and .json)")
        if name == "acceptance":
            sp.add_argument("--criteria", help="comma-separated criterion numbers")
            sp.add_argument("--verbose", action="store_true", default=None)
        sp.set_defaults(func=fn)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors
        return int(exc.code or 0)
    t0 = time.perf_counter()
    try:
        defaults = dict(DEFAULTS, paths=DEFAULT_PATHS.get(args.command, 128))
        cfg = _merge(args, defaults)
        rep = Report(args.command, {k: v for k, v in cfg.items() if k != "out"})
        args.func(cfg, rep)
    except (ConfigError, ValueError, KeyError) as exc:
        # library preconditions reject the configuration, not a check
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = cfg.get("out") or args.command
    rep.write(out, time.perf_counter() - t0)
    fail = rep.first_failure()
    if fail:
        print(f"check failed: {fail[0]}: {fail[1]}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
