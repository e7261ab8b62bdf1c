"""Compactly supported C^1 test functions with exact Euclidean partials."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np
import sympy

from .algebra import StructureConstants, bch_symbolic
from .catalog import get_group

__all__ = [
    "CatalogEntry",
    "FUNCTIONS",
    "ScalarField",
    "audit_partials",
    "dilated",
    "get_function",
    "left_translated",
    "make_bump",
    "make_coordinate_modulated",
    "zero_field",
]


X = sympy.Symbol("X")


@dataclass(frozen=True)
class ScalarField:
    """``f(xi)`` on exponential coordinates with Euclidean partials and support box.

    ``func`` maps ``(..., N)`` arrays to ``(...)``; ``partials`` maps them to
    ``(..., N)``.  ``lo``/``hi`` bound the support.  Product fields also keep
    ``factors``: one sympy expression in ``X`` per coordinate, used for exact
    reference integrals.
    """

    name: str
    func: Callable
    partials: Callable | None
    lo: np.ndarray
    hi: np.ndarray
    smoothness: str = "C1"
    factors: tuple | None = field(default=None, repr=False, compare=False)

    def __call__(self, xi):
        return self.func(np.asarray(xi, dtype=float))

    @property
    def dim(self) -> int:
        return len(self.lo)


def zero_field(n: int) -> ScalarField:
    return ScalarField("zero", lambda x: np.zeros(np.shape(x)[:-1]),
                       lambda x: np.zeros(np.shape(x)), -np.ones(n), np.ones(n), "Cinf",
                       (sympy.Integer(0),) * n)


def make_bump(sc: StructureConstants, center=None, radii=None, power: int = 2,
              name: str = "bump") -> ScalarField:
    """``prod_k max(0, 1 - (x_k - c_k)^2 / r_k^2)^power`` with analytic partials."""
    n = sc.strat.total_dim
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    r = np.ones(n) if radii is None else np.broadcast_to(np.asarray(radii, dtype=float), (n,))
    if np.any(r <= 0):
        raise ValueError("bump radii must be positive")
    if power < 2 or int(power) != power:
        raise ValueError("power must be an integer >= 2 for a C^1 bump")
    k = int(power)

    def factors(x):
        u = (x - c) / r
        base = np.clip(1.0 - u * u, 0.0, None)
        return u, base

    def func(x):
        _, base = factors(x)
        return np.prod(base ** k, axis=-1)

    def partials(x):
        u, base = factors(x)
        vals = base ** k
        out = np.empty(np.shape(x))
        for j in range(n):
            others = np.prod(np.delete(vals, j, axis=-1), axis=-1)
            out[..., j] = others * k * base[..., j] ** (k - 1) * (-2 * u[..., j] / r[j])
        return out

    facs = tuple((1 - ((X - sympy.nsimplify(c[j])) / sympy.nsimplify(r[j])) ** 2) ** k
                 for j in range(n))
    return ScalarField(name, func, partials, c - r, c + r, f"C{k - 1}", facs)


def make_coordinate_modulated(sc: StructureConstants, base: ScalarField, exponents,
                              name: str | None = None) -> ScalarField:
    """``base * prod_k x_k**e_k``; exercises vertical dependence of ``f``."""
    e = np.asarray(exponents, dtype=int)
    if e.shape != (sc.strat.total_dim,) or np.any(e < 0):
        raise ValueError("exponents must be nonnegative, one per coordinate")
    if not e.any():
        return base

    def mono(x):
        return np.prod(x ** e, axis=-1)

    def func(x):
        return base.func(x) * mono(x)

    def partials(x):
        out = base.partials(x) * mono(x)[..., None]
        for j in np.nonzero(e)[0]:
            ej = e.copy()
            ej[j] -= 1
            out[..., j] += base.func(x) * e[j] * np.prod(x ** ej, axis=-1)
        return out

    facs = None
    if base.factors is not None:
        facs = tuple(fac * X ** int(ej) for fac, ej in zip(base.factors, e))
    label = name or f"{base.name}*x^{tuple(int(v) for v in e)}"
    return ScalarField(label, func, partials, base.lo, base.hi, base.smoothness, facs)


def dilated(f: ScalarField, lam: float, sc: StructureConstants) -> ScalarField:
    """``f o delta_lam``."""
    w = sc.strat.weights
    scale = float(lam) ** w

    def func(x):
        return f.func(x * scale)

    def partials(x):
        return f.partials(x * scale) * scale

    return ScalarField(f"{f.name}@dil{lam}", func, partials, f.lo / scale, f.hi / scale,
                       f.smoothness)


_JACOBIANS: dict = {}


def _left_jacobian(sc: StructureConstants):
    key = (sc.strat.layer_dims, tuple(sorted(sc.entries.items())))
    if key not in _JACOBIANS:
        _JACOBIANS[key] = _build_left_jacobian(sc)
    return _JACOBIANS[key]


def _build_left_jacobian(sc: StructureConstants):
    n = sc.strat.total_dim
    a = sympy.symbols(f"a0:{n}")
    x = sympy.symbols(f"x0:{n}")
    prod = [sympy.expand(v) for v in bch_symbolic(list(a), list(x), sc)]
    jac = sympy.Matrix([[sympy.diff(prod[i], x[j]) for j in range(n)] for i in range(n)])
    return sympy.lambdify((a, x), jac, "numpy")


def left_translated(f: ScalarField, g0, sc: StructureConstants) -> ScalarField:
    """``x -> f(g0 o x)``; support box recomputed from the translated box."""
    from .algebra import bch_product, inverse

    g0 = np.asarray(g0, dtype=float)
    jac = _left_jacobian(sc)
    n = sc.strat.total_dim

    def func(x):
        return f.func(bch_product(g0, x, sc))

    def partials(x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, n)
        grad = f.partials(bch_product(g0, flat, sc))
        out = np.empty_like(flat)
        for i, (row, gr) in enumerate(zip(flat, grad)):
            out[i] = np.asarray(jac(g0, row), dtype=float).T @ gr
        return out.reshape(x.shape)

    # image of the support box under g0^{-1} o (.): dense boundary sampling
    grids = np.meshgrid(*[np.linspace(a, b, 9) for a, b in zip(f.lo, f.hi)], indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    img = bch_product(inverse(g0), pts, sc)
    span = img.max(axis=0) - img.min(axis=0)
    return ScalarField(f"{f.name}@L", func, partials, img.min(axis=0) - 0.05 * span,
                       img.max(axis=0) + 0.05 * span, f.smoothness)


def audit_partials(f: ScalarField, n_points: int = 50, step: float = 1e-5, seed: int = 0):
    """Max relative mismatch between declared partials and central differences."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(f.lo, f.hi, size=(n_points, f.dim))
    fd = np.empty_like(x)
    for k in range(f.dim):
        dx = np.zeros(f.dim)
        dx[k] = step
        fd[:, k] = (f(x + dx) - f(x - dx)) / (2 * step)
    exact = f.partials(x)
    scale = max(np.max(np.abs(exact)), 1e-300)
    return float(np.max(np.abs(exact - fd)) / scale)


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    group: str
    field: ScalarField
    references: dict = field(default_factory=dict)
    t_scale: float = 1.0  # natural diffusion time of the function (support width^2)


def _exact_norms(f: ScalarField, sc: StructureConstants):
    """Exact ``||f||_2^2`` and ``||grad_H f||_2^2`` for polynomial product fields.

    ``|X_i f|^2`` expands into frame-coefficient monomials times products of
    univariate factors, so every term is a product of 1-D integrals.
    """
    from .frame import horizontal_frame

    n, m = sc.strat.total_dim, sc.strat.m
    facs = [sympy.expand(v) for v in f.factors]
    ders = [sympy.expand(sympy.diff(v, X)) for v in facs]
    lims = [(sympy.nsimplify(a), sympy.nsimplify(b)) for a, b in zip(f.lo, f.hi)]
    cache = {}

    def one_d(j, power, kind):
        key = (j, power, kind)
        if key not in cache:
            u = {"ff": facs[j] ** 2, "fd": facs[j] * ders[j], "dd": ders[j] ** 2}[kind]
            cache[key] = sympy.integrate(sympy.expand(u * X ** power), (X, *lims[j]))
        return cache[key]

    f2 = sympy.prod([one_d(j, 0, "ff") for j in range(n)])
    frame = horizontal_frame(sc)
    g2 = sympy.Integer(0)
    for i in range(m):
        col = frame.coeffs[i]
        for k in range(n):
            for l in range(n):
                if not col[k] or not col[l]:
                    continue
                for ek, qk in col[k].items():
                    for el, ql in col[l].items():
                        term = sympy.Rational(qk.numerator, qk.denominator) * sympy.Rational(
                            ql.numerator, ql.denominator)
                        for j in range(n):
                            kind = ("dd" if k == l == j else "fd" if j in (k, l) else "ff")
                            term *= one_d(j, ek[j] + el[j], kind)
                        g2 += term
    f2, g2 = sympy.Rational(f2), sympy.Rational(g2)
    return Fraction(int(f2.p), int(f2.q)), Fraction(int(g2.p), int(g2.q))


def _entry(name, group, build):
    sc = get_group(group)
    f = build(sc)
    f = ScalarField(name, f.func, f.partials, f.lo, f.hi, f.smoothness, f.factors)
    return CatalogEntry(name, group, f)


FUNCTIONS = {
    "r1_bump": ("r1", lambda sc: make_bump(sc, radii=1.0, power=2)),
    "r1_bump3": ("r1", lambda sc: make_bump(sc, radii=1.0, power=3)),
    "r2_bump": ("r2", lambda sc: make_bump(sc, center=[0.25, 0.0], radii=[1.0, 1.5], power=3)),
    "h1_bump": ("h1", lambda sc: make_bump(sc, radii=[1.0, 1.0, 1.0], power=3)),
    "h1_sigma_bump": ("h1", lambda sc: make_coordinate_modulated(
        sc, make_bump(sc, center=[0.2, -0.1, 0.3], radii=[1.0, 1.0, 1.0], power=3), [0, 0, 1])),
    "h1_wide_bump": ("h1", lambda sc: make_bump(sc, radii=[2.0, 2.0, 4.0], power=3)),
    "h1_bump2": ("h1", lambda sc: make_bump(sc, radii=[1.0, 1.0, 1.0], power=2)),
    "free2_bump": ("free2_3", lambda sc: make_bump(sc, radii=1.0, power=3)),
    "free2_sigma_bump": ("free2_3", lambda sc: make_coordinate_modulated(
        sc, make_bump(sc, radii=1.0, power=3), [0, 0, 0, 1, 0, 0])),
    "engel_bump": ("engel", lambda sc: make_bump(sc, radii=[1.0, 1.0, 1.0, 1.0], power=3)),
    "engel_sigma_bump": ("engel", lambda sc: make_coordinate_modulated(
        sc, make_bump(sc, center=[0.1, 0.2, -0.2, 0.1], radii=1.0, power=3), [0, 0, 0, 1])),
}


@lru_cache(maxsize=None)
def get_function(name: str) -> CatalogEntry:
    """Catalog entry with exact ``p = 2`` reference norms (``("f", 2)``, ``("grad", 2)``)."""
    if name not in FUNCTIONS:
        raise KeyError(f"unknown function {name!r}; catalog has {sorted(FUNCTIONS)}")
    group, build = FUNCTIONS[name]
    entry = _entry(name, group, build)
    f2, g2 = _exact_norms(entry.field, get_group(group))
    width = float(np.max((entry.field.hi - entry.field.lo)[: get_group(group).strat.m])) / 2
    return CatalogEntry(name, group, entry.field, {("f", 2): f2, ("grad", 2): g2}, width ** 2)
