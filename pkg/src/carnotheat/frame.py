"""Left-invariant horizontal frame in exponential coordinates.

``X_i u(g) = d/ds u(g o exp(s e_i))|_{s=0}``; differentiating the BCH product
symbolically gives ``X_i = d/dz_i + sum_{k in higher layers} b_{k,i}(xi) d/dxi_k``
with polynomial coefficients ``b_{k,i}``, stored exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import sympy

from .algebra import StructureConstants, bch_symbolic, validate_algebra

__all__ = ["HorizontalFrame", "horizontal_frame", "horizontal_gradient",
           "ito_correction_audit", "ItoAudit"]


def _poly_to_dict(expr, symbols):
    poly = sympy.Poly(sympy.expand(expr), *symbols)
    out = {}
    for monom, coeff in poly.terms():
        q = sympy.Rational(coeff)
        if q != 0:
            out[tuple(int(e) for e in monom)] = Fraction(int(q.p), int(q.q))
    return out


@dataclass(frozen=True)
class HorizontalFrame:
    """Exact polynomial coefficients of the horizontal fields.

    ``coeffs[i][k]`` is ``{exponents: Fraction}`` for the component of
    ``X_i`` along coordinate ``k``; the first-layer components are the
    constant unit vectors and are included for completeness.
    """

    sc: StructureConstants
    coeffs: tuple

    @property
    def strat(self):
        return self.sc.strat

    def weighted_degrees(self, i: int, k: int) -> set[int]:
        w = self.strat.weights
        return {int(np.dot(w, e)) for e in self.coeffs[i][k]}

    def variables(self, i: int, k: int) -> set[int]:
        """Coordinates appearing in the coefficient of ``X_i`` along ``k``."""
        return {v for e in self.coeffs[i][k] for v, p in enumerate(e) if p}

    def sympy_fields(self, symbols=None):
        """Coefficient matrix ``B[k, i]`` as sympy expressions."""
        n, m = self.strat.total_dim, self.strat.m
        if symbols is None:
            symbols = sympy.symbols(f"x0:{n}")
        mat = sympy.zeros(n, m)
        for i in range(m):
            for k in range(n):
                mat[k, i] = sum((sympy.Rational(q.numerator, q.denominator)
                                 * sympy.prod([s ** e for s, e in zip(symbols, ex)])
                                 for ex, q in self.coeffs[i][k].items()), sympy.Integer(0))
        return mat, symbols

    @property
    def _compiled(self):
        cache = self.__dict__.get("_compiled_cache")
        if cache is None:
            monos = sorted({ex for col in self.coeffs for comp in col for ex in comp})
            n, m = self.strat.total_dim, self.strat.m
            weights = np.zeros((len(monos), n, m))
            index = {ex: r for r, ex in enumerate(monos)}
            for i, col in enumerate(self.coeffs):
                for k, comp in enumerate(col):
                    for ex, q in comp.items():
                        weights[index[ex], k, i] = float(q)
            cache = (np.array(monos, dtype=int).reshape(len(monos), n), weights)
            object.__setattr__(self, "_compiled_cache", cache)
        return cache

    def matrix(self, xi) -> np.ndarray:
        """Numeric ``B[..., k, i]`` so that ``X_i = sum_k B[k, i] d/dxi_k``."""
        xi = np.asarray(xi, dtype=float)
        monos, weights = self._compiled
        vals = np.ones(xi.shape[:-1] + (len(monos),))
        for v in range(xi.shape[-1]):
            powers = monos[:, v]
            if powers.any():
                vals = vals * xi[..., v:v + 1] ** powers
        return np.einsum("...r,rki->...ki", vals, weights)


def horizontal_frame(sc: StructureConstants) -> HorizontalFrame:
    report = validate_algebra(sc)
    if not report.ok:
        raise ValueError(f"structure constants fail validation: {report.failures()}")
    return _frame_cached(sc)


_FRAME_CACHE: dict = {}


def _frame_cached(sc):
    key = (sc.strat.layer_dims, tuple(sorted((k, v) for k, v in sc.entries.items())))
    if key in _FRAME_CACHE:
        return _FRAME_CACHE[key]
    n, m = sc.strat.total_dim, sc.strat.m
    xs = sympy.symbols(f"x0:{n}")
    s = sympy.Symbol("s")
    cols = []
    for i in range(m):
        e = [sympy.Integer(0)] * n
        e[i] = s
        prod = bch_symbolic(list(xs), e, sc)
        col = []
        for k in range(n):
            deriv = sympy.diff(sympy.expand(prod[k]), s).subs(s, 0)
            col.append(_poly_to_dict(deriv, xs))
        cols.append(tuple(col))
    frame = HorizontalFrame(sc, tuple(cols))
    _FRAME_CACHE[key] = frame
    return frame


def _fd_partials(f, xi, step=1e-5):
    xi = np.asarray(xi, dtype=float)
    out = np.empty(xi.shape)
    for k in range(xi.shape[-1]):
        dx = np.zeros(xi.shape[-1])
        dx[k] = step
        out[..., k] = (f(xi + dx) - f(xi - dx)) / (2 * step)
    return out


def horizontal_gradient(f, g, frame: HorizontalFrame, return_flag: bool = False):
    """``(X_1 f, ..., X_m f)`` at ``g``.

    ``f`` is a :class:`~carnotheat.testfns.ScalarField` (or any object with
    ``__call__`` and optionally ``partials``); without analytic partials a
    central finite difference is used and, with ``return_flag=True``, the
    second return value is ``True``.
    """
    g = np.asarray(g, dtype=float)
    partials = getattr(f, "partials", None)
    used_fd = partials is None
    grad = _fd_partials(f, g) if used_fd else np.asarray(partials(g), dtype=float)
    out = np.einsum("...ki,...k->...i", frame.matrix(g), grad)
    return (out, used_fd) if return_flag else out


@dataclass(frozen=True)
class ItoAudit:
    """Ito-Stratonovich drift ``sum_i (X_i . grad) X_i``, per coordinate."""

    drift: tuple
    vanishes: bool

    def as_dict(self):
        return {"vanishes": self.vanishes, "drift": [str(d) for d in self.drift]}


def ito_correction_audit(frame: HorizontalFrame) -> ItoAudit:
    """Symbolic drift gap between the Stratonovich and Ito forms of ``sum X_i^2``.

    When it vanishes the Euler-type update with midpoint coefficients and the
    Ito reading coincide, which licenses the layer-exact scheme.
    """
    mat, xs = frame.sympy_fields()
    n, m = mat.shape
    drift = []
    for k in range(n):
        total = sympy.Integer(0)
        for i in range(m):
            total += sum(mat[v, i] * sympy.diff(mat[k, i], xs[v]) for v in range(n))
        drift.append(sympy.expand(total))
    return ItoAudit(tuple(drift), all(d == 0 for d in drift))
