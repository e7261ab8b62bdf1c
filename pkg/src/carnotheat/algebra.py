"""Stratified nilpotent Lie algebras and the group law in exponential coordinates.

A Carnot group is described by its layer dimensions and by the structure
constants of its Lie algebra in a graded basis.  Points are plain numpy
arrays of shape ``(..., N)`` holding the exponential coordinates
``xi = (z, sigma_2, ..., sigma_r)``; every group operation broadcasts over the
leading axes.

Bracket convention: the Heisenberg algebra is ``[e1, e2] = +e3`` and the
group law carries the ``+1/2`` Baker-Campbell-Hausdorff factor, so that
``(1, 0, 0) o (0, 1, 0) = (1, 1, 1/2)``.  Every derived sign (frame, Kaplan
map) follows from this single choice.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache

import numpy as np

__all__ = [
    "Stratification",
    "StructureConstants",
    "ValidationReport",
    "axiom_audit",
    "bch_product",
    "dilate",
    "dynkin_words",
    "gauge",
    "identity",
    "inverse",
    "kaplan_map",
    "validate_algebra",
]


@dataclass(frozen=True)
class Stratification:
    """Layer dimensions ``(m_1, ..., m_r)`` of a graded Lie algebra."""

    layer_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if not dims or any(d < 1 for d in dims):
            raise ValueError(f"layer dimensions must be positive, got {self.layer_dims!r}")
        object.__setattr__(self, "layer_dims", dims)

    @property
    def step(self) -> int:
        return len(self.layer_dims)

    @property
    def total_dim(self) -> int:
        return sum(self.layer_dims)

    @property
    def homogeneous_dim(self) -> int:
        return sum(j * m for j, m in enumerate(self.layer_dims, start=1))

    @property
    def m(self) -> int:
        """Dimension of the horizontal layer."""
        return self.layer_dims[0]

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        return tuple(itertools.accumulate((0,) + self.layer_dims[:-1]))

    def layer_slice(self, j: int) -> slice:
        """Coordinate slice of layer ``j`` (1-based)."""
        start = self.offsets[j - 1]
        return slice(start, start + self.layer_dims[j - 1])

    @cached_property
    def weights(self) -> np.ndarray:
        """Layer index of every coordinate, i.e. its dilation weight."""
        return np.repeat(np.arange(1, self.step + 1), self.layer_dims)

    def flat_index(self, layer: int, index: int) -> int:
        """Global coordinate of basis vector ``e_{layer,index}`` (both 1-based)."""
        if not 1 <= layer <= self.step:
            raise ValueError(f"layer {layer} outside 1..{self.step}")
        if not 1 <= index <= self.layer_dims[layer - 1]:
            raise ValueError(f"index {index} outside layer {layer} of dimension "
                             f"{self.layer_dims[layer - 1]}")
        return self.offsets[layer - 1] + index - 1

    def label(self, k: int) -> tuple[int, int]:
        """Inverse of :meth:`flat_index`."""
        layer = int(self.weights[k])
        return layer, k - self.offsets[layer - 1] + 1


@dataclass(frozen=True)
class StructureConstants:
    """Sparse bracket table ``[e_a, e_b] = sum_c coeff * e_c`` on a graded basis.

    ``entries`` maps ordered pairs of global indices ``(a, b)`` to a tuple of
    ``(c, Fraction)`` terms.  Pairs that are only given in one order are
    completed by antisymmetry; pairs given in both orders are kept as is so
    that :func:`validate_algebra` can flag inconsistent input.
    """

    strat: Stratification
    entries: dict = field(default_factory=dict)
    name: str = ""

    @classmethod
    def from_brackets(cls, layer_dims, brackets, name=""):
        """Build from ``{((u, i), (v, j)): {(w, k): coeff}}`` with 1-based labels."""
        strat = Stratification(tuple(layer_dims))
        entries = {}
        for (left, right), out in brackets.items():
            a = strat.flat_index(*left)
            b = strat.flat_index(*right)
            terms = {}
            for basis, coeff in out.items():
                c = strat.flat_index(*basis)
                terms[c] = terms.get(c, Fraction(0)) + Fraction(coeff)
            entries[(a, b)] = tuple((c, q) for c, q in sorted(terms.items()) if q != 0)
        return cls(strat, entries, name)

    @property
    def step(self) -> int:
        return self.strat.step

    @cached_property
    def exact_table(self) -> dict:
        """Antisymmetric completion of ``entries`` as ``{(a, b): {c: Fraction}}``."""
        table = {}
        for (a, b), terms in self.entries.items():
            table[(a, b)] = dict(terms)
        for (a, b), terms in self.entries.items():
            if (b, a) not in self.entries and a != b:
                table[(b, a)] = {c: -q for c, q in terms}
        return table

    @cached_property
    def tensor(self) -> np.ndarray:
        """Dense float tensor ``C[a, b, c]``."""
        n = self.strat.total_dim
        out = np.zeros((n, n, n))
        for (a, b), terms in self.exact_table.items():
            for c, q in terms.items():
                out[a, b, c] = float(q)
        out.setflags(write=False)
        return out

    @cached_property
    def _pairs(self):
        # antisymmetric pairs a < b grouped per output coordinate
        out = {}
        for (a, b), terms in self.exact_table.items():
            if a < b:
                for c, q in terms.items():
                    out.setdefault(c, []).append((a, b, float(q)))
        return tuple(sorted(out.items()))

    def bracket(self, x, y):
        """Lie bracket of coordinate arrays, broadcasting over leading axes.

        Only the sparse nonzero constants are visited; the table is assumed
        antisymmetric (see :func:`validate_algebra`).
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(x.shape, y.shape)
        out = np.zeros(shape)
        for c, terms in self._pairs:
            acc = 0.0
            for a, b, q in terms:
                acc = acc + q * (x[..., a] * y[..., b] - x[..., b] * y[..., a])
            out[..., c] = acc
        return out

    def bracket_exact(self, x, y):
        """Bracket of 1-D object sequences (Fractions, sympy expressions, ...)."""
        n = self.strat.total_dim
        out = [0] * n
        for (a, b), terms in self.exact_table.items():
            xa, yb = x[a], y[b]
            if xa == 0 or yb == 0:
                continue
            for c, q in terms.items():
                out[c] = out[c] + q * xa * yb
        return out


def identity(sc: StructureConstants) -> np.ndarray:
    return np.zeros(sc.strat.total_dim)


def _check_points(sc, *points):
    n = sc.strat.total_dim
    arrays = []
    for p in points:
        arr = np.asarray(p, dtype=float)
        if arr.shape[-1:] != (n,):
            raise ValueError(f"point of shape {arr.shape} does not match a group of "
                             f"dimension {n}")
        arrays.append(arr)
    return arrays


@lru_cache(maxsize=None)
def dynkin_words(depth: int) -> tuple:
    """Right-nested bracket words of the Dynkin series up to ``depth`` letters.

    Returns ``((word, coefficient), ...)`` with ``word`` a string over
    ``"xy"`` and the coefficient an exact Fraction.  Words whose right-nested
    bracket vanishes identically (ending in a repeated letter) are dropped and
    equal words are merged.
    """
    coeffs: dict[str, Fraction] = {}
    for k in range(1, depth + 1):
        # k blocks x^{p_i} y^{q_i} with p_i + q_i >= 1 and total length <= depth
        blocks = [(p, q) for p in range(depth + 1) for q in range(depth + 1)
                  if 1 <= p + q <= depth]
        for combo in itertools.product(blocks, repeat=k):
            n = sum(p + q for p, q in combo)
            if n > depth:
                continue
            word = "".join("x" * p + "y" * q for p, q in combo)
            if n > 1 and word[-1] == word[-2]:
                continue
            denom = k * n
            for p, q in combo:
                denom *= math.factorial(p) * math.factorial(q)
            coeffs[word] = coeffs.get(word, Fraction(0)) + Fraction((-1) ** (k - 1), denom)
    return tuple((w, c) for w, c in sorted(coeffs.items(), key=lambda wc: (len(wc[0]), wc[0]))
                 if c != 0)


def _nested(word, x, y, bracket):
    letters = {"x": x, "y": y}
    acc = letters[word[-1]]
    for ch in reversed(word[:-1]):
        acc = bracket(letters[ch], acc)
    return acc


def _bch(x, y, bracket, step):
    if step == 1:
        return x + y
    xy = bracket(x, y)
    out = x + y + 0.5 * xy
    if step == 2:
        return out
    if step == 3:
        return out + (bracket(x, xy) - bracket(y, xy)) / 12.0
    out = x + y
    for word, coeff in dynkin_words(step):
        if len(word) > 1:
            out = out + float(coeff) * _nested(word, x, y, bracket)
    return out


def bch_product(g, h, sc: StructureConstants) -> np.ndarray:
    """Group product ``g o h`` in exponential coordinates.

    Steps up to 3 use the closed BCH terms through order three; deeper groups
    use the Dynkin series truncated at the step, which is exact since longer
    commutators vanish.
    """
    g, h = _check_points(sc, g, h)
    return _bch(g, h, sc.bracket, sc.step)


def bch_symbolic(x, y, sc: StructureConstants, dynkin: bool = False):
    """BCH series on object sequences, exact in the coefficient field.

    With ``dynkin=True`` the general series is used for every step, which
    gives an independent route for cross-checking :func:`bch_product`.
    """
    br = sc.bracket_exact

    def add(u, v):
        return [a + b for a, b in zip(u, v)]

    def scale(q, u):
        return [q * a for a in u]

    out = add(x, y)
    if sc.step == 1:
        return out
    if not dynkin and sc.step <= 3:
        xy = br(x, y)
        out = add(out, scale(Fraction(1, 2), xy))
        if sc.step == 3:
            out = add(out, scale(Fraction(1, 12), add(br(x, xy), scale(-1, br(y, xy)))))
        return out
    for word, coeff in dynkin_words(sc.step):
        if len(word) > 1:
            out = add(out, scale(coeff, _nested(word, x, y, br)))
    return out


def inverse(g) -> np.ndarray:
    """Inverse element; in exponential coordinates simply ``-xi``."""
    return -np.asarray(g, dtype=float)


def dilate(lam, g, sc: StructureConstants) -> np.ndarray:
    """Anisotropic dilation scaling layer ``j`` by ``lam**j``."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("dilation factor must be positive")
    (g,) = _check_points(sc, g)
    return g * lam[..., None] ** sc.strat.weights


def gauge(g, sc: StructureConstants) -> np.ndarray:
    """Homogeneous gauge ``(sum_j |xi_j|^(2 r!/j))^(1/(2 r!))``."""
    (g,) = _check_points(sc, g)
    strat = sc.strat
    big = 2 * math.factorial(strat.step)
    total = 0.0
    norms = []
    for j in range(1, strat.step + 1):
        norms.append(np.linalg.norm(g[..., strat.layer_slice(j)], axis=-1))
    # rescale by the largest homogeneous block to keep the big power finite
    scale = np.max(np.stack([nj ** (1.0 / j) for j, nj in enumerate(norms, 1)]), axis=0)
    safe = np.where(scale > 0, scale, 1.0)
    for j, nj in enumerate(norms, start=1):
        total = total + (nj / safe ** j) ** (big / j)
    return np.where(scale > 0, safe * total ** (1.0 / big), 0.0)


def kaplan_map(sigma, sc: StructureConstants) -> np.ndarray:
    """Skew matrix ``J(sigma)`` with ``<J(sigma) z, zeta> = <[z, zeta], sigma>``.

    ``sigma`` lives in the second layer; the result has shape ``(..., m, m)``.
    """
    strat = sc.strat
    if strat.step < 2:
        raise ValueError("the Kaplan map needs a second layer (step >= 2)")
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape[-1:] != (strat.layer_dims[1],):
        raise ValueError(f"sigma must have {strat.layer_dims[1]} components")
    m = strat.m
    c = sc.tensor[:m, :m, strat.layer_slice(2)]
    # J[a, b] = <[e_b, e_a], sigma>
    return np.einsum("bak,...k->...ab", c, sigma)


@dataclass
class ValidationReport:
    """Pass/fail entries for the Carnot algebra axioms."""

    checks: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def failures(self) -> list[str]:
        return [name for name, passed in self.checks.items() if not passed]

    def as_dict(self) -> dict:
        return {"ok": self.ok, "checks": dict(self.checks),
                "details": {k: list(v) for k, v in self.details.items()}}


def _exact_rank(rows) -> int:
    """Rank of a list of Fraction rows by Gaussian elimination."""
    mat = [list(r) for r in rows if any(x != 0 for x in r)]
    rank = 0
    ncols = len(mat[0]) if mat else 0
    for col in range(ncols):
        pivot = next((i for i in range(rank, len(mat)) if mat[i][col] != 0), None)
        if pivot is None:
            continue
        mat[rank], mat[pivot] = mat[pivot], mat[rank]
        for i in range(len(mat)):
            if i != rank and mat[i][col] != 0:
                f = mat[i][col] / mat[rank][col]
                mat[i] = [a - f * b for a, b in zip(mat[i], mat[rank])]
        rank += 1
    return rank


def validate_algebra(sc: StructureConstants) -> ValidationReport:
    """Check antisymmetry, grading, Jacobi and bracket generation exactly."""
    strat = sc.strat
    n = strat.total_dim
    rep = ValidationReport()
    table = sc.exact_table

    bad = []
    for (a, b), terms in sc.entries.items():
        if a == b:
            if any(q != 0 for _, q in terms):
                bad.append(f"[e{a},e{a}] != 0")
            continue
        if (b, a) in sc.entries:
            ab = dict(terms)
            ba = dict(sc.entries[(b, a)])
            for c in set(ab) | set(ba):
                if ab.get(c, 0) + ba.get(c, 0) != 0:
                    bad.append(f"[e{a},e{b}] + [e{b},e{a}] != 0")
                    break
    rep.checks["antisymmetry"] = not bad
    rep.details["antisymmetry"] = bad

    bad = []
    w = strat.weights
    for (a, b), terms in table.items():
        for c, q in terms.items():
            if q != 0 and w[c] != w[a] + w[b]:
                bad.append(f"[e{a},e{b}] has a component on e{c}")
    rep.checks["grading"] = not bad
    rep.details["grading"] = bad

    def br(x, y):
        return sc.bracket_exact(x, y)

    basis = [[Fraction(int(i == k)) for i in range(n)] for k in range(n)]
    bad = []
    for a, b, c in itertools.combinations(range(n), 3):
        ea, eb, ec = basis[a], basis[b], basis[c]
        s = [x + y + z for x, y, z in zip(br(ea, br(eb, ec)), br(eb, br(ec, ea)),
                                           br(ec, br(ea, eb)))]
        if any(v != 0 for v in s):
            bad.append(f"Jacobi({a},{b},{c})")
    rep.checks["jacobi"] = not bad
    rep.details["jacobi"] = bad

    bad = []
    for j in range(1, strat.step):
        target = strat.layer_slice(j + 1)
        rows = []
        for i in range(strat.m):
            for k in range(strat.layer_slice(j).start, strat.layer_slice(j).stop):
                rows.append(br(basis[i], basis[k])[target])
        if _exact_rank(rows) != strat.layer_dims[j]:
            bad.append(f"[g1, g{j}] does not span g{j + 1}")
    top = strat.layer_slice(strat.step)
    for i in range(strat.m):
        for k in range(top.start, top.stop):
            if any(v != 0 for v in br(basis[i], basis[k])):
                bad.append("[g1, g_r] != 0")
                break
    rep.checks["generation"] = not bad
    rep.details["generation"] = bad
    return rep


def axiom_audit(sc: StructureConstants, n: int = 1000, seed: int = 0, box: float = 2.0,
                tol: float = 1e-12) -> dict:
    """Floating-point group axioms on ``n`` random triples from ``[-box, box]^N``.

    Errors are measured relative to ``max(1, |value|)`` componentwise: the
    associativity defect, the dilation automorphism defect
    ``delta_lam(g o h) - delta_lam g o delta_lam h`` with ``lam`` drawn
    log-uniformly from ``[1/2, 2]``, and the gauge homogeneity defect.
    """
    rng = np.random.default_rng(seed)
    dim = sc.strat.total_dim
    g, h, k = rng.uniform(-box, box, size=(3, n, dim))
    lam = np.exp(rng.uniform(-math.log(2), math.log(2), size=n))

    def rel(a, b):
        return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))

    left = bch_product(bch_product(g, h, sc), k, sc)
    right = bch_product(g, bch_product(h, k, sc), sc)
    errs = {
        "associativity": rel(left, right),
        "dilation": rel(dilate(lam, bch_product(g, h, sc), sc),
                        bch_product(dilate(lam, g, sc), dilate(lam, h, sc), sc)),
        "gauge": rel(gauge(dilate(lam, g, sc), sc), lam * gauge(g, sc)),
    }
    return {"group": sc.name, "n": n, "tol": tol, "errors": errs,
            "checks": {k: v <= tol for k, v in errs.items()},
            "ok": all(v <= tol for v in errs.values())}
