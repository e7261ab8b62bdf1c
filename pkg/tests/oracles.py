"""Independent reference computations used by the tests.

The group-product oracle works in the truncated tensor algebra over the
generators: exp and log are finite power series there, and the coordinates
of a product in a quotient of the free nilpotent algebra are read off as
coefficients of specific words.  It shares no code with the package.
"""

import math

import numpy as np


class TruncatedTensor:
    """Elements of T(R^a) truncated above degree ``r``; ``parts[k]`` has shape ``(a,)*k``."""

    def __init__(self, a, r, parts=None):
        self.a, self.r = a, r
        self.parts = parts or [np.zeros((a,) * k) for k in range(r + 1)]

    def __add__(self, other):
        return TruncatedTensor(self.a, self.r, [x + y for x, y in zip(self.parts, other.parts)])

    def scale(self, c):
        return TruncatedTensor(self.a, self.r, [c * x for x in self.parts])

    def __mul__(self, other):
        out = TruncatedTensor(self.a, self.r)
        for i, x in enumerate(self.parts):
            for j, y in enumerate(other.parts):
                if i + j <= self.r:
                    out.parts[i + j] = out.parts[i + j] + np.multiply.outer(x, y)
        return out

    def word(self, letters):
        return float(self.parts[len(letters)][tuple(letters)])


def lie_image(a, r, words):
    """Tensor image of ``sum c * [w1, [w2, ... wk]]``; ``words`` maps letter tuples to c."""
    out = TruncatedTensor(a, r)
    for letters, c in words.items():
        # right-nested bracket expands to a signed sum of permuted words
        acc = {(letters[-1],): 1.0}
        for ch in reversed(letters[:-1]):
            nxt = {}
            for w, v in acc.items():
                nxt[(ch,) + w] = nxt.get((ch,) + w, 0.0) + v
                nxt[w + (ch,)] = nxt.get(w + (ch,), 0.0) - v
            acc = nxt
        for w, v in acc.items():
            if len(w) <= r:
                out.parts[len(w)][w] += c * v
    return out


def tensor_exp(x):
    out = TruncatedTensor(x.a, x.r)
    out.parts[0] = np.ones(())
    term = out
    for k in range(1, x.r + 1):
        term = (term * x).scale(1.0 / k)
        out = out + term
    return out


def tensor_log(y):
    u = TruncatedTensor(y.a, y.r, [np.zeros(())] + [p.copy() for p in y.parts[1:]])
    out = TruncatedTensor(y.a, y.r)
    power = u
    for k in range(1, y.r + 1):
        out = out + power.scale((-1) ** (k + 1) / k)
        power = power * u
    return out


# basis vectors of the catalog algebras as right-nested words in the generators
BASES = {
    "h1": (2, 2, [(0,), (1,), (0, 1)]),
    "engel": (2, 3, [(0,), (1,), (0, 1), (0, 0, 1)]),
    "filiform5": (2, 4, [(0,), (1,), (0, 1), (0, 0, 1), (0, 0, 0, 1)]),
    "free2_3": (3, 2, [(0,), (1,), (2,), (0, 1), (0, 2), (1, 2)]),
}


def tensor_product_oracle(group, g, h):
    """``g o h`` for the algebras of :data:`BASES`.

    Each listed basis element spans a one-dimensional multidegree component
    of the free nilpotent algebra modulo the defining ideal, and its
    right-nested word has coefficient 1 on its own letter sequence, so the
    coordinate is the coefficient of that word in ``log(exp g exp h)``.
    """
    a, r, basis = BASES[group]

    def lift(x):
        return lie_image(a, r, {w: float(c) for w, c in zip(basis, x)})

    z = tensor_log(tensor_exp(lift(g)) * tensor_exp(lift(h)))
    return np.array([z.word(w) for w in basis])


def h1_matrix(x):
    """Faithful 3x3 representation of the Heisenberg algebra."""
    return np.array([[0.0, x[0], x[2]], [0.0, 0.0, x[1]], [0.0, 0.0, 0.0]])


def h1_matrix_product(g, h):
    from scipy.linalg import expm, logm
    m = np.real(logm(expm(h1_matrix(g)) @ expm(h1_matrix(h))))
    return np.array([m[0, 1], m[1, 2], m[0, 2]])


def heisenberg_kernel(z, sigma, t, dps=30):
    """``2 (4 pi t)^-(m+2)/2 int_R (l/sinh l)^(m/2) exp(-|z|^2 l coth l / 4t) cos(sigma l/t) dl``."""
    import mpmath as mp
    mp.mp.dps = dps
    m = len(z)
    r2 = mp.mpf(sum(float(v) ** 2 for v in z))
    s, t = mp.mpf(sigma), mp.mpf(t)

    def f(l):
        if l == 0:
            return mp.exp(-r2 / (4 * t))
        return (l / mp.sinh(l)) ** (m // 2) * mp.exp(-r2 * l * mp.coth(l) / (4 * t)) * mp.cos(s * l / t)

    if s == 0:
        integral = 2 * mp.quad(f, [0, mp.inf])
    else:
        integral = 2 * mp.quadosc(f, [0, mp.inf], omega=abs(s) / t)
    return float(2 * integral / (4 * mp.pi * t) ** ((m + 2) / 2))


def gaussian_abs_moment(p, var):
    """``E|N(0, var)|^p``."""
    return (2 * var) ** (p / 2) * math.gamma((p + 1) / 2) / math.sqrt(math.pi)


def chi_moment(p, m, var):
    """``E|N(0, var I_m)|^p``."""
    return (2 * var) ** (p / 2) * math.gamma((m + p) / 2) / math.gamma(m / 2)

