"""Composite Gauss-Legendre rules on boxes."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = ["gauss_legendre_panels", "tensor_rule", "box_rule"]


@lru_cache(maxsize=64)
def _gl(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre_panels(a: float, b: float, n_panels: int, order: int):
    """Nodes and weights of ``n_panels`` equal Gauss-Legendre panels on ``[a, b]``.

    Nodes come out sorted, panel by panel.
    """
    if n_panels < 1 or order < 1:
        raise ValueError("need at least one panel and one node per panel")
    x, w = _gl(order)
    edges = np.linspace(a, b, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def tensor_rule(rules):
    """Tensor product of 1-D ``(nodes, weights)`` rules.

    Returns ``nodes`` of shape ``(M, d)`` and ``weights`` of shape ``(M,)``
    in C order (last axis fastest).
    """
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.prod(np.stack([w.ravel() for w in wgrids], axis=-1), axis=-1)
    return nodes, weights


def box_rule(lo, hi, n_panels, order):
    """Tensor Gauss-Legendre rule on the box ``prod [lo_k, hi_k]``.

    ``n_panels`` may be an int or a per-axis sequence.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    panels = np.broadcast_to(np.asarray(n_panels), lo.shape)
    return tensor_rule([gauss_legendre_panels(a, b, int(p), order)
                        for a, b, p in zip(lo, hi, panels)])
