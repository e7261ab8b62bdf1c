"""Built-in Carnot groups and the JSON group-definition format.

Group files look like::

    {"name": "engel", "layers": [2, 1, 1],
     "brackets": [{"left": [1, 1], "right": [1, 2], "out": [{"basis": [2, 1], "coeff": "1"}]},
                  {"left": [1, 1], "right": [2, 1], "out": [{"basis": [3, 1], "coeff": "1"}]}]}

Basis labels are ``[layer, index]``, both 1-based.  Coefficients are exact
rationals written as strings (``"p/q"``) or integers.
"""

from __future__ import annotations

import itertools
import json
from fractions import Fraction
from pathlib import Path

from .algebra import StructureConstants

__all__ = [
    "CATALOG",
    "engel",
    "euclidean",
    "free_step2",
    "get_group",
    "group_from_dict",
    "group_to_dict",
    "heisenberg",
    "load_group",
]


def euclidean(n: int) -> StructureConstants:
    return StructureConstants.from_brackets((n,), {}, name=f"r{n}")


def heisenberg(n: int = 1) -> StructureConstants:
    """``H^n`` with ``[e_i, e_{n+i}] = e_{2n+1}``."""
    brackets = {((1, i), (1, n + i)): {(2, 1): 1} for i in range(1, n + 1)}
    return StructureConstants.from_brackets((2 * n, 1), brackets, name=f"h{n}")


def free_step2(m: int) -> StructureConstants:
    """Free step-two algebra on ``m`` generators, ``[e_i, e_j] = e_(ij)`` for ``i < j``."""
    pairs = list(itertools.combinations(range(1, m + 1), 2))
    brackets = {((1, i), (1, j)): {(2, k): 1} for k, (i, j) in enumerate(pairs, start=1)}
    return StructureConstants.from_brackets((m, len(pairs)), brackets, name=f"free2_{m}")


def engel() -> StructureConstants:
    """Engel algebra ``[e1, e2] = e3``, ``[e1, e3] = e4``."""
    brackets = {((1, 1), (1, 2)): {(2, 1): 1},
                ((1, 1), (2, 1)): {(3, 1): 1}}
    return StructureConstants.from_brackets((2, 1, 1), brackets, name="engel")


CATALOG = {
    "r1": lambda: euclidean(1),
    "r2": lambda: euclidean(2),
    "r3": lambda: euclidean(3),
    "h1": lambda: heisenberg(1),
    "h2": lambda: heisenberg(2),
    "free2_3": lambda: free_step2(3),
    "engel": engel,
}


def get_group(name_or_path) -> StructureConstants:
    """Catalog lookup by name, falling back to a JSON file path."""
    key = str(name_or_path)
    if key in CATALOG:
        return CATALOG[key]()
    path = Path(key)
    if path.suffix == ".json" or path.exists():
        return load_group(path)
    raise KeyError(f"unknown group {key!r}; catalog has {sorted(CATALOG)}")


def group_from_dict(doc: dict) -> StructureConstants:
    """Parse a group definition; raises ValueError on grading violations."""
    try:
        layers = [int(x) for x in doc["layers"]]
        raw = doc.get("brackets", [])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed group definition: {exc}") from exc
    brackets = {}
    for entry in raw:
        u, i = (int(x) for x in entry["left"])
        v, j = (int(x) for x in entry["right"])
        out = {}
        for term in entry["out"]:
            w, k = (int(x) for x in term["basis"])
            if w != u + v:
                raise ValueError(f"bracket [e({u},{i}), e({v},{j})] has a component in "
                                 f"layer {w}; grading requires layer {u + v}")
            if w > len(layers):
                raise ValueError(f"bracket lands in layer {w} beyond step {len(layers)}")
            out[(w, k)] = out.get((w, k), Fraction(0)) + Fraction(str(term["coeff"]))
        key = ((u, i), (v, j))
        if key in brackets:
            raise ValueError(f"duplicate bracket entry for {key}")
        brackets[key] = out
    return StructureConstants.from_brackets(layers, brackets, name=str(doc.get("name", "")))


def group_to_dict(sc: StructureConstants) -> dict:
    strat = sc.strat
    out = []
    for (a, b), terms in sorted(sc.entries.items()):
        out.append({
            "left": list(strat.label(a)),
            "right": list(strat.label(b)),
            "out": [{"basis": list(strat.label(c)), "coeff": str(q)} for c, q in terms],
        })
    return {"name": sc.name, "layers": list(strat.layer_dims), "brackets": out}


def load_group(path) -> StructureConstants:
    with open(path, encoding="utf-8") as fh:
        return group_from_dict(json.load(fh))
