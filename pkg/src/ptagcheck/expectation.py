"""Expectation matrix construction.

M[i][j] is the expected number of site-j instances created when site i is
rewritten once.  It factors as M = P @ N where P holds the adjunction (and
substitution) probabilities per site and tree, and N is the 0/1 site-in-tree
incidence.  Rows and columns follow the canonical site order: tree
declaration order, preorder within each tree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SiteIndex:
    ids: tuple

    @classmethod
    def from_grammar(cls, g):
        return cls(tuple(g.site_ids))

    def __post_init__(self):
        object.__setattr__(self, "position", {s: i for i, s in enumerate(self.ids)})

    def __len__(self):
        return len(self.ids)

    def __getitem__(self, site_id):
        return self.position[site_id]


@dataclass
class PMatrix:
    """Sites x trees probability matrix; row sums are 1 - phi(site -> nil)."""

    values: np.ndarray
    site_index: SiteIndex
    tree_ids: tuple


@dataclass
class NMatrix:
    """Trees x sites incidence matrix; each site occurs in exactly one tree."""

    values: np.ndarray
    site_index: SiteIndex
    tree_ids: tuple


@dataclass
class ExpectationMatrix:
    values: np.ndarray
    site_index: SiteIndex


def build_P(g, idx=None):
    if idx is None:
        idx = SiteIndex.from_grammar(g)
    tree_ids = tuple(t.tree_id for t in g.trees)
    tree_pos = {tid: j for j, tid in enumerate(tree_ids)}
    values = np.zeros((len(idx), len(tree_ids)))
    for site in idx.ids:
        for entry in g.phi.entries_for(site):
            if entry.target is not None:
                values[idx[site], tree_pos[entry.target]] += entry.prob
    return PMatrix(values, idx, tree_ids)


def build_N(g, idx=None):
    if idx is None:
        idx = SiteIndex.from_grammar(g)
    tree_ids = tuple(t.tree_id for t in g.trees)
    values = np.zeros((len(tree_ids), len(idx)))
    for i, tree in enumerate(g.trees):
        for node in tree.sites:
            values[i, idx[node.site_id]] = 1.0
    return NMatrix(values, idx, tree_ids)


def build_M(g, idx=None):
    if idx is None:
        idx = SiteIndex.from_grammar(g)
    p = build_P(g, idx)
    n = build_N(g, idx)
    return ExpectationMatrix(p.values @ n.values, idx)


# ---------------------------------------------------------------------------
# emission

def matrix_tsv(values):
    """Rows newline-separated, entries tab-separated, 17 significant digits."""
    lines = ["\t".join(f"{x:.17g}" for x in row) for row in np.atleast_2d(values)]
    return "\n".join(lines) + "\n"


def matrix_json_doc(matrix):
    """JSON document form: {"order": row labels, "rows": [[...]]}.

    For the non-square P and N factors a "cols" key carries the column
    labels (tree ids for P, site ids for N).
    """
    if isinstance(matrix, ExpectationMatrix):
        doc = {"order": list(matrix.site_index.ids)}
    elif isinstance(matrix, PMatrix):
        doc = {"order": list(matrix.site_index.ids), "cols": list(matrix.tree_ids)}
    elif isinstance(matrix, NMatrix):
        doc = {"order": list(matrix.tree_ids), "cols": list(matrix.site_index.ids)}
    else:
        raise TypeError(f"not a matrix type: {matrix!r}")
    doc["rows"] = [list(map(float, row)) for row in matrix.values]
    return doc


def matrix_json(matrix, indent=2):
    return json.dumps(matrix_json_doc(matrix), indent=indent) + "\n"
