"""Monte Carlo and exhaustive simulation of the derivation process.

A derivation unfolds level by level: the start tree sits at level 0, every
site of a level-i tree independently draws a phi target, and each non-nil
draw instantiates a tree at level i+1.  A derivation is complete once no
tree would be placed at level max_depth, i.e. it has died by that level;
otherwise it is censored (complete=False) with the undrawn frontier left
unexpanded.

These samplers and the exhaustive enumerator are independent of the
generating-function machinery, so they double as oracles for the
termination probabilities computed there.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import grammar as gr

RNG_ALGORITHM = "PCG64"
DEFAULT_MAX_NODES = 100_000
DEFAULT_FRONTIER_CAP = 10_000


class EnumerationBudgetExceeded(RuntimeError):
    """Exhaustive enumeration outgrew its node cap."""


@dataclass
class DerivationNode:
    """One instantiated elementary tree.

    ``children`` maps each site id of the tree to a DerivationNode or to
    None for a "no adjunction" choice; it is None as a whole while the node
    is an unexpanded frontier entry of a censored derivation.
    """

    tree_id: str
    at: str | None
    level: int
    children: dict | None = None

    def nodes(self):
        yield self
        for child in (self.children or {}).values():
            if child is not None:
                yield from child.nodes()


@dataclass
class Derivation:
    root: DerivationNode
    complete: bool
    probability: float

    def as_dict(self):
        return _derivation_doc(self.root)


def _derivation_doc(node):
    doc = {"tree": node.tree_id, "at": node.at}
    if node.children is None:
        doc["children"] = None
    else:
        doc["children"] = {
            site: "nil" if child is None else _derivation_doc(child)
            for site, child in node.children.items()}
    return doc


@dataclass
class SimulationStats:
    samples: int
    terminated: int
    censored: int
    termination_rate: float
    mean_depth: float
    mean_yield_length: float
    seed: int
    generator: str = RNG_ALGORITHM

    def as_dict(self):
        def finite(x):
            return None if math.isnan(x) else x
        return {"samples": self.samples, "terminated": self.terminated,
                "censored": self.censored,
                "termination_rate": self.termination_rate,
                "mean_depth": finite(self.mean_depth),
                "mean_yield_length": finite(self.mean_yield_length),
                "seed": self.seed, "generator": self.generator}


def _as_rng(seed):
    # a Generator, or anything with a random() method (scripted test doubles)
    if isinstance(seed, np.random.Generator) or callable(getattr(seed, "random", None)):
        return seed
    return np.random.default_rng(seed)


def _start_distribution(g, start_weights):
    trees = g.start_trees()
    if not trees:
        raise ValueError(f"no initial tree rooted in {g.start!r}")
    if start_weights is None:
        probs = np.full(len(trees), 1.0 / len(trees))
    else:
        weights = np.array([float(start_weights.get(t.tree_id, 0.0)) for t in trees])
        if weights.sum() <= 0.0:
            raise ValueError("start weights assign no mass to any start tree")
        probs = weights / weights.sum()
    return trees, probs


def _draw_index(rng, probs):
    u = rng.random()
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            return i
    return len(probs) - 1


def sample_derivation(g, seed=None, max_depth=64, max_nodes=DEFAULT_MAX_NODES,
                      start_weights=None):
    """Sample one derivation, breadth first, resolving whole levels in order.

    ``seed`` may be anything numpy's default_rng accepts, or a Generator
    (handy for scripted draws in tests).  The reported probability is the
    product of the phi draws made; the uniform start-tree choice is not a
    grammar parameter and is excluded.  Supercritical grammars grow
    exponentially, so on top of the depth cap a node budget censors runaway
    samples (complete=False, like a depth-capped one).
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    rng = _as_rng(seed)
    trees, start_probs = _start_distribution(g, start_weights)
    start = trees[_draw_index(rng, start_probs)]

    root = DerivationNode(start.tree_id, None, 0)
    probability = 1.0
    complete = True
    nodes = 1
    queue = deque([root])
    while queue:
        node = queue.popleft()
        if nodes >= max_nodes:
            complete = False
            break
        node.children = {}
        tree = g.tree(node.tree_id)
        for site_node in tree.sites:
            entries = g.phi.entries_for(site_node.site_id)
            u = rng.random()
            acc = 0.0
            chosen = entries[-1] if entries else None
            for entry in entries:
                acc += entry.prob
                if u < acc:
                    chosen = entry
                    break
            if chosen is None:
                # unfillable substitution site; cannot happen on validated input
                complete = False
                continue
            probability *= chosen.prob
            if chosen.target is None:
                node.children[site_node.site_id] = None
                continue
            child = DerivationNode(chosen.target, site_node.site_id, node.level + 1)
            nodes += 1
            node.children[site_node.site_id] = child
            if child.level < max_depth:
                queue.append(child)
            else:
                complete = False  # frontier tree at the depth cap
    return Derivation(root, complete, probability)


def derivation_depth(d):
    """Largest level of any instantiated tree, frontier included."""
    return max(node.level for node in d.root.nodes())


# ---------------------------------------------------------------------------
# derived trees

class _WorkNode:
    """Mutable node used during adjunction surgery."""

    __slots__ = ("kind", "label", "site_id", "children")

    def __init__(self, kind, label, site_id, children):
        self.kind = kind
        self.label = label
        self.site_id = site_id
        self.children = children

    def become(self, other):
        self.kind = other.kind
        self.label = other.label
        self.site_id = other.site_id
        self.children = other.children


def derived_tree(d, g):
    """Derived (parse) tree of a complete derivation.

    Adjoining a tree at a node excises the subtree under that node, places
    the adjoined tree at the node's position and reattaches the excised
    subtree at its foot; substitution replaces the substitution leaf with
    the initial tree's root.
    """
    if not d.complete:
        raise ValueError("cannot derive a tree from an incomplete derivation")
    root, _foot = _build_work(d.root, g)
    return _freeze(root, "")


def _copy_work(node, site_map):
    work = _WorkNode(node.kind, node.label, node.site_id,
                     [_copy_work(c, site_map) for c in node.children])
    if node.site_id is not None:
        site_map[node.site_id] = work
    return work


def _build_work(dnode, g):
    tree = g.tree(dnode.tree_id)
    site_map = {}
    root = _copy_work(tree.root, site_map)
    foot = _find_foot(root)
    for site_id, child in (dnode.children or {}).items():
        if child is None:
            continue
        child_root, child_foot = _build_work(child, g)
        site_node = site_map[site_id]
        if site_node.kind == gr.SUBSTITUTION:
            site_node.become(child_root)
        elif child_root is child_foot:
            continue  # single-node auxiliary tree: adjunction is the identity
        else:
            excised = _WorkNode(site_node.kind, site_node.label,
                                site_node.site_id, site_node.children)
            site_node.become(child_root)
            child_foot.become(excised)
    return root, foot


def _find_foot(work):
    if work.kind == gr.FOOT:
        return work
    for child in work.children:
        found = _find_foot(child)
        if found is not None:
            return found
    return None


def _freeze(work, address):
    children = tuple(
        _freeze(child, f"{address}.{i + 1}" if address else str(i + 1))
        for i, child in enumerate(work.children))
    return gr.TreeNode(work.kind, work.label, children, work.site_id, address)


def yield_string(t):
    """Left-to-right terminal yield; epsilon leaves are dropped.

    Rejects trees that still contain foot or substitution leaves.
    """
    out = []
    for node in t.preorder():
        if node.kind == gr.ANCHOR:
            out.append(node.label)
        elif node.kind in (gr.FOOT, gr.SUBSTITUTION):
            raise ValueError(
                f"unresolved {node.kind} leaf at address {node.address!r}")
    return out


def anchor_multiset(d, g):
    """Anchor labels of all instantiated trees; surgery must preserve these."""
    counts = {}
    for node in d.root.nodes():
        for anchor in g.tree(node.tree_id).anchors:
            counts[anchor] = counts.get(anchor, 0) + 1
    return counts


# ---------------------------------------------------------------------------
# exhaustive enumeration

def enumerate_derivations(g, max_depth, prob_floor=0.0, node_cap=1_000_000):
    """All complete derivations that die by level max_depth, exactly.

    Probabilities are exact products of the phi choices made; derivations
    whose probability falls below prob_floor are dropped (the default floor
    of zero keeps everything with positive probability).  The summed
    probabilities equal the death-by-level constant C_(max_depth).  Fails
    with EnumerationBudgetExceeded when more than node_cap partial
    expansions are generated.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    budget = [node_cap]
    memo = {}

    def expand(tree_id, at, level):
        key = (tree_id, level)
        if key in memo:
            return [(_reparent(node, at), prob) for node, prob in memo[key]]
        tree = g.tree(tree_id)
        combos = [({}, 1.0)]
        for site_node in tree.sites:
            site = site_node.site_id
            options = []
            for entry in g.phi.entries_for(site):
                if entry.prob <= 0.0:
                    continue
                if entry.target is None:
                    options.append((None, entry.prob))
                elif level + 1 < max_depth:
                    for sub, sub_prob in expand(entry.target, site, level + 1):
                        options.append((sub, entry.prob * sub_prob))
            extended = []
            for children, prob in combos:
                for choice, choice_prob in options:
                    total = prob * choice_prob
                    if total < prob_floor:
                        continue
                    extended.append((dict(children, **{site: choice}), total))
                    budget[0] -= 1
                    if budget[0] < 0:
                        raise EnumerationBudgetExceeded(
                            f"more than {node_cap} partial derivations")
            combos = extended
        out = [(DerivationNode(tree_id, at, level, children), prob)
               for children, prob in combos]
        memo[key] = [(node, prob) for node, prob in out]
        return out

    results = []
    for start in g.start_trees():
        for node, prob in expand(start.tree_id, None, 0):
            if prob >= prob_floor:
                results.append(Derivation(node, True, prob))
    return results


def _reparent(node, at):
    if node.at == at:
        return node
    return DerivationNode(node.tree_id, at, node.level, node.children)


# ---------------------------------------------------------------------------
# termination estimation

def estimate_termination(g, samples, max_depth, seed=0, start_weights=None,
                         frontier_cap=DEFAULT_FRONTIER_CAP):
    """Monte Carlo estimate of the termination (extinction) probability.

    Simulates the site-count process of all samples in lockstep: per level
    and site type, one vectorized multinomial resolves every pending
    instance, which is distributionally identical to sampling whole
    derivations one by one but stays fast for 10^6 samples.  A sample
    terminates when a level produces no trees; it is censored when it is
    still alive at max_depth or its pending-site count exceeds
    frontier_cap.  Past the cap the chance of ever dying out is below
    q_max^frontier_cap, vanishingly small, so the censoring bias is far
    under sampling noise.

    mean_depth and mean_yield_length are over terminated samples (NaN when
    none terminate).  Identical inputs give identical stats.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    trees, start_probs = _start_distribution(g, start_weights)
    site_ids = g.site_ids
    k = len(site_ids)
    site_pos = {s: i for i, s in enumerate(site_ids)}
    tree_ids = [t.tree_id for t in g.trees]
    tree_pos = {tid: i for i, tid in enumerate(tree_ids)}

    incidence = np.zeros((len(tree_ids), k), dtype=np.int64)
    anchors = np.zeros(len(tree_ids))
    for i, tree in enumerate(g.trees):
        anchors[i] = len(tree.anchors)
        for node in tree.sites:
            incidence[i, site_pos[node.site_id]] = 1

    # per site: target tree indices plus a trailing nil bucket
    site_targets = []
    site_pvals = []
    for site in site_ids:
        entries = g.phi.entries_for(site)
        targets = [tree_pos[e.target] for e in entries if e.target is not None]
        probs = [e.prob for e in entries if e.target is not None]
        nil = max(0.0, 1.0 - sum(probs))
        pvals = np.array(probs + [nil])
        site_targets.append(np.array(targets, dtype=np.int64))
        site_pvals.append(pvals / pvals.sum())

    start_choice = rng.choice(len(trees), size=samples, p=start_probs)
    start_tree_idx = np.array([tree_pos[t.tree_id] for t in trees])[start_choice]
    counts = incidence[start_tree_idx].copy()
    yields = anchors[start_tree_idx].copy()

    alive = counts.any(axis=1)
    depth = np.zeros(samples, dtype=np.int64)
    censored = np.zeros(samples, dtype=bool)
    terminated = ~alive

    for level in range(1, max_depth + 1):
        idx = np.flatnonzero(alive)
        if not idx.size:
            break
        new_counts = np.zeros((idx.size, k), dtype=np.int64)
        born_trees = np.zeros(idx.size, dtype=np.int64)
        born_anchors = np.zeros(idx.size)
        for j in range(k):
            pending = counts[idx, j]
            if not pending.any():
                continue
            draws = rng.multinomial(pending, site_pvals[j])
            tree_draws = draws[:, :-1]
            if site_targets[j].size:
                born_trees += tree_draws.sum(axis=1)
                new_counts += tree_draws @ incidence[site_targets[j]]
                born_anchors += tree_draws @ anchors[site_targets[j]]
        died = born_trees == 0
        depth[idx[died]] = level - 1
        terminated[idx[died]] = True
        alive[idx[died]] = False

        survivors = idx[~died]
        yields[survivors] += born_anchors[~died]
        counts[survivors] = new_counts[~died]
        if level == max_depth:
            censored[survivors] = True
            alive[survivors] = False
        else:
            exploded = survivors[counts[survivors].sum(axis=1) > frontier_cap]
            censored[exploded] = True
            alive[exploded] = False

    n_term = int(terminated.sum())
    n_cens = int(censored.sum())
    mean_depth = float(depth[terminated].mean()) if n_term else math.nan
    mean_yield = float(yields[terminated].mean()) if n_term else math.nan
    return SimulationStats(samples, n_term, n_cens, n_term / samples,
                           mean_depth, mean_yield, seed)
