import json
import random
from pathlib import Path

import pytest

from ptagcheck import grammar as gr

REPO = Path(__file__).resolve().parents[1]
GRAMMAR4 = REPO / "grammar4.json"
GRAMMAR2 = REPO / "grammar2.json"


@pytest.fixture(scope="session")
def grammar4():
    return gr.load_grammar(GRAMMAR4)


@pytest.fixture(scope="session")
def grammar2():
    return gr.load_grammar(GRAMMAR2)


@pytest.fixture(scope="session")
def corpus(grammar4, grammar2):
    return {"grammar4": grammar4, "grammar2": grammar2}


def minimal_document():
    return {
        "start": "S",
        "trees": [{"id": "t1", "type": "initial",
                   "root": {"label": "S", "children": [{"anchor": "a"}]}}],
        "phi": [],
    }


def parse(doc):
    return gr.parse_grammar(json.dumps(doc))


def random_proper_grammar(seed, max_trees=10, max_sites=20):
    """A random structurally sound, proper grammar (warnings allowed).

    Every tree is anchored, auxiliary trees get a matching foot, substitution
    sites only target root labels that some initial tree provides, and each
    site's probabilities are normalized to sum to one.
    """
    rng = random.Random(seed)
    labels = ["S", "A", "B", "C"]
    terminals = ["a", "b", "c", "d"]

    n_init = rng.randint(1, 3)
    n_aux = rng.randint(0, max_trees - n_init - 1)
    kinds = [("initial", "S")]
    kinds += [("initial", rng.choice(labels)) for _ in range(n_init - 1)]
    kinds += [("auxiliary", rng.choice(labels)) for _ in range(n_aux)]
    init_labels = sorted({root for kind, root in kinds if kind == "initial"})

    site_counter = [0]
    sites_left = [max_sites]

    def new_site():
        site_counter[0] += 1
        sites_left[0] -= 1
        return f"X{site_counter[0]}"

    def leaf_choices(aux_foot_done):
        choices = ["anchor", "epsilon"]
        if sites_left[0] > 0:
            choices += ["interior_site", "subst"]
        return choices

    trees = []
    for i, (kind, root_label) in enumerate(kinds):
        children = []
        n_children = rng.randint(1, 3)
        for _ in range(n_children):
            choice = rng.choice(leaf_choices(kind == "initial"))
            if choice == "anchor":
                children.append({"anchor": rng.choice(terminals)})
            elif choice == "epsilon":
                children.append({"epsilon": True})
            elif choice == "subst":
                children.append({"subst": rng.choice(init_labels),
                                 "site": new_site()})
            else:
                children.append({"label": rng.choice(labels), "site": new_site(),
                                 "children": [{"anchor": rng.choice(terminals)}]})
        children.append({"anchor": rng.choice(terminals)})  # lexicalization
        if kind == "auxiliary":
            children.insert(rng.randrange(len(children) + 1), {"foot": root_label})
        root = {"label": root_label, "children": children}
        if i == 0 or (sites_left[0] > 0 and rng.random() < 0.5):
            root["site"] = new_site()
        trees.append({"id": f"t{i + 1}", "type": kind, "root": root})

    g_bare = parse({"start": "S", "trees": trees, "phi": []})
    aux_by_label = {}
    init_by_label = {}
    for t in g_bare.trees:
        group = aux_by_label if t.kind == "auxiliary" else init_by_label
        group.setdefault(t.root.label, []).append(t.tree_id)

    phi = []
    for site in g_bare.site_ids:
        node = g_bare.site_node(site)
        if node.kind == gr.SUBSTITUTION:
            targets = init_by_label[node.label]
            weights = [rng.random() + 0.05 for _ in targets]
            total = sum(weights)
            for target, w in zip(targets, weights):
                phi.append({"site": site, "tree": target, "prob": w / total})
        else:
            targets = aux_by_label.get(node.label, [])
            targets = rng.sample(targets, rng.randint(0, len(targets)))
            weights = [rng.random() for _ in targets] + [rng.random() + 0.1]
            total = sum(weights)
            for target, w in zip(targets, weights[:-1]):
                phi.append({"site": site, "tree": target, "prob": w / total})
            phi.append({"site": site, "tree": None, "prob": weights[-1] / total})

    g = parse({"start": "S", "trees": trees, "phi": phi})
    errors = [d for d in gr.validate(g) if d.severity == gr.ERROR]
    assert not errors, (seed, errors)
    return g
