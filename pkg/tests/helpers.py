"""Shared generators and brute-force oracles for the test suite."""
from __future__ import annotations

import math
from itertools import product

import numpy as np

from cshore.ddiagram import DecisionDiagram
from cshore.hamiltonian import Hamiltonian

LETTERS = "IXYZ"


def random_hamiltonian(rng, n, L, max_weight=None, offset=0.0, full_weight=False):
    """Distinct non-identity terms with N(0,1) coefficients."""
    max_weight = n if max_weight is None else max_weight
    seen = set()
    terms = []
    tries = 0
    while len(terms) < L and tries < 100 * L:
        tries += 1
        w = n if full_weight else int(rng.integers(1, max_weight + 1))
        qubits = rng.choice(n, size=w, replace=False)
        letters = ["I"] * n
        for q in qubits:
            letters[q] = "XYZ"[rng.integers(3)]
        s = "".join(letters)
        if s in seen:
            continue
        seen.add(s)
        terms.append((s, float(rng.normal())))
    return Hamiltonian.from_terms(terms, identity_offset=offset, n=n)


def random_diagram(rng, n, max_width=3, zero_weight_prob=0.0):
    """Random layered diagram; every node is reachable and has an out-edge."""
    widths = [1]
    for _ in range(n - 1):
        # a node has at most three children
        widths.append(int(rng.integers(1, min(max_width, 3 * widths[-1]) + 1)))
    widths.append(1)
    ids = []
    next_id = 1
    for k, w in enumerate(widths):
        if k == 0:
            ids.append([0])
        elif k == n:
            ids.append([-1])
        else:
            ids.append(list(range(next_id, next_id + w)))
            next_id += w
    edges = []
    for k in range(n):
        parents, children = ids[k], ids[k + 1]
        # guarantee each child one incoming edge, then add extras
        need = list(children)
        rng.shuffle(need)
        out = {u: {} for u in parents}
        for i, v in enumerate(need):
            u = parents[i % len(parents)] if i < len(parents) else parents[rng.integers(len(parents))]
            free = [c for c in "XYZ" if c not in out[u]]
            if not free:
                u = next(p for p in parents if len(out[p]) < 3)
                free = [c for c in "XYZ" if c not in out[u]]
            out[u][free[rng.integers(len(free))]] = v
        for u in parents:
            for c in "XYZ":
                if c not in out[u] and (not out[u] or rng.random() < 0.4):
                    out[u][c] = children[rng.integers(len(children))]
            labels = sorted(out[u])
            w = rng.dirichlet(np.ones(len(labels)))
            if len(labels) > 1 and rng.random() < zero_weight_prob:
                w[rng.integers(len(labels))] = 0.0
                w = w / w.sum()
            w[-1] = 1.0 - w[:-1].sum()
            for lab, wt in zip(labels, w):
                edges.append((u, out[u][lab], lab, float(max(wt, 0.0))))
    return DecisionDiagram.from_edges(n, edges)


def enumerate_paths(dd: DecisionDiagram):
    """Independent DFS over the serialized edge list: {basis string: probability}."""
    doc = dd.to_dict()
    adj = {}
    for e in doc["edges"]:
        adj.setdefault(e["src"], []).append((e["dst"], e["label"], e["weight"]))
    out = {}

    def walk(u, prefix, p):
        if u == -1:
            out[prefix] = out.get(prefix, 0.0) + p
            return
        for v, lab, w in adj[u]:
            walk(v, prefix + lab, p * w)

    walk(0, "", 1.0)
    return out


def covers_str(target: str, basis: str) -> bool:
    return all(t == "I" or t == b for t, b in zip(target, basis))


def brute_coverage(paths: dict, target: str) -> float:
    return sum(p for b, p in paths.items() if covers_str(target, b))


def all_basis_strings(n):
    return ["".join(b) for b in product("XYZ", repeat=n)]


def event_table(h, q, state):
    """All single-shot (basis, outcome) events: probabilities and per-target signs (0 if uncovered)."""
    from cshore.sampling import enumerate_pmf
    from cshore.statesim import outcome_distribution

    n = h.n
    bases, pmf = enumerate_pmf(q)
    probs, signs = [], []
    targets = [p.letters for p in h.paulis]
    for b, pb in zip(bases, pmf):
        if pb == 0:
            continue
        bs = "".join("IXYZ"[c] for c in b)
        dist = outcome_distribution(state, bs)
        for y in range(2 ** n):
            if dist[y] == 0:
                continue
            bits = [(y >> (n - 1 - j)) & 1 for j in range(n)]
            row = []
            for t in targets:
                if covers_str(t, bs):
                    row.append((-1) ** sum(bits[j] for j, c in enumerate(t) if c != "I"))
                else:
                    row.append(0)
            probs.append(pb * dist[y])
            signs.append(row)
    return np.array(probs), np.array(signs, dtype=float)


def exact_estimator_means(h, q, state, M):
    """Exact E[WMC] and E[MC(gamma=0)] per target over every length-M event sequence."""
    probs, signs = event_table(h, q, state)
    K = len(probs)
    grids = np.indices((K,) * M).reshape(M, -1)
    p_seq = np.prod(probs[grids], axis=0)
    s_sum = signs[grids].sum(axis=0)             # (K^M, L): m0 - m1
    hits = np.abs(signs)[grids].sum(axis=0)
    xi = q.coverage(h.target_codes())
    wmc = p_seq @ (s_sum / (M * xi))
    mc_vals = np.divide(s_sum, hits, out=np.zeros_like(s_sum), where=hits > 0)
    mc = p_seq @ mc_vals
    return wmc, mc, p_seq.sum()


# -- derandomization oracles ---------------------------------------------------

def conf(targets, bases, eps):
    return sum(math.exp(-eps ** 2 / 2 * sum(covers_str(t, b) for b in bases)) for t in targets)


def completion_pmf(q, prefix):
    """{full basis: Pr} for the current basis given its fixed prefix (independent oracle)."""
    n = q.n
    out = {}
    for rest in product("XYZ", repeat=n - len(prefix)):
        b = prefix + "".join(rest)
        if hasattr(q, "marginals"):
            p = float(np.prod([q.marginals[k, "XYZ".index(b[k])] for k in range(len(prefix), n)]))
        else:
            u, p = q.root, 1.0
            for k, c in enumerate(b):
                v = q.child[u, "IXYZ".index(c)]
                if v < 0:
                    p = 0.0
                    break
                if k >= len(prefix):
                    p *= q.weight[u, "IXYZ".index(c)]
                u = v
        if p > 0:
            out[b] = p
    return out


def expected_conf(targets, q, committed, prefix, M, eps, budget_free=False):
    """E[CONF] with the current basis completed from q and the remaining bases i.i.d. from q."""
    full = completion_pmf(q, "")
    cur = completion_pmf(q, prefix)
    remaining = 0 if budget_free else M - len(committed) - 1
    total = 0.0
    for b, pb in cur.items():
        for future in product(full.items(), repeat=remaining):
            pf = math.prod(p for _, p in future)
            total += pb * pf * conf(targets, committed + [b] + [f for f, _ in future], eps)
    return total
