"""Layered decision diagrams as query distributions over measurement bases.

Node 0 is the root (layer 0) and the terminal sits at layer ``n``; in the
serialized form the terminal has id -1. An edge leaving a node in layer
``k`` fixes the letter of qubit ``k`` (0-based). Every node has at most one
outgoing edge per letter, so a basis prefix identifies a unique node.
"""
from __future__ import annotations

import json
import math
from collections import defaultdict

import numpy as np

from .pauli import LETTERS, CODE, PauliString, as_pauli
from .sampling import BASIS_LETTERS, QueryDistribution


class DiagramError(ValueError):
    pass


def _compat(letter: int, col: np.ndarray) -> np.ndarray:
    """Targets whose letter in ``col`` is I or ``letter``."""
    return (col == 0) | (col == letter)


class DecisionDiagram(QueryDistribution):
    can_evaluate_pmf = True
    can_evaluate_coverage = True
    name = "DD"

    def __init__(self, n: int, layer, edges):
        """``layer[v]`` per node index; ``edges`` as (src, dst, letter_code, weight).

        Index 0 must be the root and index ``len(layer) - 1`` the terminal.
        """
        self.n = int(n)
        self.layer = np.asarray(layer, dtype=np.intp)
        V = len(self.layer)
        if V < 2:
            raise DiagramError("diagram needs at least a root and a terminal")
        self.root, self.terminal = 0, V - 1
        if self.layer[0] != 0 or self.layer[-1] != self.n:
            raise DiagramError("root must be at layer 0 and terminal at layer n")
        edges = sorted(((int(u), int(v), int(c), float(w)) for u, v, c, w in edges),
                       key=lambda e: (self.layer[e[0]], e[0], e[2]))
        self.child = np.full((V, 4), -1, dtype=np.intp)
        self.weight = np.zeros((V, 4))
        for u, v, c, w in edges:
            if c not in BASIS_LETTERS:
                raise DiagramError(f"edge label must be X, Y or Z, got code {c}")
            if self.child[u, c] != -1:
                raise DiagramError(f"node {u} has two edges labeled {LETTERS[c]}")
            if self.layer[v] != self.layer[u] + 1:
                raise DiagramError(f"edge {u}->{v} skips layers")
            if not 0.0 <= w <= 1.0:
                raise DiagramError(f"edge weight {w} outside [0, 1]")
            self.child[u, c] = v
            self.weight[u, c] = w
        self.edges = edges
        for u in range(V - 1):
            out = self.child[u, 1:] >= 0
            if not out.any():
                raise DiagramError(f"node {u} at layer {self.layer[u]} has no outgoing edge")
            if abs(self.weight[u, 1:].sum() - 1.0) > 1e-12:
                raise DiagramError(f"outgoing weights of node {u} do not sum to 1")
        self._order = np.argsort(self.layer, kind="stable")
        self._back_cache: dict = {}
        self._cum = None

    # -- construction helpers ----------------------------------------------
    @classmethod
    def from_edges(cls, n: int, edges) -> "DecisionDiagram":
        """Build from ``(src_id, dst_id, label, weight)`` with root id 0 and terminal id -1."""
        layer_of = {0: 0}
        pending = list(edges)
        adj = defaultdict(list)
        for u, v, lab, w in pending:
            adj[u].append(v)
        frontier = [0]
        while frontier:
            nxt = []
            for u in frontier:
                for v in adj[u]:
                    lv = layer_of[u] + 1
                    if v in layer_of and layer_of[v] != lv:
                        raise DiagramError(f"node {v} reachable at two different layers")
                    if v not in layer_of:
                        layer_of[v] = lv
                        nxt.append(v)
            frontier = nxt
        if -1 not in layer_of:
            raise DiagramError("terminal -1 not reachable from the root")
        ids = sorted((i for i in layer_of if i not in (0, -1)), key=lambda i: (layer_of[i], i))
        index = {0: 0, **{i: k + 1 for k, i in enumerate(ids)}, -1: len(ids) + 1}
        layer = [layer_of[i] for i in [0, *ids, -1]]
        out = []
        for u, v, lab, w in pending:
            if u not in index:
                raise DiagramError(f"node {u} is not reachable from the root")
            c = CODE[lab] if isinstance(lab, str) else int(lab)
            out.append((index[u], index[v], c, w))
        return cls(n, layer, out)

    def copy_with_weights(self, weight: np.ndarray) -> "DecisionDiagram":
        edges = [(u, v, c, float(weight[u, c])) for u, v, c, _ in self.edges]
        return DecisionDiagram(self.n, self.layer, edges)

    # -- statistics -----------------------------------------------------------
    @property
    def num_nodes(self) -> int:
        return len(self.layer)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def path_count(self) -> int:
        count = [0] * self.num_nodes
        count[self.terminal] = 1
        for u in self._order[::-1]:
            if u == self.terminal:
                continue
            count[u] = sum(count[v] for v in self.child[u, 1:] if v >= 0)
        return count[self.root]

    def paths(self):
        """Yield (codes tuple, probability) for every root-to-terminal path."""
        stack = [(self.root, (), 1.0)]
        while stack:
            u, prefix, p = stack.pop()
            if u == self.terminal:
                yield prefix, p
                continue
            for c in (3, 2, 1):
                v = self.child[u, c]
                if v >= 0:
                    stack.append((v, prefix + (c,), p * self.weight[u, c]))

    def node_at(self, prefix) -> int | None:
        u = self.root
        for c in prefix:
            u = int(self.child[u, int(c)])
            if u < 0:
                return None
        return u

    # -- sampling / pmf ----------------------------------------------------------
    def _cumulative(self):
        if self._cum is None:
            w = self.weight[:, 1:]
            cum = np.cumsum(w, axis=1)
            for u in range(self.num_nodes - 1):
                pos = np.nonzero(w[u] > 0)[0]
                last = pos[-1] if len(pos) else np.nonzero(self.child[u, 1:] >= 0)[0][-1]
                cum[u, last:] = 1.0
            self._cum = cum
        return self._cum

    def sample(self, rng, size):
        cum = self._cumulative()
        out = np.empty((size, self.n), dtype=np.uint8)
        cur = np.zeros(size, dtype=np.intp)
        for k in range(self.n):
            u = rng.random(size)
            letter = 1 + (u[:, None] >= cum[cur, :2]).sum(axis=1)
            out[:, k] = letter
            cur = self.child[cur, letter]
        return out

    def pmf(self, basis) -> float:
        codes = basis if isinstance(basis, (tuple, list, np.ndarray)) else as_pauli(basis).codes
        if len(codes) != self.n:
            return 0.0
        u, p = self.root, 1.0
        for c in codes:
            c = int(c)
            if c == 0 or self.child[u, c] < 0:
                return 0.0
            p *= self.weight[u, c]
            u = self.child[u, c]
        return float(p)

    # -- coverage -------------------------------------------------------------------
    def forward_table(self, tcodes: np.ndarray) -> np.ndarray:
        """mass[v, j]: probability of reaching v along a prefix compatible with target j."""
        t = np.asarray(tcodes, dtype=np.intp)
        mass = np.zeros((self.num_nodes, t.shape[0]))
        mass[self.root] = 1.0
        for u, v, c, w in self.edges:
            k = self.layer[u]
            mass[v] += mass[u] * (w * _compat(c, t[:, k]))
        return mass

    def backward_table(self, tcodes: np.ndarray) -> np.ndarray:
        """back[v, j]: Pr[target j's letters on layers >= layer(v) are covered | at v]."""
        t = np.asarray(tcodes, dtype=np.intp)
        key = t.tobytes() + bytes(str(t.shape), "ascii")
        hit = self._back_cache.get(key)
        if hit is not None:
            return hit
        back = np.zeros((self.num_nodes, t.shape[0]))
        back[self.terminal] = 1.0
        for u, v, c, w in reversed(self.edges):
            k = self.layer[u]
            back[u] += w * _compat(c, t[:, k]) * back[v]
        back.setflags(write=False)
        self._back_cache[key] = back
        return back

    def coverage(self, target_codes):
        t = np.asarray(target_codes, dtype=np.intp)
        if t.shape[0] == 0:
            return np.zeros(0)
        return self.forward_table(t)[self.terminal]

    def conditional_coverage(self, node: int, suffix, k: int | None = None) -> float:
        """Recursive Pr[suffix covered | walk currently at ``node``].

        ``suffix`` holds the target letters for qubits ``layer(node)`` .. n-1.
        """
        suffix = as_pauli(suffix).codes if isinstance(suffix, (str, PauliString)) else tuple(suffix)
        start = int(self.layer[node])
        if k is not None and k != start:
            raise DiagramError(f"node {node} lives in layer {start}, not {k}")
        if len(suffix) != self.n - start:
            raise DiagramError(f"suffix length {len(suffix)} does not match layers {start}..{self.n - 1}")
        memo: dict[int, float] = {}

        def rec(u: int) -> float:
            if u == self.terminal:
                return 1.0
            if u in memo:
                return memo[u]
            q = suffix[self.layer[u] - start]
            total = 0.0
            for c in BASIS_LETTERS:
                v = self.child[u, c]
                if v >= 0 and (q == 0 or q == c):
                    total += self.weight[u, c] * rec(v)
            memo[u] = total
            return total

        return rec(node)

    def coverable_sets(self, tcodes: np.ndarray) -> list[set[int]]:
        """C_v as sets of target indices, propagated layer by layer from the root."""
        t = np.asarray(tcodes, dtype=np.intp)
        nonid = {j for j in range(t.shape[0]) if np.any(t[j] != 0)}
        sets: list[set[int]] = [set() for _ in range(self.num_nodes)]
        sets[self.root] = set(nonid)
        for u, v, c, _ in self.edges:
            if v == self.terminal:
                continue
            k = self.layer[u]
            sets[v] |= {j for j in sets[u] if t[j, k] in (0, c)}
        sets[self.terminal] = set(nonid)
        return sets

    # -- derandomizer hooks ------------------------------------------------------------
    def root_cursor(self):
        return self.root

    def step_cursor(self, cursor, k, letter):
        v = int(self.child[cursor, letter])
        return None if v < 0 else v

    def candidate_letters(self, cursor, k):
        return tuple(c for c in BASIS_LETTERS if self.child[cursor, c] >= 0)

    def suffix_coverage(self, cursor, k, target_codes):
        return self.backward_table(target_codes)[cursor]

    # -- serialization ------------------------------------------------------------------
    def _ext_id(self, i: int) -> int:
        return -1 if i == self.terminal else int(i)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "nodes": [{"id": self._ext_id(i), "layer": int(l)} for i, l in enumerate(self.layer)],
            "edges": [{"src": self._ext_id(u), "dst": self._ext_id(v), "label": LETTERS[c], "weight": w}
                      for u, v, c, w in self.edges],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionDiagram":
        return cls.from_edges(int(d["n"]), [(e["src"], e["dst"], e["label"], float(e["weight"])) for e in d["edges"]])

    def to_dot(self) -> str:
        lines = ["digraph dd {", "  rankdir=TB;"]
        for i, l in enumerate(self.layer):
            lines.append(f'  n{i} [label="{self._ext_id(i)}"];')
        for u, v, c, w in self.edges:
            lines.append(f'  n{u} -> n{v} [label="{LETTERS[c]} {w:.3g}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


# -- construction from a Hamiltonian -----------------------------------------------------

def _coverable_in_subtree(children, node, k, n, tcodes, idx) -> np.ndarray:
    """Which of targets ``idx`` can have qubits k..n-1 covered below ``node``."""
    if k == n or len(idx) == 0:
        return np.ones(len(idx), dtype=bool)
    res = np.zeros(len(idx), dtype=bool)
    col = tcodes[idx, k]
    for c, v in children[node].items():
        m = _compat(c, col)
        if m.any():
            sub = np.nonzero(m)[0]
            ok = _coverable_in_subtree(children, v, k + 1, n, tcodes, idx[sub])
            res[sub[ok]] = True
    return res


def build(h) -> DecisionDiagram:
    """Greedy trie insertion of every target followed by suffix merging.

    Targets are routed heaviest first (by weight, then |coefficient|). On an
    identity letter the walk follows the existing edge whose subtree already
    covers the most still-unrouted targets; new edges are created only when
    nothing compatible exists. Uniform weights on every node's out-edges.
    """
    if h.L == 0:
        raise DiagramError("cannot build a diagram without non-identity terms")
    n = h.n
    tcodes = h.target_codes().astype(np.intp)
    absa = np.abs(h.coeffs)
    wts = (tcodes != 0).sum(axis=1)
    order = sorted(range(h.L), key=lambda j: (-wts[j], -absa[j], h.paulis[j].letters))

    children: list[dict[int, int]] = [dict()]
    layers = [0]
    remaining = np.ones(h.L, dtype=bool)

    for j in order:
        remaining[j] = False
        q = tcodes[j]
        u = 0
        # targets still to route whose prefix agrees with the walk so far
        cand = remaining.copy()
        for k in range(n):
            letter = int(q[k])
            if letter == 0:
                col = tcodes[:, k]
                if children[u]:
                    best, best_score = None, -1
                    for c in sorted(children[u]):
                        sel = np.nonzero(cand & _compat(c, col))[0]
                        score = int(_coverable_in_subtree(children, children[u][c], k + 1, n, tcodes, sel).sum())
                        if score > best_score:
                            best, best_score = c, score
                    letter = best
                else:
                    scores = [absa[cand & (col == c)].sum() for c in BASIS_LETTERS]
                    letter = BASIS_LETTERS[int(np.argmax(scores))]
            v = children[u].get(letter)
            if v is None:
                v = len(children)
                children.append(dict())
                layers.append(k + 1)
                children[u][letter] = v
            cand &= _compat(letter, tcodes[:, k])
            u = v

    # reduce: hash-cons nodes with identical outgoing maps, deepest layer first
    V = len(children)
    canon = list(range(V))
    TERMINAL = -1
    for v in range(V):
        if layers[v] == n:
            canon[v] = TERMINAL
    by_layer = defaultdict(list)
    for v in range(V):
        by_layer[layers[v]].append(v)
    for k in range(n - 1, 0, -1):
        table: dict[tuple, int] = {}
        for v in by_layer[k]:
            sig = tuple(sorted((c, canon[w]) for c, w in children[v].items()))
            canon[v] = table.setdefault(sig, v)

    kept = [v for v in range(V) if canon[v] == v and layers[v] < n]
    kept.sort(key=lambda v: (layers[v], v))
    index = {v: i for i, v in enumerate(kept)}
    index[TERMINAL] = len(kept)
    layer = [layers[v] for v in kept] + [n]
    edges = []
    for v in kept:
        out = children[v]
        w = 1.0 / len(out)
        for c, child in out.items():
            edges.append((index[v], index[canon[child]], c, w))
    return DecisionDiagram(n, layer, edges)


# -- weight optimization --------------------------------------------------------------------

class _CostModel:
    """Vectorized diagonal cost and its gradient with respect to edge weights."""

    def __init__(self, dd: DecisionDiagram, h):
        self.dd = dd
        t = h.target_codes().astype(np.intp)
        self.a2 = h.coeffs ** 2
        e = np.array([(u, v, c) for u, v, c, _ in dd.edges], dtype=np.intp).reshape(-1, 3)
        self.src, self.dst, self.lab = e[:, 0], e[:, 1], e[:, 2]
        k = dd.layer[self.src]
        # compat[e, j]: target j passes edge e
        self.compat = ((t[:, k] == 0) | (t[:, k] == self.lab[None, :])).T.astype(float)
        self.groups = [np.nonzero(k == layer)[0] for layer in range(dd.n)]

    def cost_grad(self, weight):
        dd, V, L = self.dd, self.dd.num_nodes, len(self.a2)
        w = weight[self.src, self.lab]
        fwd = np.zeros((V, L))
        fwd[dd.root] = 1.0
        for g in self.groups:
            np.add.at(fwd, self.dst[g], fwd[self.src[g]] * (w[g, None] * self.compat[g]))
        xi = fwd[dd.terminal]
        if np.any(xi <= 0):
            return math.inf, None
        cost = float(np.sum(self.a2 / xi))
        back = np.zeros((V, L))
        back[dd.terminal] = 1.0
        for g in reversed(self.groups):
            np.add.at(back, self.src[g], back[self.dst[g]] * (w[g, None] * self.compat[g]))
        per_edge = (fwd[self.src] * self.compat * back[self.dst]) @ (-self.a2 / xi ** 2)
        grad = np.zeros_like(weight)
        grad[self.src, self.lab] = per_edge
        return cost, grad


def dd_diagonal_cost(dd: DecisionDiagram, h) -> float:
    if h.L == 0:
        return 0.0
    return _CostModel(dd, h).cost_grad(dd.weight)[0]


def optimize_weights(dd: DecisionDiagram, h, max_iter: int = 5000, rtol: float = 1e-12) -> DecisionDiagram:
    """Local minimum of the diagonal cost over edge weights.

    Each node's outgoing weights are a softmax of free logits, minimized with
    L-BFGS using the gradient from a forward/backward sweep of the diagram.
    Never returns weights with a higher cost than the input.
    """
    from scipy.optimize import minimize

    present = dd.child >= 0
    present[:, 0] = False
    free = present.sum(axis=1) > 1
    if not free.any() or h.L == 0:
        return dd
    model = _CostModel(dd, h)
    start_cost, _ = model.cost_grad(dd.weight)
    if not math.isfinite(start_cost):
        return dd
    slots = np.nonzero(free[:, None] & present)
    base = dd.weight.copy()

    def weights_of(x):
        theta = np.full(base.shape, -np.inf)
        theta[slots] = x
        rows = np.unique(slots[0])
        z = theta[rows] - theta[rows].max(axis=1, keepdims=True)
        e = np.exp(z)
        w = base.copy()
        w[rows] = e / e.sum(axis=1, keepdims=True)
        return w

    def fun(x):
        w = weights_of(x)
        cost, grad = model.cost_grad(w)
        if grad is None:
            return 1e300, np.zeros_like(x)
        gtheta = w * (grad - (w * grad).sum(axis=1, keepdims=True))
        return cost / start_cost, gtheta[slots] / start_cost

    with np.errstate(divide="ignore"):
        x0 = np.log(np.maximum(dd.weight[slots], 1e-300))
    res = minimize(fun, x0, jac=True, method="L-BFGS-B",
                   options={"maxiter": max_iter, "ftol": rtol, "gtol": 1e-12, "maxcor": 20})
    w = weights_of(res.x)
    if model.cost_grad(w)[0] > start_cost:
        return dd
    return dd.copy_with_weights(w)
