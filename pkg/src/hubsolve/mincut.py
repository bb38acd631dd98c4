"""Max-flow / min-cut and Gusfield's Gomory-Hu tree on dense capacity matrices."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "CapacityGraph",
    "GomoryHuTree",
    "max_flow",
    "gomory_hu",
    "first_violated_cut",
]

CAP_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class CapacityGraph:
    cap: np.ndarray
    directed: bool = True

    def __post_init__(self):
        cap = np.array(self.cap, dtype=float)
        if cap.ndim != 2 or cap.shape[0] != cap.shape[1]:
            raise ValueError("capacity matrix must be square")
        if np.any(cap < 0):
            raise ValueError("capacities must be non-negative")
        cap[cap < CAP_EPS] = 0.0
        np.fill_diagonal(cap, 0.0)
        cap.setflags(write=False)
        object.__setattr__(self, "cap", cap)

    @property
    def n(self) -> int:
        return self.cap.shape[0]

    @classmethod
    def symmetrized(cls, cap: np.ndarray) -> "CapacityGraph":
        cap = np.asarray(cap, dtype=float)
        return cls(cap + cap.T, directed=False)

    def cut_value(self, S) -> float:
        mask = np.zeros(self.n, dtype=bool)
        mask[list(S)] = True
        return float(self.cap[np.ix_(mask, ~mask)].sum())


@dataclass(frozen=True)
class GomoryHuTree:
    parent: np.ndarray
    label: np.ndarray

    def path_min(self, u: int, v: int) -> float:
        """Minimum label on the tree path between u and v."""
        if u == v:
            return float("inf")
        depth = self._depth()
        best = float("inf")
        while u != v:
            if depth[u] < depth[v]:
                u, v = v, u
            best = min(best, float(self.label[u]))
            u = int(self.parent[u])
        return best

    def _depth(self) -> list[int]:
        n = len(self.parent)
        depth = [-1] * n
        depth[0] = 0

        def d(i: int) -> int:
            chain = []
            while depth[i] < 0:
                chain.append(i)
                i = int(self.parent[i])
            k = depth[i]
            for j in reversed(chain):
                k += 1
                depth[j] = k
            return depth[chain[0]] if chain else depth[i]

        for i in range(n):
            d(i)
        return depth

    def side(self, u: int) -> frozenset[int]:
        """Nodes in u's component after removing the tree edge (u, parent[u])."""
        n = len(self.parent)
        children = [[] for _ in range(n)]
        for i in range(1, n):
            children[int(self.parent[i])].append(i)
        out = {u}
        stack = [u]
        while stack:
            for ch in children[stack.pop()]:
                out.add(ch)
                stack.append(ch)
        return frozenset(out)


def max_flow(g: CapacityGraph, s: int, t: int) -> tuple[float, frozenset[int]]:
    """Edmonds-Karp.  Returns the flow value and the source side of a min cut."""
    if s == t:
        raise ValueError("source and sink must differ")
    n = g.n
    res = g.cap.copy()
    nbrs = [set(np.flatnonzero((g.cap[u] > 0) | (g.cap[:, u] > 0)).tolist()) for u in range(n)]
    value = 0.0
    while True:
        pred = [-1] * n
        pred[s] = s
        q = deque([s])
        while q and pred[t] < 0:
            u = q.popleft()
            for v in nbrs[u]:
                if pred[v] < 0 and res[u, v] > CAP_EPS:
                    pred[v] = u
                    q.append(v)
        if pred[t] < 0:
            break
        aug = float("inf")
        v = t
        while v != s:
            u = pred[v]
            aug = min(aug, res[u, v])
            v = u
        v = t
        while v != s:
            u = pred[v]
            res[u, v] -= aug
            res[v, u] += aug
            v = u
        value += aug
    side = frozenset(i for i in range(n) if pred[i] >= 0)
    return value, side


def _gusfield(g: CapacityGraph, on_cut: Callable[[frozenset[int]], bool] | None = None):
    if g.directed and not np.allclose(g.cap, g.cap.T, rtol=1e-12, atol=1e-12):
        raise ValueError("Gomory-Hu needs symmetric capacities; symmetrize first")
    n = g.n
    parent = np.zeros(n, dtype=int)
    label = np.zeros(n)
    for s in range(1, n):
        t = int(parent[s])
        val, X = max_flow(g, s, t)
        if on_cut is not None and on_cut(X):
            return None, X
        label[s] = val
        for i in range(n):
            if i != s and i in X and parent[i] == t:
                parent[i] = s
        if parent[t] in X and t != 0:
            parent[s] = parent[t]
            parent[t] = s
            label[s] = label[t]
            label[t] = val
    return GomoryHuTree(parent=parent, label=label), None


def _components(g: CapacityGraph) -> list[frozenset[int]]:
    adj = (g.cap > 0) | (g.cap.T > 0)
    seen = np.zeros(g.n, dtype=bool)
    out = []
    for r in range(g.n):
        if seen[r]:
            continue
        seen[r] = True
        comp, stack = [r], [r]
        while stack:
            for v in np.flatnonzero(adj[stack.pop()] & ~seen):
                seen[v] = True
                comp.append(int(v))
                stack.append(int(v))
        out.append(frozenset(comp))
    return out


def gomory_hu(g: CapacityGraph) -> GomoryHuTree:
    """Gusfield's construction with n-1 max-flow calls.

    Each tree edge (i, parent[i]) carries ``label[i]``; removing it splits
    the nodes into a minimum cut between its endpoints.
    """
    tree, _ = _gusfield(g)
    return tree


def first_violated_cut(
    g: CapacityGraph, violated: Callable[[frozenset[int]], bool]
) -> frozenset[int] | None:
    """Run Gusfield until a max-flow cut side (or its complement) passes ``violated``.

    Connected components of the support are the zero-value cuts of every
    cut tree; they are tried first, before any max-flow call.
    """
    everything = frozenset(range(g.n))
    comps = _components(g)
    if len(comps) > 1:
        for comp in comps:
            for cand in (comp, everything - comp):
                if violated(cand):
                    return cand

    def probe(X: frozenset[int]) -> bool:
        probe.hit = None
        for cand in (X, everything - X):
            if cand and len(cand) < g.n and violated(cand):
                probe.hit = cand
                return True
        return False

    probe.hit = None
    _, _ = _gusfield(g, probe)
    return probe.hit
