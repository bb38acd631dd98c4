"""Independent reference solvers and instance generators for the tests.

Nothing here goes through the tree search or the LP model; routing costs
are computed with a batched Floyd-Warshall on the hub backbone.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from hubsolve.instance import Instance, ModelKind, Policy
from hubsolve.model import DesignSolution
from hubsolve.subproblem import UnroutableDesign, flow_lp, r_flow

INF = np.inf


def random_instance(rng: np.random.Generator, n: int, policy="ma", model="h",
                    alpha=None, flow_bounded=False) -> Instance:
    """Euclidean costs, strictly positive demands, random setup costs."""
    pts = rng.uniform(0, 100, size=(n, 2))
    c = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    if flow_bounded:
        w = np.exp(rng.normal(2.0, 1.0, size=(n, n)))
    else:
        w = rng.uniform(1, 20, size=(n, n))
    np.fill_diagonal(w, 0)
    alpha = float(rng.choice([0.2, 0.5, 0.8])) if alpha is None else alpha
    W = w.sum()
    F = rng.uniform(0.2, 1.0, size=n) * W * c.mean() / n
    G = W * c / n ** 2 * rng.uniform(0.5, 1.5)
    G = (G + G.T) / 2
    ell = None
    if flow_bounded:
        F = F / 10
        ell = 25 * (w + w.T)
        model = "gfb"
    return Instance(c=c, w=w, F=F, G=G, alpha=alpha, policy=Policy(policy),
                    model=ModelKind(model), ell=ell)


def _backbone(inst: Instance, H: list[int], edge_sets: np.ndarray) -> np.ndarray:
    """Hub-to-hub shortest interhub costs for a batch of edge subsets.

    ``edge_sets`` is (B, h, h) boolean; returns (B, h, h).
    """
    a = inst.alpha * inst.c[np.ix_(H, H)]
    D = np.where(edge_sets, a[None], INF)
    h = len(H)
    idx = np.arange(h)
    D[:, idx, idx] = 0.0
    for k in range(h):
        D = np.minimum(D, D[:, :, k:k + 1] + D[:, k:k + 1, :])
    return D


def _ma_costs(inst: Instance, H: list[int], D: np.ndarray) -> np.ndarray:
    """Routing cost per backbone for full-star allocation, batched."""
    n = inst.n
    hub = np.zeros(n, dtype=bool)
    hub[H] = True
    A = np.full((n, len(H)), INF)       # first leg o -> k
    B = np.full((len(H), n), INF)       # last leg m -> d
    for a, k in enumerate(H):
        for o in range(n):
            if o == k:
                A[o, a] = 0.0
            elif not hub[o]:
                A[o, a] = inst.gamma * inst.c[o, k]
        for d in range(n):
            if d == k:
                B[a, d] = 0.0
            elif not hub[d]:
                B[a, d] = inst.theta * inst.c[k, d]
    # cost[b, o, d] = min_{k,m} A[o,k] + D[b,k,m] + B[m,d]
    t1 = np.min(A[None, :, :, None] + D[:, None, :, :], axis=2)          # (B, n, h)
    C = np.min(t1[:, :, :, None] + B[None, None, :, :], axis=2)          # (B, n, n)
    return C


def _sa_costs(inst: Instance, H: list[int], D: np.ndarray, alloc: dict[int, int]) -> np.ndarray:
    n = inst.n
    pos = {k: a for a, k in enumerate(H)}
    hubof = np.array([pos[alloc.get(i, i)] for i in range(n)])
    first = np.array([0.0 if i in pos else inst.gamma * inst.c[i, alloc[i]] for i in range(n)])
    last = np.array([0.0 if i in pos else inst.theta * inst.c[alloc[i], i] for i in range(n)])
    mid = D[:, hubof][:, :, hubof]
    return first[None, :, None] + mid + last[None, None, :]


@dataclass
class OracleResult:
    value: float
    hubs: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    alloc: dict[int, int] | None
    count: int


def _edge_batches(inst: Instance, H: list[int]):
    h = len(H)
    pairs = [(a, b) for a in range(h) for b in range(a + 1, h)]
    G = inst.edge_costs
    forced = [p for p in pairs if G[H[p[0]], H[p[1]]] <= 0]
    free = [p for p in pairs if G[H[p[0]], H[p[1]]] > 0]
    masks = np.array([list(b) for b in itertools.product([False, True], repeat=len(free))],
                     dtype=bool).reshape(2 ** len(free), len(free))
    E = np.zeros((masks.shape[0], h, h), dtype=bool)
    for a, b in forced:
        E[:, a, b] = E[:, b, a] = True
    setup = np.zeros(masks.shape[0])
    for q, (a, b) in enumerate(free):
        E[masks[:, q], a, b] = True
        E[masks[:, q], b, a] = True
        setup += masks[:, q] * G[H[a], H[b]]
    return E, setup, pairs


def brute_force(inst: Instance) -> OracleResult:
    """Minimum setup + routing cost over every design (shortest consistent paths)."""
    if inst.model is ModelKind.GFB:
        return brute_force_gfb(inst)
    n = inst.n
    w = inst.w
    best = OracleResult(INF, (), (), None, 0)
    count = 0
    for r in range(1, n + 1):
        for H in itertools.combinations(range(n), r):
            H = list(H)
            E, setup, _ = _edge_batches(inst, H)
            D = _backbone(inst, H, E)
            base = float(inst.F[H].sum())
            non = [i for i in range(n) if i not in H]
            if inst.policy is Policy.MA:
                allocs = [None]
            else:
                allocs = [dict(zip(non, ch)) for ch in itertools.product(H, repeat=len(non))]
            for al in allocs:
                C = _ma_costs(inst, H, D) if al is None else _sa_costs(inst, H, D, al)
                with np.errstate(invalid="ignore"):
                    rout = np.where(w[None] > 0, C * w[None], 0.0).sum(axis=(1, 2))
                tot = base + setup + rout
                count += tot.size
                b = int(np.argmin(tot))
                if tot[b] < best.value:
                    edges = tuple((H[i], H[j]) for i in range(len(H)) for j in range(i + 1, len(H))
                                  if E[b, i, j])
                    best = OracleResult(float(tot[b]), tuple(H), edges, al, 0)
    best.count = count
    return best


def _gfb_designs(inst: Instance):
    n = inst.n
    for r in range(1, n + 1):
        for H in itertools.combinations(range(n), r):
            H = list(H)
            non = [i for i in range(n) if i not in H]
            pairs = [(H[a], H[b]) for a in range(r) for b in range(a + 1, r)]
            if inst.policy is Policy.SA:
                alloc_iter = ([[(i, k)] for i, k in zip(non, ch)]
                              for ch in itertools.product(H, repeat=len(non)))
                for arcs in alloc_iter:
                    acc = [a for lst in arcs for a in lst]
                    for mask in itertools.product([0, 1], repeat=len(pairs)):
                        E = [p for p, b in zip(pairs, mask) if b]
                        yield DesignSolution.build(n, H, E, acc)
            else:
                subsets = [s for q in range(1, r + 1) for s in itertools.combinations(H, q)]
                for acc_ch in itertools.product(subsets, repeat=len(non)):
                    acc = [(i, k) for i, ks in zip(non, acc_ch) for k in ks]
                    for dis_ch in itertools.product(subsets, repeat=len(non)):
                        dis = [(k, i) for i, ks in zip(non, dis_ch) for k in ks]
                        for mask in itertools.product([0, 1], repeat=len(pairs)):
                            E = [p for p, b in zip(pairs, mask) if b]
                            yield DesignSolution.build(n, H, E, acc, dis)


def setup_cost(inst: Instance, s: DesignSolution) -> float:
    return float(inst.F @ s.z) + float(np.triu(inst.edge_costs * s.y, 1).sum())


def brute_force_gfb(inst: Instance) -> OracleResult:
    """Enumerate every design and route it with the lower-bounded flow LP."""
    best = OracleResult(INF, (), (), None, 0)
    count = 0
    hub_floor = {}
    for s in _gfb_designs(inst):
        count += 1
        base = setup_cost(inst, s)
        H = tuple(s.hubs())
        if H not in hub_floor:
            # unbounded routing over the full star and complete backbone is a floor
            h = len(H)
            E = np.ones((1, h, h), dtype=bool)
            C = _ma_costs(inst, list(H), _backbone(inst, list(H), E))[0]
            hub_floor[H] = float(np.where(inst.w > 0, C * inst.w, 0.0).sum())
        if base + hub_floor[H] >= best.value:
            continue
        try:
            floor = r_flow(inst, s).v_rout
        except UnroutableDesign:
            continue
        if base + floor >= best.value:
            continue
        out = flow_lp(inst, s)
        if out is None:
            continue
        v = base + out[1]
        if v < best.value:
            best = OracleResult(v, tuple(s.hubs()), tuple(s.edges()), None, 0)
    best.count = count
    return best


def all_designs(inst: Instance, limit_hubs: int | None = None):
    """Every legal integer design (small n only), for validity sweeps."""
    n = inst.n
    for r in range(1, n + 1):
        if limit_hubs is not None and r > limit_hubs:
            break
        for H in itertools.combinations(range(n), r):
            H = list(H)
            non = [i for i in range(n) if i not in H]
            pairs = [(H[a], H[b]) for a in range(r) for b in range(a + 1, r)]
            if inst.policy is Policy.SA:
                for ch in itertools.product(H, repeat=len(non)):
                    acc = list(zip(non, ch))
                    for mask in itertools.product([0, 1], repeat=len(pairs)):
                        yield DesignSolution.build(n, H, [p for p, b in zip(pairs, mask) if b], acc)
            else:
                for mask in itertools.product([0, 1], repeat=len(pairs)):
                    yield DesignSolution.full_star(n, H, [p for p, b in zip(pairs, mask) if b])


def brute_min_cut(cap: np.ndarray, s: int, t: int) -> float:
    n = cap.shape[0]
    best = INF
    others = [v for v in range(n) if v not in (s, t)]
    for bits in itertools.product([0, 1], repeat=len(others)):
        S = np.zeros(n, dtype=bool)
        S[s] = True
        S[others] = np.array(bits, dtype=bool) if others else []
        best = min(best, float(cap[np.ix_(S, ~S)].sum()))
    return best


def standin_hub_costs(inst: Instance) -> np.ndarray:
    """Hub costs for tables that ship without them: a tenth of the total demand
    times the node's mean distance to the others."""
    return 0.1 * inst.Wbar * inst.c.mean(axis=1)
