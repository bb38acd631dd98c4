import itertools
import math

import numpy as np
import pytest

from hubsolve.driver import (NodeState, SolveConfig, Solver, Status, Variant, branch,
                             rounding_heuristic, select_branch_var, solve)
from hubsolve.instance import Instance, InstanceError, derive_setup_costs
from hubsolve.model import CutFamily, DesignSolution, VarIndex, build_model, evaluate
from hubsolve.separation import demand_violation
from hubsolve.subproblem import r_flow
from oracles import brute_force, random_instance, standin_hub_costs


def _explored(events) -> int:
    return len({e.split()[0] for e in events if not e.endswith("prune-queued")})


@pytest.mark.parametrize("seed", range(4))
def test_cheapest_route_closed_form(seed):
    """Free hubs and edges: each commodity takes its cheapest route with one interhub arc at most."""
    r = np.random.default_rng(seed)
    pts = r.uniform(0, 10, size=(3, 2))
    c = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    w = np.zeros((3, 3))
    w[0, 1] = 1.0
    w[1, 2] = 2.0            # keeps the commodity graph connected
    inst = Instance(c=c, w=w, alpha=0.4, gamma=1.3, theta=1.1)

    def leg(a, b, f):
        return 0.0 if a == b else f * c[a, b]

    def best(o, d):
        return min(leg(o, k, inst.gamma) + inst.alpha * c[k, m] + leg(m, d, inst.theta)
                   for k in range(3) for m in range(3))

    rep = solve(inst)
    assert rep.status is Status.OPTIMAL
    assert rep.value == pytest.approx(best(0, 1) + 2.0 * best(1, 2), rel=1e-9)


def test_single_commodity_with_isolated_node_rejected():
    c = np.ones((3, 3)) - np.eye(3)
    w = np.zeros((3, 3))
    w[0, 1] = 1.0
    with pytest.raises(InstanceError):
        solve(Instance(c=c, w=w))


@pytest.mark.parametrize("policy", ["ma", "sa"])
def test_variants_agree(rng, policy):
    inst = random_instance(rng, 5, policy, "h")
    vals = [solve(inst, SolveConfig(variant=v)).value for v in Variant]
    ref = brute_force(inst).value
    assert vals == pytest.approx([ref] * 3, rel=1e-6)


def test_depth_first_matches_best_bound(rng):
    inst = random_instance(rng, 5, "ma", "g")
    a = solve(inst, SolveConfig(node_rule="depth-first"))
    b = solve(inst)
    assert a.value == pytest.approx(b.value, rel=1e-9)


def test_config_checks(rng):
    inst = random_instance(rng, 4, "ma", "g")
    with pytest.raises(ValueError):
        solve(inst, SolveConfig(variant="bso"))
    with pytest.raises(ValueError):
        SolveConfig(rounding_threshold=0.0)
    with pytest.raises(ValueError):
        SolveConfig(node_rule="random")
    with pytest.raises(ValueError):
        SolveConfig(time_limit=0)


def _frac_point(vi: VarIndex, z, y=None):
    x = np.zeros(vi.size)
    x[vi.z0:vi.z0 + len(z)] = z
    for (k, m), v in (y or {}).items():
        x[vi.y(k, m)] = v
    return x


def test_branch_priority_z_first(cab10):
    m = build_model(cab10)
    z = np.zeros(10)
    z[0], z[1] = 0.5, 0.9
    col = select_branch_var(m, _frac_point(m.vi, z, {(0, 1): 0.5}))
    assert col == m.vi.z(0)


def test_branch_on_edge_when_hubs_integral(cab10):
    m = build_model(cab10)
    z = np.zeros(10)
    z[:2] = 1
    col = select_branch_var(m, _frac_point(m.vi, z, {(0, 1): 0.4, (2, 3): 0.1}))
    assert col == m.vi.y(0, 1)
    assert m.vi.name(col) == "y_0_1"


def test_branch_ties_take_lowest_index(cab10):
    m = build_model(cab10)
    z = np.zeros(10)
    z[3] = z[7] = 0.5
    assert select_branch_var(m, _frac_point(m.vi, z)) == m.vi.z(3)
    assert select_branch_var(m, _frac_point(m.vi, np.ones(10))) is None


def test_branch_children():
    ids = itertools.count(5)
    parent = NodeState(2, 0, 10.0, 1, ((4, 1),))
    a, b = branch(parent, 7, 11.0, lambda: next(ids))
    assert (a.id, b.id) == (5, 6)
    assert a.fixes == ((4, 1), (7, 0)) and b.fixes == ((4, 1), (7, 1))
    assert a.depth == b.depth == 2 and a.bound == 11.0 and a.parent == 2
    assert b.overrides() == {4: 1.0, 7: 1.0}
    with pytest.raises(RuntimeError):
        branch(parent, None, 0.0, lambda: 0)


def test_rounding_integral_is_identity(cab10, ex1_s1):
    out = rounding_heuristic(cab10, ex1_s1)
    assert out is not None
    s, f = out
    assert s.same_as(ex1_s1)
    assert np.allclose(f.t, r_flow(cab10, ex1_s1).flow.t)


def test_rounding_repairs_weak_rows(cab10):
    s = DesignSolution.full_star(10, [3, 4])
    frac = DesignSolution(s.z.copy(), s.y.copy(), s.x1 * 0.7, s.x2 * 0.7)
    frac.x1[0] = 0.0
    frac.x1[0, 3], frac.x1[0, 4] = 0.3, 0.2
    out = rounding_heuristic(cab10, frac, 0.6)
    assert out is not None
    assert out[0].x1[0, 3] == 1.0 and out[0].x1[0, 4] == 0.0


def test_rounding_rejects_illegal_design(cab10):
    s = DesignSolution.full_star(10, [3])
    frac = DesignSolution(s.z.copy(), s.y.copy(), s.x1.copy(), s.x2.copy())
    frac.x1[0, 5] = 0.9        # head 5 is not a hub
    assert rounding_heuristic(cab10, frac, 0.6) is None


@pytest.mark.parametrize("policy,model", [("ma", "h"), ("sa", "g"), ("ma", "g")])
def test_event_log_and_bookkeeping(rng, policy, model):
    inst = random_instance(rng, 5, policy, model)
    rep = solve(inst)
    assert rep.status is Status.OPTIMAL
    assert rep.nodes == _explored(rep.events)
    for e in rep.events:
        nid, parent, lp, action = e.split(" ", 3)
        assert action.split()[0] in {"branch", "integer", "integer-stale", "prune-bound",
                                     "prune-infeasible", "prune-queued"}
    # every processed design is distinct and each integer node pooled one nogood
    keys = {tuple(np.concatenate([d.z, d.y.ravel(), d.x1.ravel(), d.x2.ravel()]))
            for d in rep.processed}
    assert len(keys) == len(rep.processed)
    integer = sum(e.endswith(" integer") for e in rep.events)
    assert rep.cuts[CutFamily.NOGOOD.value] == integer
    vi = VarIndex(5)
    nogoods = [c for c in rep.cut_log if c.family is CutFamily.NOGOOD]
    for d in rep.processed:
        x = vi.pack(d, None)
        assert any(c.violation(x) > 0.5 for c in nogoods)


def test_anytime_bounds_monotone(rng):
    inst = random_instance(rng, 6, "ma", "g")
    rep = solve(inst)
    lbs = [lb for _, lb, _ in rep.trace]
    ubs = [ub for _, _, ub in rep.trace]
    assert all(a <= b + 1e-9 for a, b in zip(lbs, lbs[1:]))
    assert all(a >= b - 1e-9 for a, b in zip(ubs, ubs[1:]))
    assert all(lb <= ub + 1e-6 * max(1.0, abs(ub)) for lb, ub in zip(lbs, ubs))
    assert rep.lower_bound <= rep.value
    assert rep.gap <= 1e-4


def test_incumbent_is_routable_and_consistent(rng):
    for policy in ("ma", "sa"):
        inst = random_instance(rng, 6, policy, "g")
        rep = solve(inst)
        s, f = rep.incumbent.design, rep.incumbent.flow
        assert evaluate(inst, s, f) == pytest.approx(rep.value)
        for q in range(1, 6):
            for S in itertools.combinations(range(6), q):
                assert demand_violation(inst, f, S) <= 1e-6
        assert not build_model(inst).check(s, f)


def test_time_limit_reports_bounds(cab10):
    inst = derive_setup_costs(cab10, standin_hub_costs(cab10))
    rep = solve(inst, SolveConfig(time_limit=1e-9))
    assert rep.status is Status.TIME_LIMIT
    assert rep.lower_bound <= rep.value
    assert math.isnan(rep.gap) is False


def test_root_loop_separates_example_flow(cab10):
    inst = derive_setup_costs(cab10, standin_hub_costs(cab10))
    solver = Solver(inst, SolveConfig(), model=build_model(inst, seed=False))
    out, lb = solver.process_root()
    assert lb is not None
    assert solver.m.cut_counts()[CutFamily.DEMAND.value] >= 1


def test_root_without_violations_finishes_in_one_round():
    # with two nodes the seeded singleton rows already cover every subset
    c = np.array([[0.0, 3.0], [3.0, 0.0]])
    inst = Instance(c=c, w=np.array([[0.0, 2.0], [1.0, 0.0]]), F=np.array([1.0, 4.0]))
    solver = Solver(inst)
    out, lb = solver.process_root()
    assert lb == pytest.approx(out.objective)
    assert sum(solver.m.cut_counts().values()) == 0
    rep = solver.run()
    assert rep.value == pytest.approx(brute_force(inst).value)
