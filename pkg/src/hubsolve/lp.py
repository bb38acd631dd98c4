"""Thin LP/MILP backend over ``scipy.optimize`` (HiGHS).

The problem form is::

    min c x   s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  lb <= x <= ub

Infeasible problems come with a Farkas ray taken from the duals of a
phase-one LP in which every row and every finite bound is elastic.

Set ``HUBSOLVE_LP_METHOD`` to ``highs`` (default), ``highs-ds`` or
``highs-ipm`` to pick the HiGHS algorithm.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

__all__ = [
    "LpStatus",
    "LpOutcome",
    "FarkasRay",
    "LpBackendError",
    "solve_lp",
    "farkas_ray",
    "solve_milp",
    "lp_method",
]

_METHODS = ("highs", "highs-ds", "highs-ipm")


class LpBackendError(RuntimeError):
    """The backend failed; distinct from a proven infeasibility."""


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class FarkasRay:
    """Multipliers proving infeasibility.

    ``ub >= 0``, ``eq`` free, ``lower >= 0``, ``upper >= 0`` with
    ``ub A_ub + eq A_eq - lower + upper = 0`` and
    ``ub b_ub + eq b_eq - lower lb + upper ub < 0``.
    """

    ub: np.ndarray
    eq: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    residual: float
    gap: float


@dataclass(frozen=True)
class LpOutcome:
    status: LpStatus
    x: np.ndarray | None = None
    objective: float | None = None
    duals_ub: np.ndarray | None = None
    duals_eq: np.ndarray | None = None
    farkas: FarkasRay | None = None


def lp_method() -> str:
    m = os.environ.get("HUBSOLVE_LP_METHOD", "highs").strip().lower()
    if m not in _METHODS:
        raise LpBackendError(f"unknown HUBSOLVE_LP_METHOD {m!r}; choose from {_METHODS}")
    return m


def _csr(A, ncols: int):
    if A is None:
        return sp.csr_matrix((0, ncols))
    return sp.csr_matrix(A)


def _vec(b, m: int) -> np.ndarray:
    return np.zeros(m) if b is None else np.asarray(b, dtype=float)


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, lb=None, ub=None,
             certificate: bool = True) -> LpOutcome:
    c = np.asarray(c, dtype=float)
    nv = c.size
    A_ub = _csr(A_ub, nv)
    A_eq = _csr(A_eq, nv)
    b_ub = _vec(b_ub, A_ub.shape[0])
    b_eq = _vec(b_eq, A_eq.shape[0])
    lb = np.zeros(nv) if lb is None else np.asarray(lb, dtype=float)
    ub = np.full(nv, np.inf) if ub is None else np.asarray(ub, dtype=float)

    if np.any(lb > ub + 1e-12):
        ray = farkas_ray(A_ub, b_ub, A_eq, b_eq, lb, ub) if certificate else None
        return LpOutcome(LpStatus.INFEASIBLE, farkas=ray)

    res = linprog(
        c,
        A_ub=A_ub if A_ub.shape[0] else None,
        b_ub=b_ub if A_ub.shape[0] else None,
        A_eq=A_eq if A_eq.shape[0] else None,
        b_eq=b_eq if A_eq.shape[0] else None,
        bounds=np.column_stack([lb, ub]),
        method=lp_method(),
    )
    if res.status == 0:
        du = res.ineqlin.marginals if A_ub.shape[0] else np.zeros(0)
        de = res.eqlin.marginals if A_eq.shape[0] else np.zeros(0)
        return LpOutcome(LpStatus.OPTIMAL, x=np.asarray(res.x), objective=float(res.fun),
                         duals_ub=np.asarray(du), duals_eq=np.asarray(de))
    if res.status == 2:
        ray = farkas_ray(A_ub, b_ub, A_eq, b_eq, lb, ub) if certificate else None
        return LpOutcome(LpStatus.INFEASIBLE, farkas=ray)
    if res.status == 3:
        return LpOutcome(LpStatus.UNBOUNDED)
    raise LpBackendError(f"LP backend failed (status {res.status}): {res.message}")


def farkas_ray(A_ub, b_ub, A_eq, b_eq, lb, ub, tol: float = 1e-9) -> FarkasRay:
    """Certificate of infeasibility via an elastic phase-one LP.

    Raises :class:`LpBackendError` when the system turns out feasible.
    """
    A_ub = sp.csr_matrix(A_ub)
    A_eq = sp.csr_matrix(A_eq)
    nv = max(A_ub.shape[1], A_eq.shape[1], len(lb))
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    fin_l = np.flatnonzero(np.isfinite(lb))
    fin_u = np.flatnonzero(np.isfinite(ub))
    I = sp.identity(nv, format="csr")
    # rows: A_ub x - s <= b_ub ; -x_l - s <= -lb ; x_u - s <= ub ; A_eq x + p - q = b_eq
    R = sp.vstack([A_ub, -I[fin_l], I[fin_u]], format="csr")
    rhs = np.concatenate([b_ub, -lb[fin_l], ub[fin_u]])
    m_r = R.shape[0]
    m_e = A_eq.shape[0]
    A1 = sp.hstack([R, -sp.identity(m_r), sp.csr_matrix((m_r, 2 * m_e))], format="csr")
    E1 = sp.hstack([A_eq, sp.csr_matrix((m_e, m_r)), sp.identity(m_e), -sp.identity(m_e)],
                   format="csr")
    cost = np.concatenate([np.zeros(nv), np.ones(m_r + 2 * m_e)])
    bounds = [(None, None)] * nv + [(0, None)] * (m_r + 2 * m_e)
    res = linprog(
        cost,
        A_ub=A1 if m_r else None, b_ub=rhs if m_r else None,
        A_eq=E1 if m_e else None, b_eq=b_eq if m_e else None,
        bounds=bounds, method=lp_method(),
    )
    if res.status != 0:
        raise LpBackendError(f"phase-one LP failed (status {res.status}): {res.message}")
    if res.fun <= tol:
        raise LpBackendError("phase-one LP is feasible; no Farkas ray exists")
    y_r = -np.asarray(res.ineqlin.marginals) if m_r else np.zeros(0)
    y_e = -np.asarray(res.eqlin.marginals) if m_e else np.zeros(0)
    y_r = np.maximum(y_r, 0.0)
    k = A_ub.shape[0]
    y_ub = y_r[:k]
    lower = np.zeros(nv)
    upper = np.zeros(nv)
    lower[fin_l] = y_r[k:k + fin_l.size]
    upper[fin_u] = y_r[k + fin_l.size:]
    combo = A_ub.T @ y_ub + A_eq.T @ y_e - lower + upper
    gap = float(y_ub @ b_ub + y_e @ b_eq - lower[fin_l] @ lb[fin_l] + upper[fin_u] @ ub[fin_u])
    return FarkasRay(ub=y_ub, eq=y_e, lower=lower, upper=upper,
                     residual=float(np.abs(combo).max(initial=0.0)), gap=gap)


def solve_milp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, lb=None, ub=None,
               integrality=None, time_limit: float | None = None) -> LpOutcome:
    c = np.asarray(c, dtype=float)
    nv = c.size
    cons = []
    if A_ub is not None and sp.csr_matrix(A_ub).shape[0]:
        cons.append(LinearConstraint(A_ub, -np.inf, b_ub))
    if A_eq is not None and sp.csr_matrix(A_eq).shape[0]:
        cons.append(LinearConstraint(A_eq, b_eq, b_eq))
    lb = np.zeros(nv) if lb is None else lb
    ub = np.full(nv, np.inf) if ub is None else ub
    opts = {} if time_limit is None else {"time_limit": time_limit}
    res = milp(c, constraints=cons, bounds=Bounds(lb, ub),
               integrality=integrality, options=opts)
    if res.status == 0:
        return LpOutcome(LpStatus.OPTIMAL, x=np.asarray(res.x), objective=float(res.fun))
    if res.status == 2:
        return LpOutcome(LpStatus.INFEASIBLE)
    if res.status == 3:
        return LpOutcome(LpStatus.UNBOUNDED)
    raise LpBackendError(f"MILP backend failed (status {res.status}): {res.message}")
