"""Problem data for hub location instances.

An :class:`Instance` bundles routing costs ``c``, commodity demands ``w``,
setup costs ``F`` (hubs) and ``G`` (interhub edges), the cost factors
``alpha`` (interhub), ``gamma`` (access) and ``theta`` (distribution), the
allocation policy and the model kind.  Nodes are numbered ``0..n-1``.

Readers
-------
Canonical text format (authoritative)::

    n alpha gamma theta policy model
    <n lines of c>
    <n lines of w>
    <one line of F>
    [G]                  optional keyword line, then n lines
    [ell]                optional keyword line, then n lines

``policy`` is ``sa`` or ``ma``; ``model`` is ``h``, ``g`` or ``gfb``.  When
no ``G`` block is given the standard edge cost ``Wbar * c / n**2`` is used.

Raw CAB layout (assumed): first token ``N``, then the ``N x N`` demand block,
then the ``N x N`` cost block, all whitespace separated.

Raw AP layout (assumed): first token ``N``, then ``N`` lines of ``x y``
coordinates, then the ``N x N`` demand block.  Anything after that (the
collection/transfer/distribution factors and fixed costs in the public files)
is ignored.  Costs are Euclidean distances between coordinates times
``distance_scale``.
"""

from __future__ import annotations

import dataclasses
import enum
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Policy",
    "ModelKind",
    "SetupMode",
    "Instance",
    "DemandAggregates",
    "InstanceError",
    "ParseError",
    "DatasetBoundsError",
    "parse_cab",
    "parse_ap",
    "read_instance",
    "write_instance",
    "derive_setup_costs",
    "cut_demand",
    "cab10_text",
]


class InstanceError(ValueError):
    """Invalid instance data."""


class ParseError(InstanceError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {msg}")
        self.line = line
        self.col = col


class DatasetBoundsError(InstanceError):
    pass


class Policy(str, enum.Enum):
    SA = "sa"
    MA = "ma"


class ModelKind(str, enum.Enum):
    HMEDIAN = "h"
    GMEDIAN = "g"
    GFB = "gfb"


class SetupMode(str, enum.Enum):
    STANDARD = "standard"
    FLOW_BOUNDED = "flow_bounded"


@dataclass(frozen=True)
class DemandAggregates:
    O: np.ndarray
    D: np.ndarray
    Wbar: float


def _frozen(a, n: int, name: str, shape: tuple[int, ...]) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.shape != shape:
        raise InstanceError(f"{name} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise InstanceError(f"{name} has non-finite entries")
    if np.any(arr < 0):
        raise InstanceError(f"{name} has negative entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Instance:
    c: np.ndarray
    w: np.ndarray
    F: np.ndarray | None = None
    G: np.ndarray | None = None
    alpha: float = 0.5
    gamma: float = 1.0
    theta: float = 1.0
    policy: Policy = Policy.MA
    model: ModelKind = ModelKind.HMEDIAN
    ell: np.ndarray | None = None
    name: str = ""
    agg: DemandAggregates = field(init=False, repr=False)

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 1:
            raise InstanceError("c must be a non-empty square matrix")
        n = c.shape[0]
        sq = (n, n)
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("c", _frozen(c, n, "c", sq))
        w = np.array(self.w, dtype=float)
        if w.shape == sq:
            np.fill_diagonal(w, 0.0)
        set_("w", _frozen(w, n, "w", sq))
        set_("F", _frozen(np.zeros(n) if self.F is None else self.F, n, "F", (n,)))
        G = np.zeros(sq) if self.G is None else np.array(self.G, dtype=float)
        if G.shape == sq:
            np.fill_diagonal(G, 0.0)
        set_("G", _frozen(G, n, "G", sq))
        if not np.allclose(self.G, self.G.T, rtol=1e-12, atol=1e-9):
            raise InstanceError("G must be symmetric")
        if self.ell is not None:
            ell = np.array(self.ell, dtype=float)
            if ell.shape == sq:
                np.fill_diagonal(ell, 0.0)
            set_("ell", _frozen(ell, n, "ell", sq))
            if not np.allclose(self.ell, self.ell.T, rtol=1e-12, atol=1e-9):
                raise InstanceError("ell must be symmetric")
        set_("policy", Policy(self.policy))
        set_("model", ModelKind(self.model))
        if not 0.0 <= self.alpha <= 1.0:
            raise InstanceError("alpha must lie in [0, 1]")
        if not (self.gamma > self.alpha and self.theta > self.alpha):
            raise InstanceError("gamma and theta must exceed alpha")
        O = self.w.sum(axis=1)
        D = self.w.sum(axis=0)
        for a in (O, D):
            a.setflags(write=False)
        set_("agg", DemandAggregates(O=O, D=D, Wbar=float(self.w.sum())))

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @property
    def O(self) -> np.ndarray:
        return self.agg.O

    @property
    def D(self) -> np.ndarray:
        return self.agg.D

    @property
    def Wbar(self) -> float:
        return self.agg.Wbar

    @property
    def lower_edge(self) -> np.ndarray:
        """Lower coefficient of the interhub two-direction flow, per edge."""
        if self.model is ModelKind.GFB:
            return self.ell if self.ell is not None else np.zeros((self.n, self.n))
        return self.w + self.w.T

    @property
    def edge_costs(self) -> np.ndarray:
        """Edge setup costs as the objective sees them (zero for H-median)."""
        if self.model is ModelKind.HMEDIAN:
            return np.zeros((self.n, self.n))
        return self.G

    def replace(self, **changes) -> "Instance":
        return dataclasses.replace(self, **changes)

    def commodity_support_connected(self) -> bool:
        n = self.n
        if n == 1:
            return True
        adj = (self.w > 0) | (self.w.T > 0)
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in np.flatnonzero(adj[u]):
                if v not in seen:
                    seen.add(int(v))
                    stack.append(int(v))
        return len(seen) == n

    def require_connected(self) -> None:
        if not self.commodity_support_connected():
            raise InstanceError("commodity support graph is not connected")


# ---------------------------------------------------------------- tokenizing

_TOKEN = re.compile(r"\S+")


class _Tokens:
    def __init__(self, text: str):
        self._items: list[tuple[str, int, int]] = []
        for ln, line in enumerate(text.splitlines(), start=1):
            for m in _TOKEN.finditer(line):
                self._items.append((m.group(), ln, m.start() + 1))
        self._pos = 0

    def __len__(self) -> int:
        return len(self._items) - self._pos

    def peek(self) -> str | None:
        return self._items[self._pos][0] if self._pos < len(self._items) else None

    def word(self) -> tuple[str, int, int]:
        if self._pos >= len(self._items):
            last = self._items[-1] if self._items else ("", 1, 0)
            raise ParseError("unexpected end of data", last[1], last[2] + len(last[0]))
        tok = self._items[self._pos]
        self._pos += 1
        return tok

    def number(self) -> float:
        tok, ln, col = self.word()
        try:
            val = float(tok)
        except ValueError:
            raise ParseError(f"malformed number {tok!r}", ln, col) from None
        if not np.isfinite(val):
            raise ParseError(f"non-finite number {tok!r}", ln, col)
        if val < 0:
            raise ParseError(f"negative entry {tok!r}", ln, col)
        return val

    def integer(self) -> int:
        tok, ln, col = self.word()
        try:
            return int(tok)
        except ValueError:
            raise ParseError(f"expected an integer, got {tok!r}", ln, col) from None

    def block(self, rows: int, cols: int) -> np.ndarray:
        return np.array([[self.number() for _ in range(cols)] for _ in range(rows)])


def _check_n(n: int, size: int) -> None:
    if n < 1:
        raise DatasetBoundsError(f"n must be positive, got {n}")
    if n > size:
        raise DatasetBoundsError(f"n={n} exceeds dataset size {size}")


def parse_cab(
    text: str,
    n: int,
    alpha: float,
    gamma: float = 1.0,
    theta: float = 1.0,
    policy: Policy | str = Policy.MA,
    model: ModelKind | str = ModelKind.HMEDIAN,
) -> Instance:
    """Read a raw CAB table and keep the first ``n`` nodes.

    ``F`` and ``G`` come out as zero; see :func:`derive_setup_costs`.
    """
    tok = _Tokens(text)
    size = tok.integer()
    _check_n(n, size)
    w = tok.block(size, size)
    c = tok.block(size, size)
    return Instance(
        c=c[:n, :n], w=w[:n, :n], alpha=alpha, gamma=gamma, theta=theta,
        policy=policy, model=model, name=f"CAB{n}",
    )


def parse_ap(
    text: str,
    n: int,
    alpha: float,
    gamma: float = 1.0,
    theta: float = 1.0,
    policy: Policy | str = Policy.MA,
    model: ModelKind | str = ModelKind.HMEDIAN,
    distance_scale: float = 1.0,
) -> Instance:
    """Read raw AP node data and keep the first ``n`` nodes.

    Self-flows are dropped; demands stay asymmetric.
    """
    tok = _Tokens(text)
    size = tok.integer()
    _check_n(n, size)
    xy = tok.block(size, 2)
    w = tok.block(size, size)
    xy = xy[:n]
    c = np.sqrt(((xy[:, None, :] - xy[None, :, :]) ** 2).sum(axis=2)) * distance_scale
    return Instance(
        c=c, w=w[:n, :n], alpha=alpha, gamma=gamma, theta=theta,
        policy=policy, model=model, name=f"AP{n}",
    )


def read_instance(source: str | Path) -> Instance:
    """Read the canonical format from a path or from text."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        text = Path(source).read_text()
    else:
        text = source
    tok = _Tokens(text)
    n = tok.integer()
    if n < 1:
        raise DatasetBoundsError(f"n must be positive, got {n}")
    alpha, gamma, theta = (float(tok.word()[0]) for _ in range(3))
    pol, ln, col = tok.word()
    mod, ln2, col2 = tok.word()
    try:
        policy = Policy(pol.lower())
    except ValueError:
        raise ParseError(f"unknown policy {pol!r}", ln, col) from None
    try:
        model = ModelKind(mod.lower())
    except ValueError:
        raise ParseError(f"unknown model {mod!r}", ln2, col2) from None
    c = tok.block(n, n)
    w = tok.block(n, n)
    F = np.array([tok.number() for _ in range(n)])
    G = ell = None
    while len(tok):
        key, ln, col = tok.word()
        if key.lower() == "g":
            G = tok.block(n, n)
        elif key.lower() == "ell":
            ell = tok.block(n, n)
        else:
            raise ParseError(f"unexpected section {key!r}", ln, col)
    inst = Instance(c=c, w=w, F=F, G=G, alpha=alpha, gamma=gamma, theta=theta,
                    policy=policy, model=model, ell=ell)
    if G is None:
        inst = inst.replace(G=inst.Wbar * inst.c / n**2)
    return inst


def _fmt_row(vals: Iterable[float]) -> str:
    return " ".join(repr(float(v)) for v in vals)


def write_instance(inst: Instance) -> str:
    lines = [f"{inst.n} {inst.alpha!r} {inst.gamma!r} {inst.theta!r} "
             f"{inst.policy.value} {inst.model.value}"]
    lines += [_fmt_row(r) for r in inst.c]
    lines += [_fmt_row(r) for r in inst.w]
    lines.append(_fmt_row(inst.F))
    lines.append("G")
    lines += [_fmt_row(r) for r in inst.G]
    if inst.ell is not None:
        lines.append("ell")
        lines += [_fmt_row(r) for r in inst.ell]
    return "\n".join(lines) + "\n"


def _load_vector(source: Sequence[float] | np.ndarray | str | Path, n: int) -> np.ndarray:
    if isinstance(source, (str, Path)):
        tok = _Tokens(Path(source).read_text())
        vals = []
        while len(tok):
            vals.append(float(tok.word()[0]))
        arr = np.array(vals)
    else:
        arr = np.asarray(source, dtype=float)
    if arr.size < n:
        raise InstanceError(f"hub cost source has {arr.size} values, need {n}")
    arr = arr[:n]
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise InstanceError("hub setup costs must be finite and non-negative")
    return arr


def derive_setup_costs(
    inst: Instance,
    hub_costs: Sequence[float] | np.ndarray | str | Path | None = None,
    mode: SetupMode | str = SetupMode.STANDARD,
) -> Instance:
    """Attach hub costs and the standard edge costs ``Wbar * c_km / n**2``.

    In flow-bounded mode the hub costs are divided by 10 and
    ``ell_km = 25 (w_km + w_mk)``.
    """
    mode = SetupMode(mode)
    n = inst.n
    F = inst.F if hub_costs is None else _load_vector(hub_costs, n)
    G = inst.Wbar * inst.c / n**2
    changes = dict(F=F, G=G)
    if mode is SetupMode.FLOW_BOUNDED:
        changes["F"] = F / 10.0
        changes["ell"] = 25.0 * (inst.w + inst.w.T)
    return inst.replace(**changes)


def cut_demand(inst: Instance, S: Iterable[int]) -> float:
    """Demand with origin in ``S`` and destination outside it."""
    mask = np.zeros(inst.n, dtype=bool)
    idx = list(S)
    if idx and (min(idx) < 0 or max(idx) >= inst.n):
        raise InstanceError("node index out of range")
    mask[idx] = True
    if not mask.any() or mask.all():
        raise InstanceError("S must be a non-empty proper subset of the nodes")
    return float(inst.w[np.ix_(mask, ~mask)].sum())


def cab10_text() -> str:
    """The bundled 10-node CAB table (demand block, then cost block)."""
    return resources.files("hubsolve.data").joinpath("cab10.txt").read_text()
