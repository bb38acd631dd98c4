"""Command-line benchmark harness.

Example::

    python3 -m hubsolve --dataset cab --n 10 --alpha 0.2 --alpha 0.8 \\
        --policy sa --policy ma --model h --variant bs --out runs.csv

Rows stream to the CSV in grid order (dataset, n, alpha, policy, model,
variant) however many workers are used.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .driver import SolveConfig, Status, Variant, solve
from .instance import (InstanceError, ModelKind, Policy, SetupMode, cab10_text, derive_setup_costs,
                       parse_ap, parse_cab, read_instance)

__all__ = ["RunSpec", "ReportRow", "expand_grid", "run_one", "emit_report", "parse_report",
           "build_parser", "run", "main"]

DEFAULT_TIME_LIMIT = 7200.0
ESPEJO_PRESET = dict(gamma=3.0, theta=2.0, alpha=0.75)

_STATUS_CODE = {Status.OPTIMAL: "OPT", Status.TIME_LIMIT: "TL", Status.INFEASIBLE: "INF"}


@dataclass(frozen=True)
class RunSpec:
    dataset: str                 # cab | ap | file
    n: int
    alpha: float
    gamma: float = 1.0
    theta: float = 1.0
    policy: str = "sa"
    model: str = "h"
    variant: str = "bs"
    time_limit: float = DEFAULT_TIME_LIMIT
    file: str | None = None
    hub_costs: str | None = None
    distance_scale: float = 1.0
    out: str | None = None

    @property
    def instance_id(self) -> str:
        base = Path(self.file).stem if self.dataset == "file" and self.file else self.dataset
        return f"{base}{self.n}-a{self.alpha:g}-{self.policy}-{self.model}"

    def load(self):
        if self.dataset == "file":
            inst = read_instance(Path(self.file))
            inst = inst.replace(alpha=self.alpha, gamma=self.gamma, theta=self.theta,
                                policy=Policy(self.policy), model=ModelKind(self.model))
            if inst.n != self.n:
                raise InstanceError(f"{self.file} has {inst.n} nodes, grid asks for {self.n}")
        else:
            text = cab10_text() if self.dataset == "cab" and self.file is None else \
                Path(self.file).read_text()
            reader = parse_cab if self.dataset == "cab" else parse_ap
            kw = {} if self.dataset == "cab" else {"distance_scale": self.distance_scale}
            inst = reader(text, self.n, self.alpha, self.gamma, self.theta,
                          policy=self.policy, model=self.model, **kw)
        mode = SetupMode.FLOW_BOUNDED if self.model == "gfb" else SetupMode.STANDARD
        if self.dataset != "file" or self.hub_costs is not None:
            inst = derive_setup_costs(inst, self.hub_costs, mode)
        elif mode is SetupMode.FLOW_BOUNDED and inst.ell is None:
            inst = inst.replace(ell=25.0 * (inst.w + inst.w.T))
        return inst.replace(name=self.instance_id)


def _q(x: float) -> float:
    """Round to the precision the CSV carries (five significant digits)."""
    if not math.isfinite(x):
        return x
    return float(f"{x:.4e}")


def _q2(x: float) -> float:
    return float(f"{x:.2f}")


@dataclass(frozen=True)
class ReportRow:
    instance: str
    variant: str
    status: str
    cpu: float
    nodes: int
    gap: float
    ub: float
    lb: float
    root_lb: float
    root_cpu: float
    sp_share: float

    @classmethod
    def make(cls, instance: str, variant: str, status: str, cpu: float, nodes: int, gap: float,
             ub: float, lb: float, root_lb: float, root_cpu: float, sp_share: float) -> "ReportRow":
        """Quantized to the emitted precision, so that CSV round trips are exact."""
        return cls(instance, variant, status, _q2(cpu), int(nodes), _q2(gap) if math.isfinite(gap)
                   else gap, _q(ub), _q(lb), _q(root_lb), _q2(root_cpu), _q2(sp_share))


HEADER = ["instance", "variant", "status", "cpu_s", "exp", "gap_pct", "ub", "lb",
          "lb_root", "cpu_root_s", "cpu_sp_pct"]


def _fmt_sci(x: float) -> str:
    return "inf" if x == math.inf else "-inf" if x == -math.inf else f"{x:.4e}"


def _fmt_fix(x: float) -> str:
    return "inf" if x == math.inf else f"{x:.2f}"


def emit_report(rows: Iterable[ReportRow]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(HEADER)
    for r in rows:
        wr.writerow([r.instance, r.variant, r.status, _fmt_fix(r.cpu), r.nodes, _fmt_fix(r.gap),
                     _fmt_sci(r.ub), _fmt_sci(r.lb), _fmt_sci(r.root_lb), _fmt_fix(r.root_cpu),
                     _fmt_fix(r.sp_share)])
    return buf.getvalue()


def parse_report(text: str) -> list[ReportRow]:
    rd = csv.reader(io.StringIO(text))
    head = next(rd, None)
    if head != HEADER:
        raise ValueError("not a benchmark report (header mismatch)")
    out = []
    for rec in rd:
        if not rec:
            continue
        inst, var, status, cpu, nodes, gap, ub, lb, rlb, rcpu, sp = rec
        out.append(ReportRow(inst, var, status, float(cpu), int(nodes), float(gap), float(ub),
                             float(lb), float(rlb), float(rcpu), float(sp)))
    return out


def run_one(spec: RunSpec) -> tuple[ReportRow, list[str]]:
    inst = spec.load()
    rep = solve(inst, SolveConfig(variant=Variant(spec.variant), time_limit=spec.time_limit))
    row = ReportRow.make(spec.instance_id, spec.variant, _STATUS_CODE[rep.status], rep.total_time,
                         rep.nodes, rep.gap, rep.value, rep.lower_bound, rep.root_lb,
                         rep.root_time, rep.sp_share)
    return row, [f"{spec.instance_id} {spec.variant} {e}" for e in rep.events]


def expand_grid(base: dict, ns: Sequence[int], alphas: Sequence[float], policies: Sequence[str],
                models: Sequence[str], variants: Sequence[str]) -> list[RunSpec]:
    specs = []
    for n in ns:
        for a in alphas:
            for p in policies:
                for mk in models:
                    for v in variants:
                        if v == "bso" and mk != "h":
                            raise ValueError("variant bso needs model h")
                        specs.append(RunSpec(n=n, alpha=a, policy=p, model=mk, variant=v, **base))
    return specs


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _positive_float(s: str) -> float:
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hubsolve", description="Hub location benchmark runs.")
    p.add_argument("--dataset", choices=["cab", "ap", "file"], default="cab")
    p.add_argument("--file", help="raw CAB/AP table, or a canonical instance with --dataset file")
    p.add_argument("--n", type=_positive_int, action="append", help="node count (repeatable)")
    p.add_argument("--alpha", type=float, action="append", help="interhub factor (repeatable)")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--preset", choices=["espejo"], help="espejo: gamma=3, theta=2, alpha=0.75")
    p.add_argument("--policy", choices=["sa", "ma"], action="append")
    p.add_argument("--model", choices=["h", "g", "gfb"], action="append")
    p.add_argument("--variant", choices=["bs", "bsf", "bso"], action="append")
    p.add_argument("--time-limit", type=_positive_float, default=DEFAULT_TIME_LIMIT)
    p.add_argument("--hub-costs", help="file with one hub setup cost per node")
    p.add_argument("--distance-scale", type=_positive_float, default=1.0,
                   help="multiplier on AP Euclidean distances")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--log-events", help="write the per-node event log here")
    return p


def run(argv: Sequence[str] | None = None) -> int:
    p = build_parser()
    try:
        a = p.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    preset = ESPEJO_PRESET if a.preset == "espejo" else {}
    alphas = a.alpha or [preset.get("alpha", 0.2)]
    gamma = a.gamma if a.gamma is not None else preset.get("gamma", 1.0)
    theta = a.theta if a.theta is not None else preset.get("theta", 1.0)
    if a.dataset in ("ap", "file") and not a.file:
        p.print_usage(sys.stderr)
        print(f"hubsolve: error: --dataset {a.dataset} needs --file", file=sys.stderr)
        return 2
    for path in (a.file, a.hub_costs):
        if path and not Path(path).is_file():
            print(f"hubsolve: error: cannot read {path}", file=sys.stderr)
            return 2
    ns = a.n
    if not ns:
        if a.dataset == "file":
            try:
                ns = [read_instance(Path(a.file)).n]
            except (InstanceError, OSError) as e:
                print(f"hubsolve: error: {e}", file=sys.stderr)
                return 2
        else:
            ns = [10]
    base = dict(dataset=a.dataset, gamma=gamma, theta=theta, time_limit=a.time_limit,
                file=a.file, hub_costs=a.hub_costs, distance_scale=a.distance_scale, out=a.out)
    try:
        specs = expand_grid(base, ns, alphas, a.policy or ["sa"], a.model or ["h"],
                            a.variant or ["bs"])
        for s in specs:          # fail fast on bad data before any solve
            s.load()
    except (ValueError, OSError) as e:
        print(f"hubsolve: error: {e}", file=sys.stderr)
        return 2

    out = open(a.out, "w", newline="") if a.out else sys.stdout
    log = open(a.log_events, "w") if a.log_events else None
    try:
        out.write(",".join(HEADER) + "\n")
        out.flush()
        if a.workers > 1:
            with ProcessPoolExecutor(max_workers=a.workers) as pool:
                results = pool.map(run_one, specs)    # yields in grid order
                _stream(results, out, log)
        else:
            _stream(map(run_one, specs), out, log)
    finally:
        if a.out:
            out.close()
        if log:
            log.close()
    return 0


def _stream(results, out, log) -> None:
    for row, events in results:
        out.write(emit_report([row]).split("\n", 1)[1])
        out.flush()
        if log:
            log.write("\n".join(events) + "\n")


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
