"""Command-line front end: solve instance files, generate them, run sweeps.

Exit codes: 0 success, 1 internal error, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Optional

import numpy as np

from .core import SetSystem, VectorSequence, prefix_disc_witness
from .dagkit import chain_length, dag_disc_solve, herdisc_lower_from_chain, prefix_family
from .graphs import Dag, GraphError, RootedTree
from .instances import (
    NoiseModel,
    find_embedded_binary_tree,
    gen_adversarial_binary_tree,
    gen_chain,
    gen_planted_hard_block,
    gen_smoothed,
    gen_stochastic_lary_tree,
    gen_uniform_sequence,
)
from .oracle import BudgetExceeded, OracleBudget, exact_comb_disc, exact_dag_disc, exact_prefix_disc, herdisc
from .rng import make_rng
from .smoothed import (
    BlockState,
    DefaultPrefixSolver,
    block_decomposition,
    calibrate_delta,
    smoothed_prefix_solve,
    solve_block_lp,
)
from .treesolve import tree_prefix_solve

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- instance files


@dataclass
class Instance:
    vectors: VectorSequence
    structure: dict[str, Any]
    meta: dict[str, Any] = field(default_factory=dict)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return (self.vectors == other.vectors and self.structure == other.structure
                and self.meta == other.meta)

    def to_json(self) -> str:
        doc: dict[str, Any] = {
            "d": self.vectors.dim,
            "norm_class": self.vectors.norm_class,
            "vectors": self.vectors.vectors.tolist(),
            "structure": self.structure,
        }
        if self.meta:
            doc["meta"] = self.meta
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Instance":
        try:
            doc = json.loads(text)
            vs = VectorSequence(np.array(doc["vectors"], dtype=float).reshape(-1, int(doc["d"])),
                                doc.get("norm_class", "unit_ball"))
            st = doc["structure"]
        except (KeyError, TypeError, ValueError) as e:
            raise UsageError(f"malformed instance file: {e}") from e
        inst = cls(vs, st, doc.get("meta", {}))
        inst.validate()
        return inst

    def validate(self) -> None:
        kind = self.structure.get("kind")
        T = self.vectors.count
        try:
            if kind == "path":
                return
            if kind == "tree":
                if len(self.structure["parent"]) != T:
                    raise UsageError("parent list length differs from vector count")
                self.tree()
            elif kind == "dag":
                self.dag()
            elif kind == "sets":
                self.sets()
            else:
                raise UsageError(f"unknown structure kind {kind!r}")
        except (GraphError, ValueError, KeyError, TypeError) as e:
            raise UsageError(f"invalid structure: {e}") from e

    def tree(self) -> RootedTree:
        if self.structure["kind"] == "path":
            return RootedTree.from_parent_list([None] + list(range(self.vectors.count - 1)))
        return RootedTree.from_parent_list(self.structure["parent"])

    def dag(self) -> Dag:
        kind = self.structure["kind"]
        if kind in ("path", "tree"):
            return Dag.from_tree(self.tree())
        edges = tuple((int(a), int(b)) for a, b in self.structure["edges"])
        return Dag(self.vectors.count, edges, int(self.structure.get("root", 0)))

    def sets(self) -> SetSystem:
        return SetSystem(self.vectors.count, tuple(tuple(s) for s in self.structure["sets"]))


def _tree_structure(t: RootedTree) -> dict[str, Any]:
    return {"kind": "tree", "parent": list(t.parent_list())}


def _dag_structure(g: Dag) -> dict[str, Any]:
    return {"kind": "dag", "root": g.root, "edges": [list(e) for e in g.edges]}


# ---------------------------------------------------------------- solve


def _jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, Fraction):
        return float(x)
    return x


def _report(rep) -> dict[str, Any]:
    return {
        "value": rep.value,
        "witness": rep.witness_index,
        "coloring": rep.coloring.signs.tolist(),
        "exact": rep.exact,
        "extra": rep.extra,
    }


def solve(inst: Instance, solver: str, args: argparse.Namespace) -> dict[str, Any]:
    budget = OracleBudget(max_nodes=args.budget_nodes) if args.budget_nodes else OracleBudget()
    kind = inst.structure["kind"]
    vs = inst.vectors
    if solver == "exact":
        if kind == "path":
            return _report(exact_prefix_disc(vs, budget))
        if kind == "sets":
            return _report(exact_comb_disc(inst.sets(), vs, budget))
        return _report(exact_dag_disc(inst.dag(), vs, budget))
    if solver == "tree":
        if kind not in ("path", "tree"):
            raise UsageError("the tree solver needs a path or tree instance")
        return _report(tree_prefix_solve(inst.tree(), vs, budget))
    if solver == "dag":
        if kind == "sets":
            raise UsageError("the dag solver needs a path, tree or dag instance")
        return _report(dag_disc_solve(inst.dag(), vs, budget))
    if solver == "smoothed":
        if kind != "path":
            raise UsageError("the smoothed solver needs a path instance")
        n = args.block_n or min(vs.count, 64)
        x, trace = smoothed_prefix_solve(vs, n, b=args.block_b, delta=args.delta,
                                         bits=args.bits, seed=args.seed)
        value, tau = prefix_disc_witness(vs, x)
        return {
            "value": value,
            "witness": tau,
            "coloring": x.signs.tolist(),
            "exact": False,
            "extra": {
                "delta_initial": trace.delta_initial,
                "delta_final": trace.delta_final,
                "degraded": trace.degraded,
                "reported_bound": trace.reported_bound,
                "blocks": [vars(b) for b in trace.blocks],
            },
        }
    raise UsageError(f"unknown solver {solver!r}")


# ---------------------------------------------------------------- gen


def generate(family: str, args: argparse.Namespace) -> Instance:
    seed = args.seed
    if family == "adv-tree":
        t, vs = gen_adversarial_binary_tree(args.h)
        return Instance(vs, _tree_structure(t), {"family": family, "h": args.h})
    if family == "stoch-tree":
        t, vs = gen_stochastic_lary_tree(args.l, args.h, seed)
        return Instance(vs, _tree_structure(t), {"family": family, "l": args.l, "h": args.h, "seed": seed})
    if family == "smoothed":
        base = gen_uniform_sequence(args.T, args.d, seed)
        base = VectorSequence(base.vectors * (1.0 - args.eps))
        vs = gen_smoothed(base, NoiseModel(args.noise, args.eps, seed))
        return Instance(vs, {"kind": "path"}, {"family": family, "eps": args.eps, "noise": args.noise, "seed": seed})
    if family == "chain":
        g = gen_chain(args.l)
        vs = gen_uniform_sequence(g.num_vertices, args.d, seed)
        return Instance(vs, _dag_structure(g), {"family": family, "l": args.l, "seed": seed})
    if family == "planted":
        hard = gen_uniform_sequence(args.T, args.d, seed, 1)
        pi = gen_planted_hard_block(hard, args.num_blocks, seed)
        return Instance(pi.sequence, {"kind": "path"}, {
            "family": family, "planted_block": pi.planted_block, "block_size": pi.block_size,
            "method": pi.method, "seed": seed,
        })
    raise UsageError(f"unknown family {family!r}")


# ---------------------------------------------------------------- experiments


def _lp_feasibility(p: dict[str, Any]) -> dict[str, Any]:
    d, n, b, eps, seed = p["d"], p["n"], p["b"], p["epsilon"], p["seed"]
    delta = p.get("delta") or calibrate_delta(d, n, DefaultPrefixSolver(), 16, p["base_seed"])
    base = gen_uniform_sequence(n, d, seed)
    vs = gen_smoothed(VectorSequence(base.vectors * (1.0 - eps)),
                      NoiseModel(p.get("noise", "uniform_sphere_scaled"), eps, seed))
    w = make_rng(seed, 0x3E).uniform(-delta, delta, d)
    res = solve_block_lp(BlockState(vs.vectors.T, w, delta), block_decomposition(n, b))
    return {"delta": delta, "status": res.status, "feasible": int(res.status == "feasible"),
            "iterations": res.iterations}


def _chain_herdisc(p: dict[str, Any]) -> dict[str, Any]:
    g = gen_chain(p["l"])
    rep = chain_length(g)
    h = herdisc(prefix_family(g))
    lb = herdisc_lower_from_chain(rep)
    return {"T": g.num_vertices, "chain_length": rep.length, "herdisc": h,
            "lower_bound": float(lb), "holds": int(h >= lb)}


def _embedding(p: dict[str, Any]) -> dict[str, Any]:
    t, vs = gen_stochastic_lary_tree(p["l"], p["h"], p["seed"])
    e = find_embedded_binary_tree(t, vs)
    return {"T": vs.count, "found": int(e is not None)}


@dataclass(frozen=True)
class Metric:
    fn: Callable[[dict[str, Any]], dict[str, Any]]
    params: tuple[str, ...]
    columns: tuple[str, ...]
    seeded: bool = True


METRICS: dict[str, Metric] = {
    "lp_feasibility": Metric(_lp_feasibility, ("d", "n", "b", "epsilon"),
                             ("delta", "status", "feasible", "iterations")),
    "chain_herdisc": Metric(_chain_herdisc, ("l",),
                            ("T", "chain_length", "herdisc", "lower_bound", "holds"), seeded=False),
    "embedding": Metric(_embedding, ("l", "h"), ("T", "found")),
}


def _run_task(task: tuple[str, dict[str, Any]]) -> dict[str, Any]:
    name, p = task
    return METRICS[name].fn(p)


def run_experiment(spec: dict[str, Any], trials: Optional[int], seed: Optional[int], workers: int) -> str:
    name = spec.get("metric")
    if name not in METRICS:
        raise UsageError(f"unknown metric {name!r}; choose from {sorted(METRICS)}")
    m = METRICS[name]
    grid = spec.get("grid", {})
    missing = [k for k in m.params if k not in grid]
    if missing:
        raise UsageError(f"grid is missing {missing}")
    ntrials = trials if trials is not None else int(spec.get("trials", 1))
    base_seed = seed if seed is not None else int(spec.get("seed", 0))
    extra = {k: v for k, v in spec.items() if k not in ("metric", "grid", "trials", "seed")}
    tasks = []
    for combo in itertools.product(*(grid[k] for k in m.params)):
        for trial in range(ntrials if m.seeded else 1):
            p = dict(zip(m.params, combo), **extra)
            p.update(trial=trial, base_seed=base_seed, seed=base_seed + trial)
            tasks.append(p)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_task, [(name, p) for p in tasks]))
    else:
        results = [_run_task((name, p)) for p in tasks]
    header = ("metric",) + m.params + ("trial", "seed") + m.columns
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for p, r in zip(tasks, results):  # map preserves task order
        row = {"metric": name, **p, **r}
        w.writerow([_fmt(row[c]) for c in header])
    return buf.getvalue()


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


# ---------------------------------------------------------------- entry point


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vecbal", description="Prefix discrepancy solvers and experiments.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", type=str, default=None, help="write output here instead of stdout")
    sub = ap.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("solve", parents=[common], help="solve an instance file")
    s.add_argument("instance")
    s.add_argument("--solver", choices=["exact", "tree", "smoothed", "dag"], default="exact")
    s.add_argument("--budget-nodes", type=int, default=None)
    s.add_argument("--delta", type=float, default=None)
    s.add_argument("--block-n", type=int, default=None)
    s.add_argument("--block-b", type=int, default=None)
    s.add_argument("--bits", type=int, default=32)

    g = sub.add_parser("gen", parents=[common], help="generate an instance file")
    g.add_argument("family", choices=["adv-tree", "stoch-tree", "smoothed", "chain", "planted"])
    g.add_argument("--h", type=int, default=3)
    g.add_argument("--l", type=int, default=2)
    g.add_argument("--T", type=int, default=32)
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--eps", type=float, default=0.2)
    g.add_argument("--noise", default="uniform_sphere_scaled",
                   choices=["uniform_sphere_scaled", "coordinate_flip", "gaussian_truncated"])
    g.add_argument("--num-blocks", type=int, default=4)

    e = sub.add_parser("experiment", parents=[common], help="run a sweep described by a JSON file")
    e.add_argument("spec")
    e.add_argument("--trials", type=int, default=None)
    e.add_argument("--workers", type=int, default=1)
    return ap


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def main(argv: Optional[list[str]] = None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    if args.cmd != "experiment" and args.seed is None:
        args.seed = 0
    try:
        if args.cmd == "solve":
            with open(args.instance, encoding="utf-8") as f:
                inst = Instance.from_json(f.read())
            out = json.dumps(_jsonable(solve(inst, args.solver, args)), indent=1) + "\n"
        elif args.cmd == "gen":
            out = generate(args.family, args).to_json()
        else:
            with open(args.spec, encoding="utf-8") as f:
                spec = json.load(f)
            out = run_experiment(spec, args.trials, args.seed, args.workers)
        _emit(out, args.out)
        return EXIT_OK
    except (UsageError, BudgetExceeded, GraphError, ValueError, OSError) as e:
        print(f"vecbal: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:  # noqa: BLE001
        print(f"vecbal: internal error: {e!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
