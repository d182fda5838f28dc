"""Command-line front end.

Every command prints a JSON document on stdout (or writes it to ``--out``)
and a one-line-per-check summary on stderr.  The exit status is 0 when every
check passes, 1 when a check fails and 2 on invalid input.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .embed import EmbedError, embed_module, invariance_check, verify_embedding
from .gpa import GPAError, box_dimension, gpa_as_markov_tower
from .graph import (
    GraphError,
    WeightedBipartiteGraph,
    builtin,
    graph_to_dict,
    graph_to_dot,
    is_pointed_isomorphic,
    load_graph,
    verify_dimension_function,
)
from .multimatrix import AlgebraError
from .projcat import CategoryError, verify_category_laws, verify_linking_map, verify_pivotal, verify_simple_objects
from .report import Report
from .tljdiag import DiagramError
from .tower import (
    TowerError,
    bratteli_to_dot,
    build_tower,
    principal_graph,
    tower_summary,
    verify_elementary_properties,
    verify_markov_axioms,
)

INPUT_ERRORS = (GraphError, TowerError, AlgebraError, GPAError, CategoryError, DiagramError, EmbedError, OSError)


@dataclass
class RunConfig:
    command: str
    graph: str
    depth: int | None = None
    n: int = 3
    r1: int | None = None
    r2: int | None = None
    tolerance: float = 1e-9
    samples: int = 3
    seed: int = 0
    out: str | None = None
    dot: str | None = None

    def __post_init__(self) -> None:
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.samples < 1:
            raise ValueError("samples must be at least 1")


@dataclass
class Outcome:
    result: dict[str, Any]
    report: Report | None = None
    dot: str | None = None


def resolve_graph(source: str) -> WeightedBipartiteGraph:
    """A JSON file path, or a Dynkin name such as ``A3`` or ``E6``."""
    path = Path(source)
    if path.is_file():
        return load_graph(path.read_bytes())
    try:
        return builtin(source)
    except GraphError:
        raise GraphError(f"{source!r} is neither a graph file nor a known graph name") from None


def default_depth(graph: WeightedBipartiteGraph) -> int:
    return 2 * graph.diameter() + 2


def _depth(cfg: RunConfig, graph: WeightedBipartiteGraph) -> int:
    return default_depth(graph) if cfg.depth is None else cfg.depth


# ------------------------------------------------------------ commands

def cmd_fp(cfg: RunConfig, graph: WeightedBipartiteGraph) -> Outcome:
    result = {"graph": graph_to_dict(graph)}
    return Outcome(result, verify_dimension_function(graph, cfg.tolerance), graph_to_dot(graph))


def cmd_build(cfg: RunConfig, graph: WeightedBipartiteGraph) -> Outcome:
    tower = build_tower(graph, _depth(cfg, graph))
    summary = tower_summary(tower)
    summary["dims"] = tower.level_dims()
    return Outcome(summary, None, bratteli_to_dot(tower))


def cmd_verify(cfg: RunConfig, graph: WeightedBipartiteGraph) -> Outcome:
    tower = build_tower(graph, _depth(cfg, graph))
    report = Report(f"axioms and elementary properties: {tower.name}")
    report.extend(verify_markov_axioms(tower, cfg.tolerance, cfg.samples, cfg.seed))
    report.extend(verify_elementary_properties(tower, cfg.tolerance, cfg.samples, cfg.seed))
    return Outcome({"depth": tower.depth, "dims": tower.level_dims()}, report, bratteli_to_dot(tower))


def cmd_principal(cfg: RunConfig, graph: WeightedBipartiteGraph) -> Outcome:
    tower = build_tower(graph, _depth(cfg, graph))
    data = principal_graph(tower, cfg.tolerance, details=True)
    iso = is_pointed_isomorphic(data.graph, graph, cfg.tolerance)
    report = Report("principal graph")
    report.add("pointed isomorphism with the input graph", "classify", 0.0 if iso is not None else np.inf, cfg.tolerance)
    report.add("spread of d^k tr_k over a vertex", "dim", data.dim_spread, cfg.tolerance)
    result = {
        "principal_graph": graph_to_dict(data.graph),
        "certified": data.certified,
        "first_level": {str(v): k for v, k in data.first_level.items()},
        "isomorphism": None if iso is None else {str(a): b for a, b in iso.items()},
    }
    return Outcome(result, report, graph_to_dot(data.graph, "principal"))


def _loop_count(graph: WeightedBipartiteGraph, n: int, sign: int) -> int:
    lam = graph.bipartite_adjacency()
    m = lam @ lam.T if sign > 0 else lam.T @ lam
    return int(round(np.trace(np.linalg.matrix_power(m, n))))


def cmd_gpa(cfg: RunConfig, graph: WeightedBipartiteGraph) -> Outcome:
    report = Report("graph planar algebra")
    boxes = []
    worst = 0
    for m in range(cfg.n + 1):
        for sign in (1, -1):
            dim = box_dimension(graph, m, sign)
            loops = _loop_count(graph, m, sign)
            worst = max(worst, abs(dim - loops))
            boxes.append({"n": m, "shading": "+" if sign > 0 else "-", "dim": dim, "trace_formula": loops})
    report.add("box dimensions equal closed-walk counts", "box-dim", float(worst), 0.0)
    depth = max(2, _depth(cfg, graph))
    tower = gpa_as_markov_tower(graph, depth)
    report.extend(verify_markov_axioms(tower, cfg.tolerance, cfg.samples, cfg.seed), prefix="GPA tower: ")
    return Outcome({"boxes": boxes, "tower": tower_summary(tower)}, report, bratteli_to_dot(tower, "gpa"))


def linking_parameters(depth: int, bound: int = 2) -> list[tuple[int, int, int, int]]:
    return [p for p in itertools.product(range(bound + 1), repeat=4) if p[0] + 2 * sum(p[1:]) <= depth]


def cmd_projcat(cfg: RunConfig, graph: WeightedBipartiteGraph) -> Outcome:
    tower = build_tower(graph, _depth(cfg, graph))
    params = linking_parameters(tower.depth)
    tol = max(cfg.tolerance, 1e-8)
    report = Report(f"projection category of {tower.name}")
    report.extend(verify_linking_map(tower, params, cfg.samples, cfg.seed, tol))
    report.extend(verify_category_laws(tower, 2, cfg.samples, cfg.seed, tol))
    report.extend(verify_pivotal(tower, 3, 2, cfg.samples, cfg.seed, cfg.tolerance))
    report.extend(verify_simple_objects(tower, cfg.tolerance))
    return Outcome({"depth": tower.depth, "linking_parameters": [list(p) for p in params]}, report)


def cmd_embed(cfg: RunConfig, graph: WeightedBipartiteGraph) -> Outcome:
    emb = embed_module(graph, cfg.n, cfg.r1)
    report = verify_embedding(emb, cfg.n, cfg.samples, cfg.seed, cfg.tolerance)
    ranks = {f"{m}{'+' if s > 0 else '-'}": emb.rank(m, s) for m in range(cfg.n + 1) for s in (1, -1)}
    return Outcome({"r": emb.r, "depth": emb.tower.depth, "modulus": emb.tower.modulus, "ranks": ranks}, report)


def cmd_invariance(cfg: RunConfig, graph: WeightedBipartiteGraph) -> Outcome:
    r1 = 1 if cfg.r1 is None else cfg.r1
    r2 = r1 + 1 if cfg.r2 is None else cfg.r2
    n = min(cfg.n, 2)
    report = invariance_check(graph, r1, r2, n, tolerance=max(cfg.tolerance, 1e-8))
    return Outcome({"r1": r1, "r2": r2, "n": n}, report)


COMMANDS: dict[str, Callable[[RunConfig, WeightedBipartiteGraph], Outcome]] = {
    "fp": cmd_fp,
    "build": cmd_build,
    "verify": cmd_verify,
    "principal": cmd_principal,
    "gpa": cmd_gpa,
    "projcat": cmd_projcat,
    "embed": cmd_embed,
    "invariance": cmd_invariance,
}


# ------------------------------------------------------------ plumbing

def run(cfg: RunConfig) -> tuple[dict[str, Any], Outcome]:
    graph = resolve_graph(cfg.graph)
    outcome = COMMANDS[cfg.command](cfg, graph)
    header = {k: v for k, v in asdict(cfg).items() if k not in ("out", "dot")}
    doc: dict[str, Any] = {"header": header, "result": outcome.result}
    if outcome.report is not None:
        doc["report"] = outcome.report.to_dict()
    doc["pass"] = outcome.report is None or outcome.report.passed
    return doc, outcome


def render(doc: dict[str, Any]) -> str:
    return json.dumps(doc, indent=2, default=_jsonable, allow_nan=True) + "\n"


def _jsonable(x: Any) -> Any:
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    return str(x)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="markovtower", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "fp": "Frobenius-Perron weights of a graph",
        "build": "build the path-model tower and its Bratteli diagram",
        "verify": "check the Markov axioms and elementary properties",
        "principal": "recover the principal graph",
        "gpa": "graph planar algebra box dimensions and tower",
        "projcat": "projection category: linking map, action laws, pivotal trace",
        "embed": "embed Temperley-Lieb-Jones into the graph planar algebra",
        "invariance": "compare embeddings at two levels and across basepoints",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("graph", help="graph JSON file or a Dynkin name such as A3, D4, E6")
        p.add_argument("--depth", type=int, default=None, help="tower depth (default 2*diameter+2)")
        p.add_argument("--n", type=int, default=3, help="largest box size")
        p.add_argument("--r1", type=int, default=None, help="strand offset (embed) or first level (invariance)")
        p.add_argument("--r2", type=int, default=None, help="second level (invariance)")
        p.add_argument("--tolerance", type=float, default=1e-9)
        p.add_argument("--samples", type=int, default=3)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
        p.add_argument("--dot", default=None, help="write a Graphviz DOT file here")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(**vars(args))
        doc, outcome = run(cfg)
    except (ValueError, *INPUT_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = render(doc)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    if cfg.dot and outcome.dot is not None:
        Path(cfg.dot).write_text(outcome.dot)
    report = outcome.report
    if report is not None:
        print(report.summary(), file=sys.stderr)
        bad = report.first_failure()
        if bad is not None:
            print(f"FAIL {bad.label}: {bad.name} (residual {bad.residual:.3e} > {bad.tolerance:.1e})", file=sys.stderr)
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
