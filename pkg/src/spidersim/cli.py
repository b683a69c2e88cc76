"""Command-line surface for the full workflow:
generate -> validate -> paths -> simulate/batch -> export-dot.

Exit codes: 0 success, 1 validation/generation/domain failure, 2 usage
error, 3 internal error. Payload goes to stdout (or --out); diagnostics
go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from .attackgraph import PathQuery, enumerate_attack_paths
from .capabilities import (
    CapabilityRegistry,
    DefenseStrategy,
    built_in_registry,
    compose_strategy,
    register_capability,
)
from .engine import (
    AttackerPolicy,
    DefenderPolicy,
    SimulationConfig,
    batch_run,
    resolve_topology,
    run_simulation,
)
from .errors import GenerationFailed, SpiderSimError
from .exports import (
    export_dot,
    export_trace,
    parse_capability,
    parse_paths,
    parse_requirement,
    parse_strategy,
    serialize_paths,
)
from .forge import run_pipeline
from .model import (
    NodeClass,
    TargetSelector,
    parse_scenario,
    serialize_scenario,
    validate_spec,
)


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _emit(payload: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)


def _parse_selector(text: str) -> TargetSelector:
    """SEL syntax: "class:<node_class>" or "node:<id>" (bare id accepted)."""
    if text.startswith("class:"):
        return TargetSelector(node_class=NodeClass(text[len("class:"):]))
    if text.startswith("node:"):
        return TargetSelector(node_id=text[len("node:"):])
    return TargetSelector(node_id=text)


def _load_registry(capability_files: List[str]) -> CapabilityRegistry:
    registry = built_in_registry()
    for path in capability_files:
        registry = register_capability(registry, parse_capability(_read(path)))
    return registry


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spidersim",
        description="Deterministic cybersecurity scenario simulator",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("generate", help="generate a scenario from a requirement file")
    p.add_argument("--requirement", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--max-iterations", type=int, default=5)
    p.add_argument("--out")

    p = sub.add_parser("validate", help="validate a scenario file")
    p.add_argument("--scenario", required=True)
    p.add_argument("--capability-file", action="append", default=[])

    p = sub.add_parser("paths", help="enumerate attack paths")
    p.add_argument("--scenario", required=True)
    p.add_argument("--entry", action="append", required=True)
    p.add_argument("--target", required=True,
                   help='target selector: "class:<node_class>" or "node:<id>"')
    p.add_argument("-k", type=int, default=10)
    p.add_argument("--max-len", type=int, default=8)
    p.add_argument("--seed", type=int, default=0,
                   help="seed for recipe-based scenarios")
    p.add_argument("--dot", help="also write a DOT render of the paths")
    p.add_argument("--out")

    p = sub.add_parser("simulate", help="run one seeded simulation")
    p.add_argument("--scenario", required=True)
    p.add_argument("--strategy")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--rounds", type=int, default=20)
    p.add_argument("--attacker", default="greedy_value",
                   choices=[pol.value for pol in AttackerPolicy])
    p.add_argument("--defender", default="static",
                   choices=[pol.value for pol in DefenderPolicy])
    p.add_argument("--trace", help="write the trace JSON here")

    p = sub.add_parser("batch", help="aggregate n seeded simulations")
    p.add_argument("--scenario", required=True)
    p.add_argument("--strategy")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--rounds", type=int, default=20)
    p.add_argument("--attacker", default="greedy_value",
                   choices=[pol.value for pol in AttackerPolicy])
    p.add_argument("--defender", default="static",
                   choices=[pol.value for pol in DefenderPolicy])
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--out")

    p = sub.add_parser("capabilities", help="inspect or extend the registry")
    p.add_argument("action", choices=["list", "load"])
    p.add_argument("file", nargs="?")

    p = sub.add_parser("export-dot", help="render a topology (and paths) as DOT")
    p.add_argument("--scenario", required=True)
    p.add_argument("--paths", help="JSON path file to highlight")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    return parser


def _strategy_from_args(args, registry, topology) -> DefenseStrategy:
    if not getattr(args, "strategy", None):
        return DefenseStrategy()
    return compose_strategy(registry, parse_strategy(_read(args.strategy)), topology)


def _cmd_generate(args) -> int:
    registry = built_in_registry()
    requirement = parse_requirement(_read(args.requirement))
    spec, report = run_pipeline(
        requirement, registry, args.seed, max_iterations=args.max_iterations
    )
    _emit(serialize_scenario(spec), args.out)
    sys.stderr.write(
        f"generated in {report.iterations_used} iteration(s), "
        f"{len(report.refinements_applied)} refinement(s)\n"
    )
    return 0


def _cmd_validate(args) -> int:
    registry = _load_registry(args.capability_file)
    spec = parse_scenario(_read(args.scenario))
    report = validate_spec(spec, registry)
    doc = {
        "errors": [
            {"code": f.code, "message": f.message, "location": f.location}
            for f in report.errors
        ],
        "warnings": [
            {"code": f.code, "message": f.message, "location": f.location}
            for f in report.warnings
        ],
    }
    sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    if report.errors:
        for finding in report.errors:
            sys.stderr.write(f"{finding.code}: {finding.message}\n")
        return 1
    return 0


def _cmd_paths(args) -> int:
    registry = built_in_registry()
    spec = parse_scenario(_read(args.scenario))
    topology = resolve_topology(spec, registry, args.seed)
    query = PathQuery(
        entries=tuple(args.entry),
        target=_parse_selector(args.target),
        k=args.k,
        max_len=args.max_len,
    )
    paths = enumerate_attack_paths(topology, registry, query)
    _emit(serialize_paths(paths), args.out)
    if args.dot:
        Path(args.dot).write_text(export_dot(topology, paths), encoding="utf-8")
    return 0


def _sim_config(args) -> SimulationConfig:
    return SimulationConfig(
        max_rounds=args.rounds,
        seed=args.seed,
        attacker_policy=AttackerPolicy(args.attacker),
        defender_policy=DefenderPolicy(args.defender),
    )


def _cmd_simulate(args) -> int:
    registry = built_in_registry()
    spec = parse_scenario(_read(args.scenario))
    topology = resolve_topology(spec, registry, args.seed)
    strategy = _strategy_from_args(args, registry, topology)
    trace, metrics = run_simulation(spec, strategy, registry, _sim_config(args))
    payload = export_trace(trace)
    if args.trace:
        Path(args.trace).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)
    sys.stderr.write(
        f"rounds={trace.final_state.round} "
        f"compromised_fraction={metrics.compromised_fraction:.3f} "
        f"detections={metrics.detection_count}\n"
    )
    return 0


def _cmd_batch(args) -> int:
    registry = built_in_registry()
    spec = parse_scenario(_read(args.scenario))
    topology = resolve_topology(spec, registry, args.seed)
    strategy = _strategy_from_args(args, registry, topology)
    result = batch_run(spec, strategy, registry, _sim_config(args), args.n)
    doc = {
        "runs": args.n,
        "attacker_success_rate": result.attacker_success_rate,
        "mean_compromised_fraction": result.mean_compromised_fraction,
        "mean_detection_count": result.mean_detection_count,
    }
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return 0


def _cmd_capabilities(args) -> int:
    registry = built_in_registry()
    if args.action == "list":
        for cap in sorted(registry.capabilities(), key=lambda c: (c.kind.value, c.id)):
            sys.stdout.write(
                f"{cap.id}\t{cap.kind.value}\t{cap.technique_tag}\t"
                f"p={cap.base_success_prob}\tcost={cap.cost_units}\n"
            )
        return 0
    if not args.file:
        sys.stderr.write("capabilities load requires a file argument\n")
        return 2
    cap = parse_capability(_read(args.file))
    register_capability(registry, cap)  # validates against the built-ins
    sys.stdout.write(f"loaded {cap.id} ({cap.kind.value}, {cap.technique_tag})\n")
    return 0


def _cmd_export_dot(args) -> int:
    registry = built_in_registry()
    spec = parse_scenario(_read(args.scenario))
    topology = resolve_topology(spec, registry, args.seed)
    paths = parse_paths(_read(args.paths)) if args.paths else None
    _emit(export_dot(topology, paths), args.out)
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "validate": _cmd_validate,
    "paths": _cmd_paths,
    "simulate": _cmd_simulate,
    "batch": _cmd_batch,
    "capabilities": _cmd_capabilities,
    "export-dot": _cmd_export_dot,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        return _COMMANDS[args.subcommand](args)
    except GenerationFailed as exc:
        sys.stderr.write(f"{exc.code}: {exc.message}\n")
        return 1
    except SpiderSimError as exc:
        sys.stderr.write(f"{exc.code}: {exc.message}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"io error: {exc}\n")
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        sys.stderr.write(f"internal error: {exc!r}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
