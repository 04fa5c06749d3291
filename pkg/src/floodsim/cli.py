"""Command line entry point.

    floodsim run <scenario-file> [--seed N] [--replicas N]
                 [--format json|csv] [--out PATH] [--trace PATH]

Exit codes: 0 success, 2 invalid scenario or arguments.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .harness import (Scenario, ScenarioInvalid, emit_report, run_scenario,
                      run_dynamic_timeline)

EXIT_OK = 0
EXIT_INVALID = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="floodsim",
        description="Deterministic multi-PHY synchronous-flooding simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="execute a scenario file")
    run.add_argument("scenario", help="path to a scenario JSON file")
    run.add_argument("--seed", type=int, default=None,
                     help="override the scenario seed")
    run.add_argument("--replicas", type=int, default=None,
                     help="override the replica count")
    run.add_argument("--format", choices=("json", "csv"), default="json")
    run.add_argument("--out", default=None,
                     help="write the report here instead of stdout")
    run.add_argument("--trace", default=None,
                     help="dump per-slot node logs of replica 0 to this path")
    return parser


def _write_trace(scenario: Scenario, path: str) -> None:
    """Single-round slot trace of the scenario's base configuration."""
    from dataclasses import replace
    from .medium import Role
    from .primitives import run_round
    from .streams import node_streams

    topology = scenario.build_topology()
    sources = topology.nodes_with_role(Role.SOURCE)
    initiator = sources[0] if sources else 0
    cfg = replace(scenario.base_round(), initiators=((initiator, "trace"),))
    res = run_round(cfg, topology, scenario.build_interference(),
                    rngs=node_streams(scenario.seed, 0,
                                      topology.node_count, "sim"),
                    lossless=scenario.lossless, trace=True)
    with open(path, "w") as fh:
        fh.write("node,slot,action,radio_on_us,channel,phy\n")
        for log in res.logs:
            fh.write(f"{log.node},{log.slot_index},{log.action.value},"
                     f"{log.radio_on_us},{log.channel},{log.phy}\n")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        scenario = Scenario.from_file(args.scenario)
        if args.seed is not None:
            scenario.seed = args.seed
        if args.replicas is not None:
            scenario.replicas = args.replicas
        scenario.validate()
        if args.trace:
            _write_trace(scenario, args.trace)
        runner = run_dynamic_timeline if scenario.dynamic else run_scenario
        report = runner(scenario)
        blob = emit_report(report, args.format)
    except (ScenarioInvalid, OSError) as exc:
        print(f"floodsim: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(blob)
    else:
        sys.stdout.write(blob.decode())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
