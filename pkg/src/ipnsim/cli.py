"""Command-line entry point.

Subcommands:

* ``list-scenarios``  — names of the built-in scenario files.
* ``run-establishment`` — pairwise connection-establishment run.
* ``run-revocation``   — revocation coverage/penetration run.
* ``sweep``            — execute a YAML grid of configurations.
* ``dump-contacts``    — write the contact table of a scenario.
"""

from __future__ import annotations

import argparse
import sys

import yaml

from . import __version__
from .experiments import (default_epoch_offsets, origin_ca_for,
                          representative_attacker, run_establishment,
                          run_revocation, sweep)
from .pki import PROTOCOLS, InvalidConfig, PkiConfig
from .reporting import (summarize, write_outputs, write_revocation_outputs)
from .scenarios import list_scenarios, load_scenario
from .simcore import RunConfig


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", required=True,
                   help="built-in scenario name or a YAML file path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epoch-offset", type=float, default=None,
                   help="start-time offset in seconds")
    p.add_argument("--epoch-index", type=int, default=None,
                   help="pick the k-th relay-state start configuration")


def _add_pki(p: argparse.ArgumentParser) -> None:
    p.add_argument("--protocol", required=True, choices=PROTOCOLS)
    p.add_argument("--ca-model", default="distributed",
                   choices=("centralized", "distributed"))
    p.add_argument("--subscribe", action="store_true")
    p.add_argument("--firewall", action="store_true")


def _resolve_offset(args, scenario) -> float:
    if args.epoch_offset is not None and args.epoch_index is not None:
        raise SystemExit("use --epoch-offset or --epoch-index, not both")
    if args.epoch_index is not None:
        offsets = default_epoch_offsets(scenario)
        if not 0 <= args.epoch_index < len(offsets):
            raise SystemExit(
                f"--epoch-index out of range (have {len(offsets)} offsets)")
        return offsets[args.epoch_index]
    return args.epoch_offset or 0.0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ipnsim",
        description="Deterministic interplanetary-network PKI simulator")
    parser.add_argument("--version", action="version",
                        version=f"ipnsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list-scenarios", help="list built-in scenarios")

    pe = sub.add_parser("run-establishment",
                        help="pairwise connection establishment")
    _add_common(pe)
    _add_pki(pe)
    pe.add_argument("--out", required=True)
    pe.add_argument("--max-sources", type=int, default=None,
                    help="limit the number of sender endpoints (evenly "
                         "sampled) to bound runtime")
    pe.add_argument("--trace", action="store_true",
                    help="also write trace.csv")

    pr = sub.add_parser("run-revocation",
                        help="revocation coverage and penetration")
    _add_common(pr)
    _add_pki(pr)
    pr.add_argument("--cached", action="store_true",
                    help="pre-seed fresh good statuses (penetration runs)")
    pr.add_argument("--attacker-segment", required=True)
    pr.add_argument("--origin-segment", required=True)
    pr.add_argument("--out", required=True)

    ps = sub.add_parser("sweep", help="run a configuration grid")
    ps.add_argument("--grid", required=True, help="YAML grid file")
    ps.add_argument("--out", required=True)
    ps.add_argument("--seed", type=int, default=0)

    pd = sub.add_parser("dump-contacts", help="write the contact table")
    pd.add_argument("--scenario", required=True)
    pd.add_argument("--seed", type=int, default=0)
    pd.add_argument("--epoch-offset", type=float, default=0.0)
    pd.add_argument("--out", required=True)

    args = parser.parse_args(argv)

    if args.command == "list-scenarios":
        for name in list_scenarios():
            print(name)
        return 0

    if args.command == "sweep":
        with open(args.grid) as fh:
            grid = yaml.safe_load(fh)
        scenario = load_scenario(grid.pop("scenario"), seed=args.seed)
        rc = RunConfig(seed=args.seed, horizon=scenario.horizon)
        cells = sweep(scenario, grid, rc)
        for i, cell in enumerate(cells):
            out_dir = f"{args.out}/cell-{i:03d}"
            result = cell.get("result")
            if result is None:
                print(f"cell {i}: skipped ({cell.get('skipped')})",
                      file=sys.stderr)
                continue
            config = PkiConfig(
                protocol=cell.get("protocol", "ocsp"),
                ca_model=cell.get("ca_model", "distributed"),
                subscribe=bool(cell.get("subscribe", False)),
                firewall=bool(cell.get("firewall", False)))
            cell_rc = RunConfig(seed=args.seed, horizon=scenario.horizon,
                                epoch_offset=float(
                                    cell.get("epoch_offset", 0.0)))
            if cell["experiment"] == "establishment":
                write_outputs(result.records, summarize(result.records),
                              out_dir, config=config, run_config=cell_rc,
                              scenario=scenario.name)
            else:
                write_revocation_outputs(result, out_dir, config=config,
                                         run_config=cell_rc)
        return 0

    scenario = load_scenario(args.scenario, seed=args.seed)

    if args.command == "dump-contacts":
        topo = scenario.build_topology(args.epoch_offset)
        topo.dump_contacts(args.out)
        return 0

    offset = _resolve_offset(args, scenario)
    rc = RunConfig(seed=args.seed, horizon=scenario.horizon,
                   epoch_offset=offset)
    config = PkiConfig(protocol=args.protocol, ca_model=args.ca_model,
                       subscribe=args.subscribe, firewall=args.firewall)
    try:
        config.validate()
    except InvalidConfig as exc:
        raise SystemExit(f"invalid configuration: {exc}")

    if args.command == "run-establishment":
        sources = None
        if args.max_sources is not None:
            endpoints = scenario.establishment_endpoints()
            step = max(1, len(endpoints) // args.max_sources)
            sources = endpoints[::step][:args.max_sources]
        result = run_establishment(scenario, config, rc, sources=sources)
        stats = summarize(result.records) if result.records else None
        write_outputs(result.records, stats, args.out, config=config,
                      run_config=rc, scenario=scenario.name,
                      trace=result.trace if args.trace else None)
        return 0

    if args.command == "run-revocation":
        from .experiments import _get_plan
        topo = _get_plan(scenario, rc.epoch_offset).topo
        attacker = representative_attacker(scenario, topo,
                                           args.attacker_segment,
                                           scenario.horizon / 2.0)
        origin = origin_ca_for(scenario, config, args.origin_segment)
        record = run_revocation(scenario, config, attacker, origin,
                                args.cached, rc)
        write_revocation_outputs(record, args.out, config=config,
                                 run_config=rc)
        return 0

    raise SystemExit(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
