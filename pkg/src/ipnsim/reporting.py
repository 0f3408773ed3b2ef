"""Summary statistics and machine-readable run outputs.

File contract with downstream analysis tooling:

* ``records.csv``  — establishment runs: one row per ordered pair with
  header ``src,dst,t_send,outcome,latency,overhead,hops``; revocation
  runs: one row per victim with header
  ``victim,segment,tau,tau_rel,flag``.  Seconds carry 6 decimal places
  with a dot separator; inapplicable values are empty fields.
* ``summary.json``  — statistics plus the full configuration echo, the
  seed, and the tool version.
* ``trace.csv``     — protocol message log:
  ``time,kind,from,to,serial,decision``.
* ``contacts.csv``  — ``time,node_a,node_b,distance_km`` (topology dump).
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass
from typing import Optional

from . import __version__
from .experiments import EstablishmentRecord, RevocationRecord
from .pki import PkiConfig
from .simcore import RunConfig

RECORDS_HEADER = ["src", "dst", "t_send", "outcome", "latency", "overhead",
                  "hops"]
REVOCATION_HEADER = ["victim", "segment", "tau", "tau_rel", "flag"]
TRACE_HEADER = ["time", "kind", "from", "to", "serial", "decision"]


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class StatGroup:
    min: float
    max: float
    mean: float
    std: float


@dataclass(frozen=True)
class SummaryStats:
    dropped_pct: float
    latency: Optional[StatGroup]
    overhead: Optional[StatGroup]  # None: not applicable (e.g. broadcast)
    hops: Optional[StatGroup]


def _group(values: list[float]) -> Optional[StatGroup]:
    if not values:
        return None
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n  # population
    return StatGroup(min(values), max(values), mean, math.sqrt(var))


def summarize(records: list[EstablishmentRecord]) -> SummaryStats:
    if not records:
        raise EmptyInput("no records to summarize")
    delivered = [r for r in records if r.outcome == "delivered"]
    dropped_pct = 100.0 * (len(records) - len(delivered)) / len(records)
    latency = _group([r.latency for r in delivered if r.latency is not None])
    overheads = [r.overhead for r in delivered if r.overhead is not None]
    overhead = _group(overheads) if overheads else None
    hops = _group([float(r.hops) for r in delivered if r.hops is not None])
    return SummaryStats(dropped_pct, latency, overhead, hops)


def _fmt(value, decimals: int = 6) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return f"{value:.{decimals}f}"


def _stats_dict(stats: SummaryStats) -> dict:
    out: dict = {"dropped_pct": stats.dropped_pct}
    for name in ("latency", "overhead", "hops"):
        group = getattr(stats, name)
        out[name] = "not-applicable" if group is None else asdict(group)
    return out


def _config_echo(config: PkiConfig) -> dict:
    return {
        "protocol": config.protocol,
        "ca_model": config.ca_model,
        "subscribe": config.subscribe,
        "firewall": config.firewall,
        "status_ttl": config.status_ttl,
        "crl_expiry": config.crl_expiry,
        "broadcast_interval": config.broadcast_interval,
    }


def config_from_echo(echo: dict) -> PkiConfig:
    config = PkiConfig(**echo)
    config.validate()
    return config


def write_trace(trace, path: str) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_HEADER)
            for time, kind, src, dst, serial, decision in trace:
                writer.writerow([_fmt(time), kind, src, dst, serial,
                                 decision])
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc


def write_outputs(records: list[EstablishmentRecord],
                  stats: Optional[SummaryStats], out_dir: str, *,
                  config: PkiConfig, run_config: RunConfig,
                  scenario: str, trace=None) -> None:
    """Establishment-run artifacts: records.csv + summary.json
    (+ trace.csv when a trace is supplied)."""
    os.makedirs(out_dir, exist_ok=True)
    summary: dict = {
        "tool": "ipnsim",
        "version": __version__,
        "scenario": scenario,
        "experiment": "establishment",
        "seed": run_config.seed,
        "horizon": run_config.horizon,
        "epoch_offset": run_config.epoch_offset,
        "config": _config_echo(config),
    }
    if not records:
        summary["empty"] = True
    else:
        if stats is None:
            stats = summarize(records)
        summary["stats"] = _stats_dict(stats)
        path = os.path.join(out_dir, "records.csv")
        try:
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(RECORDS_HEADER)
                for r in records:
                    writer.writerow([r.src, r.dst, _fmt(r.t_send), r.outcome,
                                     _fmt(r.latency), _fmt(r.overhead),
                                     _fmt(r.hops)])
        except OSError as exc:
            raise OSError(f"cannot write records to {path}: {exc}") from exc
    spath = os.path.join(out_dir, "summary.json")
    try:
        with open(spath, "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write summary to {spath}: {exc}") from exc
    if trace is not None:
        write_trace(trace, os.path.join(out_dir, "trace.csv"))


def read_records(path: str) -> list[EstablishmentRecord]:
    records: list[EstablishmentRecord] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RECORDS_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            records.append(EstablishmentRecord(
                src=row["src"], dst=row["dst"],
                t_send=float(row["t_send"]), outcome=row["outcome"],
                latency=float(row["latency"]) if row["latency"] else None,
                overhead=float(row["overhead"]) if row["overhead"] else None,
                hops=int(float(row["hops"])) if row["hops"] else None,
            ))
    return records


def write_revocation_outputs(record: RevocationRecord, out_dir: str, *,
                             config: PkiConfig, run_config: RunConfig
                             ) -> None:
    """Revocation-run artifacts: per-victim records.csv + summary.json."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "records.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REVOCATION_HEADER)
        for victim in sorted(record.tau):
            writer.writerow([
                victim,
                record.victim_segment[victim],
                _fmt(record.tau[victim]),
                _fmt(record.tau[victim] - record.t0),
                record.tau_flag[victim],
            ])
    summary = {
        "tool": "ipnsim",
        "version": __version__,
        "scenario": record.scenario,
        "experiment": "revocation",
        "seed": run_config.seed,
        "horizon": run_config.horizon,
        "epoch_offset": record.epoch_offset,
        "config": _config_echo(config),
        "cached": record.cached,
        "attacker": record.attacker,
        "attacker_segment": record.attacker_segment,
        "origin_ca": record.origin_ca,
        "origin_segment": record.origin_segment,
        "t0": record.t0,
        "coverage_time": record.coverage_time,
        "covered": record.covered,
        "penetration": record.penetration,
        "ca_receipt": record.ca_receipt,
    }
    spath = os.path.join(out_dir, "summary.json")
    with open(spath, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
