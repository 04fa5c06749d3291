"""Scenario loading, replica execution, metric aggregation and reports.

A scenario is a JSON document with a published schema (unknown keys are
rejected).  Replicas are fully independent: each gets its own rng streams
derived from (seed, replica, node, purpose), so execution order never
affects results, and aggregation is a deterministic fold.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from typing import Optional

from .layouts import UnknownLayout, load_layout
from .medium import (DISCONNECTED, InterferenceScenario, InterferenceSegment,
                     JAM_LEVELS, Role, Topology)
from .middleware import MphyPattern, build_schedule, make_pattern, PATTERN_NAMES
from .phy import PhyId, PHY_TABLE, slot_duration
from .primitives import GLOSSY, ROF, RoundConfig
from .protocols import (CollectionState, TrafficModel, rntx_hook,
                        run_collection_epoch, select_pattern,
                        single_phy_pattern)
from .streams import node_streams, stream

SCHEMA_VERSION = 1

# Energy model constants: radio current at rx / tx 0 dBm, supply voltage.
# Approximations; raw radio-on time is the primary comparator.
RADIO_CURRENT_A = 6.0e-3
SUPPLY_VOLTAGE_V = 3.0

ALLOWED_PAYLOADS = (8, 64, 118, 248)

_SCENARIO_KEYS = {
    "name", "layout", "rss_dbm", "roles", "protocol", "primitive",
    "phy", "fast_phy", "robust_phy", "pattern", "dynamic",
    "ntx", "nslots", "nta", "exit_threshold", "tx_power_dbm",
    "epoch_period_us", "channel_sequence", "payload_len", "proc_gap_us",
    "traffic", "interference", "seed", "replicas", "duration_us",
    "lossless", "extensions", "source",
}
_TRAFFIC_KEYS = {"mode", "period_us", "window_us"}
_SEGMENT_KEYS = {"start_us", "end_us", "level"}


class ScenarioInvalid(ValueError):
    """Scenario rejected; the message names the offending field."""


@dataclass
class Scenario:
    name: str = "scenario"
    layout: Optional[str] = None
    rss_dbm: Optional[list] = None
    roles: Optional[list] = None
    protocol: str = "collection"          # collection | dissemination
    primitive: str = ROF
    phy: Optional[str] = None             # single-PHY runs
    fast_phy: str = "BLE_2M"
    robust_phy: str = "BLE_500K"
    pattern: Optional[str] = None         # static multi-PHY pattern name
    dynamic: bool = False                 # late-ratio pattern controller
    ntx: int = 6
    nslots: int = 12
    nta: int = 12
    exit_threshold: int = 4
    tx_power_dbm: float = 0.0
    epoch_period_us: Optional[int] = None
    channel_sequence: tuple = (0,)
    payload_len: int = 8
    proc_gap_us: int = 100
    traffic: dict = field(default_factory=lambda: {"mode": "aperiodic"})
    interference: list = field(default_factory=list)
    seed: int = 1
    replicas: int = 1
    duration_us: int = 60_000_000
    lossless: bool = False
    extensions: tuple = ()
    source: int = 0                       # dissemination initiator

    @classmethod
    def from_dict(cls, raw: dict) -> "Scenario":
        if not isinstance(raw, dict):
            raise ScenarioInvalid("scenario must be a JSON object")
        unknown = set(raw) - _SCENARIO_KEYS
        if unknown:
            raise ScenarioInvalid(f"unknown scenario keys: {sorted(unknown)}")
        sc = cls(**{k: v for k, v in raw.items()})
        sc.channel_sequence = tuple(sc.channel_sequence)
        sc.extensions = tuple(sc.extensions)
        sc.validate()
        return sc

    @classmethod
    def from_file(cls, path: str) -> "Scenario":
        with open(path) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ScenarioInvalid(f"not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    # -- validation -----------------------------------------------------

    def validate(self) -> None:
        if self.protocol not in ("collection", "dissemination"):
            raise ScenarioInvalid(f"protocol: unknown value {self.protocol!r}")
        if (self.layout is None) == (self.rss_dbm is None):
            raise ScenarioInvalid(
                "topology: exactly one of 'layout' or 'rss_dbm' is required")
        if self.rss_dbm is not None and self.roles is None:
            raise ScenarioInvalid("roles: required with inline rss_dbm")
        if self.payload_len not in ALLOWED_PAYLOADS:
            raise ScenarioInvalid(
                f"payload_len: must be one of {ALLOWED_PAYLOADS}")
        for phy_name in self._phys_used():
            try:
                mode = PHY_TABLE[PhyId(phy_name)]
            except ValueError:
                raise ScenarioInvalid(f"phy: unknown PHY {phy_name!r}") from None
            if self.payload_len > mode.max_payload:
                raise ScenarioInvalid(
                    f"payload_len: {self.payload_len} B exceeds "
                    f"{phy_name} maximum of {mode.max_payload} B")
        if self.pattern is not None and self.pattern not in PATTERN_NAMES:
            raise ScenarioInvalid(f"pattern: unknown pattern {self.pattern!r}")
        if self.pattern is not None and self.dynamic:
            raise ScenarioInvalid("pattern: static pattern and dynamic "
                                  "controller are mutually exclusive")
        if self.dynamic and self.protocol != "collection":
            raise ScenarioInvalid("dynamic: requires the collection protocol")
        if not set(self.extensions) <= {"rntx", "backoff"}:
            raise ScenarioInvalid(
                f"extensions: unknown entries "
                f"{sorted(set(self.extensions) - {'rntx', 'backoff'})}")
        if "rntx" in self.extensions and 2 * self.ntx > self.nslots:
            raise ScenarioInvalid(
                "nslots: the rntx extension needs nslots >= 2*ntx")
        if self.replicas < 0:
            raise ScenarioInvalid("replicas: must be >= 0")
        if self.duration_us <= 0:
            raise ScenarioInvalid("duration_us: must be positive")
        unknown = set(self.traffic) - _TRAFFIC_KEYS
        if unknown:
            raise ScenarioInvalid(f"traffic: unknown keys {sorted(unknown)}")
        if self.traffic.get("mode", "aperiodic") not in (
                "aperiodic", "periodic", "none"):
            raise ScenarioInvalid(
                f"traffic.mode: unknown value {self.traffic.get('mode')!r}")
        for i, seg in enumerate(self.interference):
            unknown = set(seg) - _SEGMENT_KEYS
            if unknown:
                raise ScenarioInvalid(
                    f"interference[{i}]: unknown keys {sorted(unknown)}")
            if seg.get("level") not in JAM_LEVELS:
                raise ScenarioInvalid(
                    f"interference[{i}].level: unknown level "
                    f"{seg.get('level')!r}")
        self._check_feasible()

    def _phys_used(self) -> list[str]:
        if self.phy is not None:
            return [self.phy]
        return [self.fast_phy, self.robust_phy]

    def epoch_period(self) -> int:
        if self.epoch_period_us is not None:
            return self.epoch_period_us
        return 1_000_000 if self.protocol == "collection" else 200_000

    def _worst_epoch_us(self) -> int:
        """Upper bound on one epoch's duration, over any usable pattern."""
        slot = {name: self.nslots * slot_duration(
            PHY_TABLE[PhyId(name)], self.payload_len, self.proc_gap_us)
            for name in self._phys_used()}
        worst_round = max(slot.values())
        if self.protocol == "dissemination":
            return worst_round
        rounds = 1 + 2 * self.nta
        return rounds * worst_round

    def _check_feasible(self) -> None:
        worst = self._worst_epoch_us()
        if worst > self.epoch_period():
            raise ScenarioInvalid(
                f"epoch_period_us: schedule can take {worst} us which "
                f"exceeds the epoch period of {self.epoch_period()} us; "
                f"pick a faster PHY, smaller payload or longer period")

    # -- construction helpers -------------------------------------------

    def build_topology(self) -> Topology:
        if self.layout is not None:
            try:
                return load_layout(self.layout)
            except UnknownLayout as exc:
                raise ScenarioInvalid(f"layout: {exc}") from exc
        import numpy as np
        rss = np.array(
            [[DISCONNECTED if v is None else float(v) for v in row]
             for row in self.rss_dbm])
        np.fill_diagonal(rss, DISCONNECTED)
        try:
            roles = [Role(r) for r in self.roles]
        except ValueError as exc:
            raise ScenarioInvalid(f"roles: {exc}") from exc
        return Topology(rss_dbm=rss, roles=roles)

    def build_interference(self) -> Optional[InterferenceScenario]:
        if not self.interference:
            return None
        segs = [InterferenceSegment(int(s["start_us"]), int(s["end_us"]),
                                    s["level"])
                for s in self.interference]
        return InterferenceScenario(segments=segs)

    def base_round(self) -> RoundConfig:
        phy = PhyId(self.phy) if self.phy is not None else PhyId(self.robust_phy)
        return RoundConfig(
            primitive=self.primitive, phy=phy, ntx=self.ntx,
            nslots=self.nslots, tx_power_dbm=self.tx_power_dbm,
            channel_sequence=self.channel_sequence,
            payload_len=self.payload_len, proc_gap_us=self.proc_gap_us)

    def initial_pattern(self) -> MphyPattern:
        fast = PhyId(self.fast_phy)
        robust = PhyId(self.robust_phy)
        if self.phy is not None:
            return single_phy_pattern(PhyId(self.phy))
        if self.pattern is not None:
            return make_pattern(self.pattern, fast, robust)
        # Dynamic controller starts at the fastest pattern it can select.
        return make_pattern("MPHY75", fast, robust)

    def traffic_model(self) -> TrafficModel:
        return TrafficModel(
            mode=self.traffic.get("mode", "aperiodic"),
            window_us=int(self.traffic.get("window_us", 30_000_000)),
            period_us=int(self.traffic.get("period_us", 5_000_000)),
            payload_len=self.payload_len)


# -- replica execution ---------------------------------------------------


def _latency_stats(latencies: list[int]) -> dict:
    if not latencies:
        return {"mean_us": None, "median_us": None, "p95_us": None}
    ordered = sorted(latencies)
    p95_idx = min(len(ordered) - 1, int(0.95 * (len(ordered) - 1) + 0.999999))
    return {
        "mean_us": statistics.fmean(ordered),
        "median_us": float(statistics.median(ordered)),
        "p95_us": float(ordered[p95_idx]),
    }


def _energy_mj(radio_on_us: float) -> float:
    return radio_on_us * 1e-6 * RADIO_CURRENT_A * SUPPLY_VOLTAGE_V * 1e3


def _run_collection_replica(sc: Scenario, topology: Topology,
                            replica: int) -> dict:
    n = topology.node_count
    rngs = node_streams(sc.seed, replica, n, "sim")
    interference = sc.build_interference()
    sinks = topology.nodes_with_role(Role.DESTINATION)
    if len(sinks) != 1:
        raise ScenarioInvalid(
            f"roles: collection needs exactly one destination, got {len(sinks)}")
    sink = sinks[0]
    sources = topology.nodes_with_role(Role.SOURCE)
    if not sources:
        raise ScenarioInvalid("roles: collection needs at least one source")

    traffic = sc.traffic_model()
    queue = []
    for src in sources:
        t_rng = stream(sc.seed, replica, src, "traffic")
        for seq, t_gen in enumerate(traffic.generate(src, sc.duration_us,
                                                     t_rng)):
            queue.append((t_gen, (src, seq)))
    queue.sort()

    state = CollectionState(nta=sc.nta, exit_threshold=sc.exit_threshold,
                            sink=sink, window_us=traffic.window_us)
    pattern = sc.initial_pattern()
    hooks = (rntx_hook,) if "rntx" in sc.extensions else ()
    backoff = "backoff" in sc.extensions
    base = sc.base_round()
    period = sc.epoch_period()
    plan_cache: dict = {}

    radio_on = [0] * n
    timeline = []
    epoch = 0
    while epoch * period < sc.duration_us:
        epoch_start = epoch * period
        state.sink_pattern = pattern
        metrics = run_collection_epoch(
            state, topology, queue, interference, rngs,
            base=base, epoch_index=epoch, epoch_start_us=epoch_start,
            lossless=sc.lossless, backoff=backoff, driver_hooks=hooks,
            plan_cache=plan_cache)
        for i, v in enumerate(metrics.radio_on_us):
            radio_on[i] += v
        timeline.append({"epoch": epoch, "start_us": epoch_start,
                         "pattern": pattern.name,
                         "fast_utilization": pattern.fast_utilization})
        if sc.dynamic:
            report = state.late_report(sources, metrics.end_time_us)
            pattern = select_pattern(report, PhyId(sc.fast_phy),
                                     PhyId(sc.robust_phy))
        epoch += 1

    generated = len(queue)
    delivered = [m for m in state.delivered_at if m in state.generated_at]
    latencies = [state.delivered_at[m] - state.generated_at[m]
                 for m in delivered]
    reliability = (len(delivered) / generated) if generated else 1.0
    rec = {
        "replica": replica,
        "reliability": reliability,
        "generated": generated,
        "delivered": len(delivered),
        "latency": _latency_stats(latencies),
        "radio_on_us_total": sum(radio_on),
        "radio_on_us_mean_per_node": sum(radio_on) / n,
        "energy_mj_mean_per_node": _energy_mj(sum(radio_on) / n),
    }
    if sc.dynamic:
        rec["pattern_timeline"] = timeline
    return rec


def _run_dissemination_replica(sc: Scenario, topology: Topology,
                               replica: int) -> dict:
    from .protocols import run_dissemination_epoch
    from .middleware import build_dissemination_schedule
    from dataclasses import replace

    n = topology.node_count
    rngs = node_streams(sc.seed, replica, n, "sim")
    interference = sc.build_interference()
    destinations = [i for i in range(n) if i != sc.source]
    base = sc.base_round()
    schedule = build_dissemination_schedule(base, sc.epoch_period())
    hooks = (rntx_hook,) if "rntx" in sc.extensions else ()
    period = sc.epoch_period()
    plan_cache: dict = {}

    radio_on = [0] * n
    received = 0
    expected = 0
    latencies = []
    slot_us = slot_duration(PHY_TABLE[base.phy], base.payload_len,
                            base.proc_gap_us)
    epoch = 0
    while epoch * period < sc.duration_us:
        res = run_dissemination_epoch(
            schedule, topology, interference, rngs,
            source=sc.source, data_id=epoch,
            epoch_start_us=epoch * period, lossless=sc.lossless,
            driver_hooks=hooks, plan_cache=plan_cache)
        for i, v in enumerate(res.radio_on_us):
            radio_on[i] += v
        for node in destinations:
            expected += 1
            if res.received.get(node) == epoch:
                received += 1
                latencies.append(
                    (res.first_rx_slot[node] + 1) * slot_us)
        epoch += 1

    return {
        "replica": replica,
        "reliability": (received / expected) if expected else 1.0,
        "generated": expected,
        "delivered": received,
        "latency": _latency_stats(latencies),
        "radio_on_us_total": sum(radio_on),
        "radio_on_us_mean_per_node": sum(radio_on) / n,
        "energy_mj_mean_per_node": _energy_mj(sum(radio_on) / n),
    }


def _aggregate(records: list[dict]) -> dict:
    if not records:
        return {}

    def mean_of(path) -> Optional[float]:
        vals = []
        for r in records:
            v = r
            for k in path:
                v = v[k]
            if v is None:
                return None
            vals.append(v)
        return statistics.fmean(vals)

    return {
        "replicas": len(records),
        "reliability": mean_of(("reliability",)),
        "latency": {
            "mean_us": mean_of(("latency", "mean_us")),
            "median_us": mean_of(("latency", "median_us")),
            "p95_us": mean_of(("latency", "p95_us")),
        },
        "radio_on_us_total": mean_of(("radio_on_us_total",)),
        "radio_on_us_mean_per_node": mean_of(("radio_on_us_mean_per_node",)),
        "energy_mj_mean_per_node": mean_of(("energy_mj_mean_per_node",)),
    }


def run_scenario(scenario: Scenario) -> dict:
    """Execute every replica of a scenario and return the report dict."""
    scenario.validate()
    topology = scenario.build_topology()
    run = (_run_collection_replica if scenario.protocol == "collection"
           else _run_dissemination_replica)
    records = [run(scenario, topology, r) for r in range(scenario.replicas)]
    report = {
        "schema_version": SCHEMA_VERSION,
        "scenario": scenario.name,
        "seed": scenario.seed,
        "replicas": records,
        "aggregate": _aggregate(records),
    }
    return report


def segment_fast_utilization(scenario: Scenario, report: dict) -> list[dict]:
    """Per interference segment: mean fast-utilization of the epochs that
    start within it, averaged over replicas."""
    out = []
    for i, seg in enumerate(scenario.interference):
        lo, hi = int(seg["start_us"]), int(seg["end_us"])
        per_replica = []
        for rec in report["replicas"]:
            vals = [e["fast_utilization"] for e in rec["pattern_timeline"]
                    if lo <= e["start_us"] < hi]
            if vals:
                per_replica.append(statistics.fmean(vals))
        out.append({
            "segment": i, "level": seg["level"],
            "start_us": lo, "end_us": hi,
            "mean_fast_utilization": (statistics.fmean(per_replica)
                                      if per_replica else None),
        })
    return out


def run_dynamic_timeline(scenario: Scenario) -> dict:
    """Run a dynamic-controller scenario and attach the per-segment mean
    fast-utilization derived from the recorded pattern timeline."""
    if not scenario.dynamic:
        raise ScenarioInvalid("dynamic: run_dynamic_timeline needs a "
                              "dynamic-controller scenario")
    report = run_scenario(scenario)
    report["segment_fast_utilization"] = segment_fast_utilization(
        scenario, report)
    return report


# -- report output --------------------------------------------------------

_CSV_METRICS = ("reliability", "radio_on_us_total",
                "radio_on_us_mean_per_node", "energy_mj_mean_per_node")


def emit_report(report: dict, fmt: str = "json") -> bytes:
    """Serialize a report with stable field ordering."""
    if fmt == "json":
        return (json.dumps(report, sort_keys=True, indent=2) + "\n").encode()
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    lines = ["replica,metric,value"]
    for rec in report.get("replicas", ()):
        rid = rec["replica"]
        for m in _CSV_METRICS:
            lines.append(f"{rid},{m},{rec[m]}")
        for k, v in rec["latency"].items():
            lines.append(f"{rid},latency_{k},{v}")
    agg = report.get("aggregate") or {}
    if agg:
        for m in _CSV_METRICS:
            lines.append(f"aggregate,{m},{agg[m]}")
        for k, v in agg["latency"].items():
            lines.append(f"aggregate,latency_{k},{v}")
    return ("\n".join(lines) + "\n").encode()
