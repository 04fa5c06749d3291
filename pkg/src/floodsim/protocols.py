"""Network protocols over the flooding primitives.

One-to-all dissemination, Crystal-style collection (sync round plus
transmission/acknowledge pairs with empty-pair early exit), the random-NTX
and random-backoff contention extensions, and the late-ratio pattern
selector used by the dynamic multi-PHY controller.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Sequence

from .medium import InterferenceScenario, Role, Topology
from .middleware import (EpochSchedule, HookViolation, MphyPattern,
                         build_schedule, make_pattern, ROLE_A, ROLE_S, ROLE_T)
from .phy import PhyId, PhyMode, PHY_TABLE, slot_duration
from .primitives import RoundConfig, RoundResult, run_round

BACKOFF_PROBABILITY = 0.80

INITIATOR = "initiator"
FORWARDER = "forwarder"


class NoSources(ValueError):
    pass


@dataclass(frozen=True)
class LateRatioReport:
    expected_sources: int
    late_sources: int

    @property
    def ratio(self) -> float:
        return self.late_sources / self.expected_sources


def select_pattern(report: LateRatioReport, fast_phy: PhyId,
                   robust_phy: PhyId) -> MphyPattern:
    """Map the late-node ratio to a static multi-PHY pattern.

    [0, .25] -> MPHY75, (.25, .5] -> MPHY50, (.5, .75] -> MPHY25,
    (.75, 1] -> MPHY0.
    """
    if report.expected_sources <= 0:
        raise NoSources("expected_sources must be positive")
    r = report.ratio
    if r <= 0.25:
        name = "MPHY75"
    elif r <= 0.50:
        name = "MPHY50"
    elif r <= 0.75:
        name = "MPHY25"
    else:
        name = "MPHY0"
    return make_pattern(name, fast_phy, robust_phy)


def rntx_extension(config: RoundConfig, rng: random.Random) -> RoundConfig:
    """Draw the per-round transmission count uniformly from [ntx, 2*ntx]."""
    if 2 * config.ntx > config.nslots:
        raise HookViolation(
            f"rntx needs nslots >= 2*ntx, got ntx={config.ntx} "
            f"nslots={config.nslots}")
    return config.with_ntx(rng.randint(config.ntx, 2 * config.ntx))


def rntx_hook(config: RoundConfig, epoch_ctx, rng: random.Random) -> RoundConfig:
    return rntx_extension(config, rng)


def backoff_extension(source_has_data: bool, rng: random.Random,
                      probability: float = BACKOFF_PROBABILITY) -> str:
    """T-round role of a source: initiate with fixed probability, else
    forward (the data stays pending)."""
    if not source_has_data:
        return FORWARDER
    return INITIATOR if rng.random() < probability else FORWARDER


@dataclass(frozen=True)
class TrafficModel:
    mode: str                    # "aperiodic" | "periodic" | "none"
    window_us: int = 30_000_000  # aperiodic generation window
    period_us: int = 5_000_000   # periodic generation period
    payload_len: int = 8

    def generate(self, source: int, duration_us: int,
                 rng: random.Random) -> list[int]:
        """Generation instants for one source across the run."""
        if self.mode == "none":
            return []
        times = []
        if self.mode == "aperiodic":
            # One uniformly placed message per window per source.
            start = 0
            while start < duration_us:
                t = start + rng.randrange(self.window_us)
                if t < duration_us:
                    times.append(t)
                start += self.window_us
        elif self.mode == "periodic":
            # Grid with a per-source phase so sources do not burst in
            # lockstep.
            phase = rng.randrange(self.period_us)
            t = phase
            while t < duration_us:
                times.append(t)
                t += self.period_us
        else:
            raise ValueError(f"unknown traffic mode {self.mode!r}")
        return times


Message = tuple[int, int]  # (source, sequence number)


@dataclass
class CollectionState:
    """Mutable protocol state carried across collection epochs."""

    nta: int = 12
    exit_threshold: int = 4
    sink: int = 0
    window_us: int = 30_000_000
    pending: dict[int, deque] = field(default_factory=dict)
    generated_at: dict[Message, int] = field(default_factory=dict)
    delivered_at: dict[Message, int] = field(default_factory=dict)
    acked_at: dict[Message, int] = field(default_factory=dict)
    consecutive_empty_ta: int = 0
    sink_pattern: Optional[MphyPattern] = None
    node_pattern: dict[int, MphyPattern] = field(default_factory=dict)
    queue_pos: int = 0  # consumed prefix of the run's traffic queue

    def enqueue(self, msg: Message, t_gen: int) -> None:
        self.pending.setdefault(msg[0], deque()).append(msg)
        self.generated_at[msg] = t_gen

    def pending_sources(self) -> list[int]:
        return sorted(s for s, q in self.pending.items() if q)

    def late_report(self, sources: Sequence[int], now_us: int) -> LateRatioReport:
        late = 0
        for s in sources:
            q = self.pending.get(s)
            if not q:
                continue
            if any(m not in self.delivered_at
                   and now_us - self.generated_at[m] > self.window_us
                   for m in q):
                late += 1
        return LateRatioReport(len(sources), late)


@dataclass
class EpochMetrics:
    pairs_used: int = 0
    new_deliveries: int = 0
    radio_on_us: list[int] = field(default_factory=list)
    end_time_us: int = 0
    pattern_name: Optional[str] = None


@lru_cache(maxsize=None)
def _cached_schedule(nta: int, pattern: MphyPattern,
                     base: RoundConfig) -> EpochSchedule:
    return build_schedule(nta, pattern, base, epoch_period_us=0)


def single_phy_pattern(phy: PhyId) -> MphyPattern:
    return MphyPattern("MPHY0", 0, phy, phy)


def _add_radio(acc: list[int], result: RoundResult) -> None:
    for i, v in enumerate(result.radio_on_us):
        acc[i] += v


def run_dissemination_epoch(schedule: EpochSchedule, topology: Topology,
                            interference: Optional[InterferenceScenario],
                            rngs: Sequence[random.Random], *,
                            source: int, data_id, epoch_start_us: int = 0,
                            phy_table=None, lossless: bool = False,
                            trace: bool = False,
                            driver_hooks: Sequence = (),
                            plan_cache: Optional[dict] = None) -> RoundResult:
    """One-to-all broadcast: a single flood round per epoch."""
    role, base = schedule.rounds[0]
    cfg = replace(base, initiators=((source, data_id),))
    return run_round(cfg, topology, interference, epoch_start_us,
                     rngs=rngs, phy_table=phy_table, lossless=lossless,
                     trace=trace, driver_hooks=driver_hooks,
                     plan_cache=plan_cache)


def run_collection_epoch(state: CollectionState, topology: Topology,
                         traffic_queue: Sequence[tuple[int, Message]],
                         interference: Optional[InterferenceScenario],
                         rngs: Sequence[random.Random], *,
                         base: RoundConfig, epoch_index: int,
                         epoch_start_us: int,
                         phy_table: Optional[dict[PhyId, PhyMode]] = None,
                         lossless: bool = False,
                         backoff: bool = False,
                         driver_hooks: Sequence = (),
                         plan_cache: Optional[dict] = None,
                         ) -> EpochMetrics:
    """One collection epoch: S round, then TA pairs until NTA pairs have
    run or the exit threshold of consecutive empty pairs is reached.

    ``traffic_queue`` is the time-sorted list of (t_gen, message) for the
    whole run; messages join the pending queues as simulated time passes
    their generation instant.  Returns per-epoch metrics; ``state`` is
    updated in place.
    """
    table = phy_table or PHY_TABLE
    n = topology.node_count
    sink = state.sink
    pattern = state.sink_pattern
    metrics = EpochMetrics(radio_on_us=[0] * n,
                           pattern_name=pattern.name if pattern else None)
    t = epoch_start_us

    def admit(now_us: int) -> None:
        while (state.queue_pos < len(traffic_queue)
               and traffic_queue[state.queue_pos][0] <= now_us):
            t_gen, msg = traffic_queue[state.queue_pos]
            state.enqueue(msg, t_gen)
            state.queue_pos += 1

    schedule = _cached_schedule(state.nta, pattern, base)

    # S round: sink floods sync data carrying the current pattern; nodes
    # that decode it adopt the pattern for this epoch, others keep a
    # possibly stale one.
    _, s_cfg = schedule.rounds[0]
    s_cfg = s_cfg.with_initiators(((sink, ("sync", epoch_index)),))
    res = run_round(s_cfg, topology, interference, t, rngs=rngs,
                    phy_table=table, lossless=lossless,
                    driver_hooks=driver_hooks, plan_cache=plan_cache)
    for node in res.received:
        state.node_pattern[node] = pattern
    _add_radio(metrics.radio_on_us, res)
    t += res.duration_us

    state.consecutive_empty_ta = 0
    sources = topology.nodes_with_role(Role.SOURCE)

    for pair in range(state.nta):
        admit(t)
        pair_phy = pattern.pair_phy(pair)
        participants = [
            state.node_pattern.get(node, pattern).pair_phy(pair) == pair_phy
            for node in range(n)
        ]
        participants[sink] = True

        initiators = []
        for src in state.pending_sources():
            if not participants[src]:
                continue
            if backoff:
                role = backoff_extension(True, rngs[src])
                if role != INITIATOR:
                    continue
            initiators.append((src, state.pending[src][0]))

        t_cfg = schedule.rounds[1 + 2 * pair][1].with_initiators(
            tuple(initiators))
        res_t = run_round(t_cfg, topology, interference, t, rngs=rngs,
                          phy_table=table, lossless=lossless,
                          driver_hooks=driver_hooks, plan_cache=plan_cache)
        _add_radio(metrics.radio_on_us, res_t)
        slot_us = res_t.duration_us // t_cfg.nslots

        # The pair counts as empty only when the sink heard nothing at
        # all: any audible transmitter (even an undecodable collision)
        # keeps the epoch alive.
        sens = table[t_cfg.phy].sensitivity_dbm
        activity = any(
            c > 0 and topology.rss_dbm[i, sink] >= sens
            for i, c in res_t.tx_counts.items())

        decoded = res_t.received.get(sink)
        new_data = False
        ack_msg: Optional[Message] = None
        if decoded is not None:
            ack_msg = decoded
            if decoded not in state.delivered_at:
                decode_slot = res_t.first_rx_slot.get(sink, 0)
                state.delivered_at[decoded] = t + (decode_slot + 1) * slot_us
                new_data = True
                metrics.new_deliveries += 1
        t += res_t.duration_us

        # A round: sink floods an ack naming the decoded message (or an
        # explicit empty marker).
        a_cfg = schedule.rounds[2 + 2 * pair][1].with_initiators(
            ((sink, ("ack", ack_msg)),))
        res_a = run_round(a_cfg, topology, interference, t, rngs=rngs,
                          phy_table=table, lossless=lossless,
                          driver_hooks=driver_hooks, plan_cache=plan_cache)
        _add_radio(metrics.radio_on_us, res_a)
        a_slot_us = res_a.duration_us // a_cfg.nslots
        if ack_msg is not None:
            src = ack_msg[0]
            if res_a.received.get(src) == ("ack", ack_msg):
                q = state.pending.get(src)
                if q and ack_msg in q:
                    q.remove(ack_msg)
                if ack_msg not in state.acked_at:
                    ack_slot = res_a.first_rx_slot.get(src, 0)
                    state.acked_at[ack_msg] = t + (ack_slot + 1) * a_slot_us
        t += res_a.duration_us

        metrics.pairs_used += 1
        if new_data or activity:
            state.consecutive_empty_ta = 0
        else:
            state.consecutive_empty_ta += 1
            if state.consecutive_empty_ta >= state.exit_threshold:
                break

    metrics.end_time_us = t
    return metrics
