"""Flooding-round primitives: Glossy and RoF relay rules over one round.

A round is nslots synchronized slots on a shared channel-hopping grid.
Glossy relays in a reception-triggered Rx-Tx-Rx-Tx alternation; RoF relays
time-triggered with a contiguous burst of transmissions after the first
reception.  Both relay the first data decoded and ignore later decodes
within the round.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from . import driver
from .driver import NodeSlotLog, hop_channel
from .medium import (FailReason, InterferenceScenario, ReceptionOutcome,
                     SILENCE, Topology, TransmissionAttempt, execute_plan,
                     jam_sample, plan_reception)
from .phy import DEFAULT_PROC_GAP_US, PhyId, PhyMode, PHY_TABLE, slot_duration

GLOSSY = "glossy"
ROF = "rof"

_NEG_INF = float("-inf")
_SILENT_FAILS = (FailReason.SILENCE, FailReason.BELOW_SENSITIVITY)


class ConfigInvalid(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class RoundConfig:
    primitive: str
    phy: PhyId
    ntx: int
    nslots: int
    tx_power_dbm: float = 0.0
    channel_sequence: tuple[int, ...] = (0,)
    initiators: tuple[tuple[int, object], ...] = ()
    payload_len: int = 8
    proc_gap_us: int = DEFAULT_PROC_GAP_US

    def _copy_with(self, field_name: str, value) -> "RoundConfig":
        new = object.__new__(RoundConfig)
        for name in RoundConfig.__slots__:
            object.__setattr__(new, name, getattr(self, name))
        object.__setattr__(new, field_name, value)
        return new

    def with_ntx(self, ntx: int) -> "RoundConfig":
        """Copy with a different transmission count (hot path; avoids
        dataclasses.replace overhead)."""
        if ntx == self.ntx:
            return self
        return self._copy_with("ntx", ntx)

    def with_initiators(self,
                        initiators: tuple[tuple[int, object], ...]
                        ) -> "RoundConfig":
        return self._copy_with("initiators", initiators)

    def validate(self) -> None:
        if self.primitive not in (GLOSSY, ROF):
            raise ConfigInvalid(f"unknown primitive {self.primitive!r}")
        if self.nslots < 1:
            raise ConfigInvalid("nslots must be >= 1")
        if not 1 <= self.ntx <= self.nslots:
            raise ConfigInvalid("need 1 <= ntx <= nslots")
        if not self.channel_sequence:
            raise ConfigInvalid("channel_sequence must be non-empty")
        if self.payload_len < 0:
            raise ConfigInvalid("payload_len must be >= 0")


@dataclass
class RoundResult:
    received: dict[int, object]
    first_rx_slot: dict[int, int]
    tx_counts: dict[int, int]
    radio_on_us: list[int]
    logs: list[NodeSlotLog] = field(default_factory=list)
    duration_us: int = 0


def _tx_slots(glossy: bool, first_slot: int, ntx: int,
              nslots: int) -> list[int]:
    if glossy:
        return [s for s in range(first_slot, nslots, 2)][:ntx]
    return list(range(first_slot, min(first_slot + ntx, nslots)))


def _run_slots_traced(config, participants, data, off_after, first_rx,
                      tx_at, tx_counts, radio_on, logs, rss, phy,
                      tx_on, listen_on, miss_on, make_plan_key, resolve,
                      on_decode) -> None:
    """Slot loop with full per-node driver logs (trace mode)."""
    n = len(participants)
    payload = config.payload_len
    for s in range(config.nslots):
        channel = hop_channel(config.channel_sequence, s)
        txs = tx_at[s]
        tx_set = set(txs)
        plan_key = make_plan_key(txs) if txs else None
        attempts = None
        for node in range(n):
            if not participants[node]:
                logs.append(driver.run_slot(node, s, "sleep", None, phy,
                                            payload, channel)[0])
                continue
            if node in tx_set:
                tx_counts[node] += 1
                radio_on[node] += tx_on
                logs.append(driver.run_slot(node, s, "tx", None, phy,
                                            payload, channel)[0])
                continue
            has_data = data[node] is not None
            if has_data and s > off_after[node]:
                logs.append(driver.run_slot(node, s, "sleep", None, phy,
                                            payload, channel)[0])
                continue
            audible = any(rss[t, node] != _NEG_INF for t in txs)
            if has_data:
                # Passive listen between transmissions; the decode result
                # is ignored (first-decode-wins) but energy accrues.
                radio_on[node] += listen_on if audible else miss_on
                res = (ReceptionOutcome(data_id=data[node]) if audible
                       else SILENCE)
                logs.append(driver.run_slot(node, s, "listen", res, phy,
                                            payload, channel)[0])
                continue
            if not audible:
                radio_on[node] += miss_on
                logs.append(driver.run_slot(node, s, "listen", SILENCE, phy,
                                            payload, channel)[0])
                continue
            outcome, attempts = resolve(node, s, txs, plan_key, attempts)
            silent = outcome.reason in (FailReason.SILENCE,
                                        FailReason.BELOW_SENSITIVITY)
            radio_on[node] += miss_on if silent else listen_on
            if outcome.data_id is not None:
                on_decode(node, s, outcome)
            logs.append(driver.run_slot(node, s, "listen", outcome, phy,
                                        payload, channel)[0])


def run_round(config: RoundConfig, topology: Topology,
              interference: Optional[InterferenceScenario] = None,
              start_time: int = 0, *,
              rngs: Sequence[random.Random],
              phy_table: Optional[dict[PhyId, PhyMode]] = None,
              participants: Optional[Sequence[bool]] = None,
              lossless: bool = False,
              trace: bool = False,
              driver_hooks: Sequence[Callable] = (),
              plan_cache: Optional[dict] = None) -> RoundResult:
    """Execute one flooding round and return per-node results.

    ``rngs`` supplies one deterministic stream per node.  ``participants``
    masks nodes that sit the round out entirely (e.g. stale multi-PHY
    configuration); masked nodes keep their radio off.  ``driver_hooks``
    are applied per node before the round starts and may adjust the number
    of transmissions (the random-NTX mechanism).
    """
    config.validate()
    n = topology.node_count
    for node, _ in config.initiators:
        if not 0 <= node < n:
            raise ConfigInvalid(f"initiator {node} not in topology")
    phy = (phy_table or PHY_TABLE)[config.phy]
    if config.payload_len > phy.max_payload:
        raise ConfigInvalid("payload exceeds PHY maximum")

    if participants is None:
        participants = [True] * n

    eff_ntx = [config.ntx] * n
    if driver_hooks:
        from .middleware import apply_extensions
        for node in range(n):
            if participants[node]:
                eff_ntx[node] = apply_extensions(
                    driver_hooks, config, None, rngs[node]).ntx

    slot_us = slot_duration(phy, config.payload_len, config.proc_gap_us)
    tx_on = driver.tx_radio_on_us(phy, config.payload_len)
    listen_on = driver.listen_radio_on_us(phy, config.payload_len, False)
    miss_on = driver.listen_radio_on_us(phy, config.payload_len, True)

    glossy = config.primitive == GLOSSY
    nslots = config.nslots
    data: list = [None] * n
    first_rx: dict[int, int] = {}
    tx_counts = [0] * n
    radio_on = [0] * n
    tx_at: list[list[int]] = [[] for _ in range(nslots)]
    # Slot index after which a data-holding node switches its radio off;
    # a glossy node whose ntx was clipped keeps alternating to round end.
    off_after = [-1] * n
    logs: list[NodeSlotLog] = []

    def schedule(node: int, first_slot: int) -> None:
        slots = _tx_slots(glossy, first_slot, eff_ntx[node], nslots)
        for s in slots:
            tx_at[s].append(node)
        if not slots:
            off_after[node] = first_slot - 1
        elif glossy and len(slots) < eff_ntx[node]:
            off_after[node] = nslots
        else:
            off_after[node] = slots[-1]

    for node, data_id in config.initiators:
        if not participants[node]:
            continue
        data[node] = data_id
        schedule(node, 0)

    rss = topology.rss_dbm
    power = config.tx_power_dbm
    jam_active = interference is not None and any(
        seg.level != "none" for seg in interference.segments)

    def make_plan_key(txs: list[int]):
        if plan_cache is None:
            return None
        # Plans depend only on who transmits and how the data ids
        # partition the transmitters, so key on the transmitter list plus
        # each transmitter's data group (in order of first appearance).
        groups: dict = {}
        labels = []
        for t in txs:
            d = data[t]
            g = groups.get(d)
            if g is None:
                g = groups[d] = len(groups)
            labels.append(g)
        return (config.phy, power, tuple(txs), tuple(labels))

    def get_plan(node: int, s: int, txs: list[int], plan_key,
                 attempts: Optional[list]):
        """One listener's slot plan (jam draw plus cached reception plan)."""
        jam = None
        if jam_active:
            jam = jam_sample(interference, start_time + s * slot_us, node,
                             rngs[node])
        plan = None
        if plan_key is not None:
            key = (plan_key, node, jam)
            plan = plan_cache.get(key)
        if plan is None:
            if attempts is None:
                attempts = [TransmissionAttempt(t, 0, config.phy, power,
                                                data[t], s) for t in txs]
            plan = plan_reception(topology, node, attempts, jam, phy,
                                  lossless)
            if plan_key is not None:
                plan_cache[(plan_key, node, jam)] = plan
        return plan, attempts

    def resolve(node: int, s: int, txs: list[int], plan_key,
                attempts: Optional[list]) -> tuple[ReceptionOutcome, Optional[list]]:
        plan, attempts = get_plan(node, s, txs, plan_key, attempts)
        return execute_plan(plan, rngs[node], data.__getitem__), attempts

    def on_decode(node: int, s: int, outcome: ReceptionOutcome) -> None:
        data[node] = outcome.data_id
        first_rx[node] = s
        if s + 1 < nslots:
            schedule(node, s + 1)
        else:
            off_after[node] = s

    if trace:
        _run_slots_traced(config, participants, data, off_after, first_rx,
                          tx_at, tx_counts, radio_on, logs, rss, phy,
                          tx_on, listen_on, miss_on, make_plan_key, resolve,
                          on_decode)
    else:
        # Fast path: only undecided listeners need per-slot processing;
        # transmit and passive-listen energy is deterministic and is
        # charged after the loop.
        active = [i for i in range(n)
                  if participants[i] and data[i] is None]
        for s in range(nslots):
            if not active:
                # Every listener has decoded; the rest of the round only
                # contributes transmit energy, charged below.
                break
            txs = tx_at[s]
            if not txs:
                # Silent slot (no jam draw, keeping rng streams aligned
                # with the traced path, which also skips it).
                for node in active:
                    radio_on[node] += miss_on
                continue
            plan_key = make_plan_key(txs)
            attempts = None
            decoded_any = False
            for node in active:
                audible = False
                for t in txs:
                    if rss[t, node] != _NEG_INF:
                        audible = True
                        break
                if not audible:
                    radio_on[node] += miss_on
                    continue
                plan, attempts = get_plan(node, s, txs, plan_key, attempts)
                tag = plan[0]
                if tag == "decode":
                    radio_on[node] += listen_on
                    winner = data[plan[1]]
                elif tag == "fail":
                    radio_on[node] += (miss_on if plan[1] in _SILENT_FAILS
                                       else listen_on)
                    continue
                else:
                    outcome = execute_plan(plan, rngs[node],
                                           data.__getitem__)
                    radio_on[node] += listen_on
                    if outcome.data_id is None:
                        continue
                    winner = outcome.data_id
                data[node] = winner
                first_rx[node] = s
                if s + 1 < nslots:
                    schedule(node, s + 1)
                else:
                    off_after[node] = s
                decoded_any = True
            if decoded_any:
                active = [i for i in active if data[i] is None]

        for s, txs in enumerate(tx_at):
            for t in txs:
                tx_counts[t] += 1
                radio_on[t] += tx_on

        if glossy:
            # Passive listens between a relay's transmissions: decode
            # results are ignored (first-decode-wins) but energy accrues.
            for node in range(n):
                if not participants[node] or data[node] is None:
                    continue
                fs = 0 if node not in first_rx else first_rx[node] + 1
                own = set(_tx_slots(True, fs, eff_ntx[node], nslots))
                stop = min(off_after[node], nslots - 1)
                for u in range(fs, stop + 1):
                    if u in own:
                        continue
                    uts = tx_at[u]
                    audible = bool(uts) and any(
                        rss[t, node] != _NEG_INF for t in uts)
                    radio_on[node] += listen_on if audible else miss_on

    received = {i: data[i] for i in range(n) if data[i] is not None}
    return RoundResult(
        received=received,
        first_rx_slot=dict(first_rx),
        tx_counts={i: c for i, c in enumerate(tx_counts)},
        radio_on_us=radio_on,
        logs=logs,
        duration_us=nslots * slot_us,
    )
