"""Per-node slot execution mirroring the interrupt-driven radio driver.

Each slot runs the event sequence ramp-up -> ADDRESS -> HOP -> END for a
successful receive, with an END-MISS timer guard when no preamble is ever
detected.  The slot logs feed the energy model.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .medium import FailReason, ReceptionOutcome
from .phy import (END_MISS_GUARD_US, RADIO_RAMPUP_US, PhyMode, _ceil_div,
                  airtime)


class EventKind(str, Enum):
    RRU_DONE = "RRU_DONE"
    ADDRESS = "ADDRESS"
    READY = "READY"
    HOP = "HOP"
    END = "END"
    END_MISS = "END_MISS"
    TIMER = "TIMER"


@dataclass(frozen=True)
class SlotEvent:
    kind: EventKind
    time_us: int  # offset within the slot


class RadioState(str, Enum):
    OFF = "Off"
    RAMP_UP = "RampUp"
    RX_LISTEN = "RxListen"
    RX_ACTIVE = "RxActive"
    TX_ACTIVE = "TxActive"


class SlotAction(str, Enum):
    TX = "Tx"
    RX_SUCCESS = "RxSuccess"
    RX_FAIL = "RxFail"
    IDLE = "Idle"


@dataclass(frozen=True)
class NodeSlotLog:
    node: int
    slot_index: int
    action: SlotAction
    radio_on_us: int
    channel: int
    phy: str


class EmptySequence(ValueError):
    pass


def hop_channel(sequence, slot_index: int) -> int:
    """Channel for a global slot index; all nodes hop in lockstep."""
    if not sequence:
        raise EmptySequence("channel sequence must be non-empty")
    return sequence[slot_index % len(sequence)]


def address_offset_us(phy: PhyMode) -> int:
    """Slot offset of the ADDRESS event (end of preamble + sync word)."""
    bits = phy.preamble_bits + phy.sync_bits
    return RADIO_RAMPUP_US + _ceil_div(bits * 1_000_000, phy.bitrate)


def listen_radio_on_us(phy: PhyMode, payload_len: int,
                       silent: bool) -> int:
    """Radio-on time of a listen slot.

    A slot with detectable signal energy is charged through the frame END;
    a silent slot is capped at the END-MISS guard.
    """
    on = RADIO_RAMPUP_US + airtime(phy, payload_len)
    if silent:
        on += END_MISS_GUARD_US
    return on


def tx_radio_on_us(phy: PhyMode, payload_len: int) -> int:
    return RADIO_RAMPUP_US + airtime(phy, payload_len)


def run_slot(node: int, slot_index: int, decision: str,
             medium_result: Optional[ReceptionOutcome],
             phy: PhyMode, payload_len: int,
             channel: int = 0) -> tuple[NodeSlotLog, list[SlotEvent]]:
    """Execute one slot for one node and return its log and event trace.

    ``decision`` is 'tx', 'listen' or 'sleep', fixed before slot start.
    For 'listen' the already-resolved medium outcome must be supplied.
    """
    if decision == "sleep":
        log = NodeSlotLog(node, slot_index, SlotAction.IDLE, 0, channel,
                          phy.id.value)
        return log, []

    end = RADIO_RAMPUP_US + airtime(phy, payload_len)
    if decision == "tx":
        events = [
            SlotEvent(EventKind.RRU_DONE, RADIO_RAMPUP_US),
            # READY gates hardware tx start; logged, drives no transition.
            SlotEvent(EventKind.READY, RADIO_RAMPUP_US),
            SlotEvent(EventKind.END, end),
        ]
        log = NodeSlotLog(node, slot_index, SlotAction.TX,
                          tx_radio_on_us(phy, payload_len), channel,
                          phy.id.value)
        return log, events

    if decision != "listen":
        raise ValueError(f"unknown decision {decision!r}")
    if medium_result is None:
        raise ValueError("listen slot requires a medium outcome")

    silent = medium_result.reason in (FailReason.SILENCE,
                                      FailReason.BELOW_SENSITIVITY)
    if silent:
        # No preamble ever detected: timer-guarded END MISS.
        miss_at = end + END_MISS_GUARD_US
        events = [
            SlotEvent(EventKind.RRU_DONE, RADIO_RAMPUP_US),
            SlotEvent(EventKind.END_MISS, miss_at),
        ]
        log = NodeSlotLog(node, slot_index, SlotAction.RX_FAIL, miss_at,
                          channel, phy.id.value)
        return log, events

    addr = address_offset_us(phy)
    hop = addr + (end - addr) // 2
    events = [
        SlotEvent(EventKind.RRU_DONE, RADIO_RAMPUP_US),
        SlotEvent(EventKind.ADDRESS, addr),
        SlotEvent(EventKind.HOP, hop),
        SlotEvent(EventKind.END, end),
    ]
    action = (SlotAction.RX_SUCCESS if medium_result.decoded
              else SlotAction.RX_FAIL)
    log = NodeSlotLog(node, slot_index, action, end, channel, phy.id.value)
    return log, events
