"""Slot-level reception model: capture, beating, jamming.

The model is stochastic but calibrated, not waveform-accurate.  Concurrent
same-data transmissions reinforce (interference term is jammer + noise
only) but pay a per-extra-transmitter beating penalty; different-data
transmissions are resolved by a hard capture threshold on the strongest
signal versus the linear sum of everything else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .phy import PhyId, PhyMode

# Thermal noise floor of the model, dBm.
NOISE_FLOOR_DBM = -100.0

# Soft edge half-width of the SINR link function, dB.
LINK_EDGE_DB = 3.0

DISCONNECTED = float("-inf")


class FailReason(str, Enum):
    SILENCE = "Silence"
    BELOW_SENSITIVITY = "BelowSensitivity"
    CAPTURE_FAIL = "CaptureFail"
    BEATING_LOSS = "BeatingLoss"
    JAMMED = "Jammed"


@dataclass(frozen=True, slots=True)
class ReceptionOutcome:
    data_id: Optional[object] = None
    reason: Optional[FailReason] = None

    @property
    def decoded(self) -> bool:
        return self.data_id is not None


SILENCE = ReceptionOutcome(reason=FailReason.SILENCE)


@dataclass(frozen=True, slots=True)
class TransmissionAttempt:
    tx_node: int
    channel: int
    phy: PhyId
    power_dbm: float
    data_id: object
    slot_index: int


class Role(str, Enum):
    SOURCE = "source"
    DESTINATION = "destination"
    FORWARDER = "forwarder"


@dataclass
class Topology:
    """Node set with a pairwise RSS matrix at 0 dBm transmit power.

    ``rss_dbm[i, j]`` is the signal strength of node i heard at node j;
    -inf marks a disconnected link.  Symmetric unless explicitly built
    otherwise.
    """

    rss_dbm: np.ndarray
    roles: list[Role]
    names: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.rss_dbm = np.asarray(self.rss_dbm, dtype=float)
        n = self.rss_dbm.shape[0]
        if self.rss_dbm.shape != (n, n):
            raise ValueError("rss_dbm must be square")
        if len(self.roles) != n:
            raise ValueError("one role per node required")
        if not self.names:
            self.names = [f"n{i}" for i in range(n)]
        # Linear powers in mW, precomputed for the hot path.
        with np.errstate(over="ignore"):
            self.rss_mw = np.power(10.0, self.rss_dbm / 10.0)
        self.rss_mw[~np.isfinite(self.rss_dbm)] = 0.0

    @property
    def node_count(self) -> int:
        return self.rss_dbm.shape[0]

    def nodes_with_role(self, role: Role) -> list[int]:
        return [i for i, r in enumerate(self.roles) if r == role]


def log_distance_rss(coords: Sequence[Sequence[float]],
                     exponent: float = 3.0,
                     ref_loss_db: float = 40.0) -> np.ndarray:
    """Pairwise RSS at 0 dBm tx from coordinates via log-distance path loss.

    RSS(d) = -ref_loss_db - 10 * exponent * log10(d), d in metres (d >= 0.1).
    """
    pts = np.asarray(coords, dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=-1))
    np.fill_diagonal(dist, 1.0)
    dist = np.maximum(dist, 0.1)
    rss = -ref_loss_db - 10.0 * exponent * np.log10(dist)
    np.fill_diagonal(rss, DISCONNECTED)
    return rss


@dataclass(frozen=True)
class InterferenceSegment:
    start_us: int
    end_us: int
    level: str  # none | mild | strong


# Calibration defaults for the named jamming levels: power at every
# receiver and per-slot duty cycle.
JAM_LEVELS: dict[str, tuple[Optional[float], float]] = {
    "none": (None, 0.0),
    "mild": (-75.0, 0.5),
    "strong": (-60.0, 1.0),
}


@dataclass
class InterferenceScenario:
    segments: list[InterferenceSegment] = field(default_factory=list)
    levels: dict[str, tuple[Optional[float], float]] = field(
        default_factory=lambda: dict(JAM_LEVELS))

    def __post_init__(self) -> None:
        segs = sorted(self.segments, key=lambda s: s.start_us)
        for a, b in zip(segs, segs[1:]):
            if b.start_us < a.end_us:
                raise ValueError("interference segments overlap")
        self.segments = segs

    def level_at(self, time_us: int) -> str:
        for seg in self.segments:
            if seg.start_us <= time_us < seg.end_us:
                return seg.level
        return "none"

    def params_at(self, time_us: int) -> tuple[Optional[float], float]:
        return self.levels[self.level_at(time_us)]


def jam_sample(scenario: Optional[InterferenceScenario], time_us: int,
               rx_node: int, rng) -> Optional[float]:
    """Jammer power at a receiver for one slot, or None when absent.

    Level 'none' never consumes randomness, keeping rng streams aligned
    across interference-free scenarios.
    """
    if scenario is None:
        return None
    power, duty = scenario.params_at(time_us)
    if power is None or duty <= 0.0:
        return None
    if duty >= 1.0 or rng.random() < duty:
        return power
    return None


def _db_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def _mw_to_db(mw: float) -> float:
    return 10.0 * math.log10(mw)


def link_probability(sinr_db: float, margin_db: float) -> float:
    """Step-with-soft-edge link function around the capture margin."""
    lo = margin_db - LINK_EDGE_DB
    hi = margin_db + LINK_EDGE_DB
    if sinr_db >= hi:
        return 1.0
    if sinr_db <= lo:
        return 0.0
    return (sinr_db - lo) / (hi - lo)


_NOISE_MW = _db_to_mw(NOISE_FLOOR_DBM)

# A reception plan captures everything deterministic about a slot's
# resolution so the round engine can cache it across slots (and rounds)
# with the same transmitter/data grouping.  Plans name the winning
# transmitter, not its data, so one plan serves every round in which the
# same nodes contend with the same data partition.  Forms:
#   ("fail", reason)
#   ("decode", winner_tx_node)
#   ("stoch", p_sig, p_beat, winner_tx_node, fail_reason_for_sig_draw)
ReceptionPlan = tuple


def plan_reception(topology: Topology, rx_node: int,
                   attempts: Sequence[TransmissionAttempt],
                   jam_power_dbm: Optional[float],
                   phy: PhyMode,
                   lossless: bool = False) -> ReceptionPlan:
    if not attempts:
        return ("fail", FailReason.SILENCE)

    rss_col = topology.rss_dbm[:, rx_node]
    best = None
    best_rss = DISCONNECTED
    powers = []
    for a in attempts:
        p = rss_col[a.tx_node] + a.power_dbm
        if p == DISCONNECTED:
            continue
        powers.append((p, a))
        if p > best_rss or (p == best_rss and best is not None
                            and a.tx_node < best.tx_node):
            best_rss, best = p, a
    if best is None:
        return ("fail", FailReason.SILENCE)

    if lossless:
        return ("decode", best.tx_node)

    if best_rss < phy.sensitivity_dbm:
        return ("fail", FailReason.BELOW_SENSITIVITY)

    jam_mw = _db_to_mw(jam_power_dbm) if jam_power_dbm is not None else 0.0
    margin = phy.capture_margin_db

    same_data = all(a.data_id == best.data_id for _, a in powers)
    if same_data:
        sinr = best_rss - _mw_to_db(jam_mw + _NOISE_MW)
        p_sig = link_probability(sinr, margin)
        sig_fail = (FailReason.JAMMED if jam_mw > _NOISE_MW
                    else FailReason.CAPTURE_FAIL)
        if p_sig == 0.0:
            return ("fail", sig_fail)
        p_beat = phy.beating_penalty ** (len(powers) - 1)
        if p_sig >= 1.0 and p_beat >= 1.0:
            return ("decode", best.tx_node)
        return ("stoch", p_sig, p_beat, best.tx_node, sig_fail)

    # Different-data contention: hard capture threshold on the strongest
    # attempt versus the linear sum of all attempts carrying other data
    # (same-data co-transmitters reinforce rather than interfere).
    interf_mw = sum(_db_to_mw(p) for p, a in powers
                    if a.data_id != best.data_id)
    if best_rss < _mw_to_db(interf_mw + jam_mw + _NOISE_MW) + margin:
        return ("fail", FailReason.CAPTURE_FAIL)
    n_same = sum(1 for _, a in powers if a.data_id == best.data_id)
    p_beat = phy.beating_penalty ** (n_same - 1)
    if p_beat >= 1.0:
        return ("decode", best.tx_node)
    return ("stoch", 1.0, p_beat, best.tx_node, FailReason.CAPTURE_FAIL)


def execute_plan(plan: ReceptionPlan, rng, data_of) -> ReceptionOutcome:
    """Resolve a plan; ``data_of`` maps a tx node to its current data."""
    kind = plan[0]
    if kind == "decode":
        return ReceptionOutcome(data_id=data_of(plan[1]))
    if kind == "fail":
        return ReceptionOutcome(reason=plan[1])
    _, p_sig, p_beat, winner, sig_fail = plan
    if p_sig < 1.0 and rng.random() >= p_sig:
        return ReceptionOutcome(reason=sig_fail)
    if p_beat < 1.0 and rng.random() >= p_beat:
        return ReceptionOutcome(reason=FailReason.BEATING_LOSS)
    return ReceptionOutcome(data_id=data_of(winner))


def resolve_reception(topology: Topology, rx_node: int,
                      attempts: Sequence[TransmissionAttempt],
                      jam_power_dbm: Optional[float],
                      phy: PhyMode, rng,
                      lossless: bool = False) -> ReceptionOutcome:
    """Decide whether ``rx_node`` decodes anything this slot.

    ``attempts`` must already be filtered to the receiver's channel and
    PHY.  Total function: never raises for in-contract inputs.
    """
    plan = plan_reception(topology, rx_node, attempts, jam_power_dbm, phy,
                          lossless)
    data_map = {a.tx_node: a.data_id for a in attempts}
    return execute_plan(plan, rng, data_map.get)
