"""Physical layer catalog and framing arithmetic.

All durations are integer microseconds. Airtime is computed from per-PHY
framing constants (preamble, sync word, header, CRC, FEC overhead); the
constants follow the public BLE 5 and IEEE 802.15.4 framing and are pinned
by tests against the table in docs/framing_table.md.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum


class PhyId(str, Enum):
    IEEE802154 = "IEEE802154"
    BLE_2M = "BLE_2M"
    BLE_1M = "BLE_1M"
    BLE_500K = "BLE_500K"
    BLE_125K = "BLE_125K"


# Application header carried in every frame.  Back-derived from the
# 255 - 248 = 7 byte gap between the BLE MTU and the largest app payload,
# and cross-checked against 127 - 2 - 118 for IEEE 802.15.4.
APP_HEADER_BYTES = 7

# Radio ramp-up before any slot activity.
RADIO_RAMPUP_US = 40

# Processing gap appended to every slot (configurable per scenario).
DEFAULT_PROC_GAP_US = 100

# Listen-slot guard after the expected frame end before declaring END MISS.
END_MISS_GUARD_US = 40


class PayloadTooLarge(ValueError):
    """Payload exceeds the PHY's maximum application payload."""


@dataclass(frozen=True)
class PhyMode:
    """One physical layer mode with framing and robustness parameters.

    Immutable after construction; safe to share between concurrent readers.
    ``coding_overhead`` multiplies the on-air bits of header+payload+CRC
    (coded PHYs); preamble and sync bits are sent at the base symbol rate.
    """

    id: PhyId
    bitrate: int                # bits/second of the (coded) payload portion
    preamble_bits: int
    sync_bits: int              # access address / SFD, pre-expanded if coded
    header_bits: int
    crc_bits: int
    coding_overhead: int        # >= 1
    max_payload: int            # bytes of application data
    capture_margin_db: float
    beating_penalty: float      # in (0, 1]
    sensitivity_dbm: float

    def __post_init__(self) -> None:
        if self.bitrate <= 0:
            raise ValueError("bitrate must be positive")
        if self.max_payload <= 0:
            raise ValueError("max_payload must be positive")
        if not 0.0 < self.beating_penalty <= 1.0:
            raise ValueError("beating_penalty must be in (0, 1]")
        if self.capture_margin_db < 0:
            raise ValueError("capture_margin_db must be >= 0")
        if self.coding_overhead < 1:
            raise ValueError("coding_overhead must be >= 1")


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


# Framing constants per PHY.  The coded BLE PHYs run a 1 Msym/s base rate;
# their access address is always coded at S=8 and is stored pre-expanded
# (32 x 8 = 256 bits).  Calibration constants (capture margin, beating
# penalty, sensitivity) are model defaults and may be overridden per
# scenario.
PHY_TABLE: dict[PhyId, PhyMode] = {
    PhyId.IEEE802154: PhyMode(
        id=PhyId.IEEE802154, bitrate=250_000,
        preamble_bits=32, sync_bits=8, header_bits=8, crc_bits=16,
        coding_overhead=1, max_payload=118,
        capture_margin_db=4.0, beating_penalty=0.95, sensitivity_dbm=-100.0,
    ),
    PhyId.BLE_2M: PhyMode(
        id=PhyId.BLE_2M, bitrate=2_000_000,
        preamble_bits=16, sync_bits=32, header_bits=16, crc_bits=24,
        coding_overhead=1, max_payload=248,
        capture_margin_db=3.0, beating_penalty=0.80, sensitivity_dbm=-92.0,
    ),
    PhyId.BLE_1M: PhyMode(
        id=PhyId.BLE_1M, bitrate=1_000_000,
        preamble_bits=8, sync_bits=32, header_bits=16, crc_bits=24,
        coding_overhead=1, max_payload=248,
        capture_margin_db=8.0, beating_penalty=0.85, sensitivity_dbm=-95.0,
    ),
    PhyId.BLE_500K: PhyMode(
        id=PhyId.BLE_500K, bitrate=1_000_000,
        preamble_bits=80, sync_bits=256, header_bits=16, crc_bits=24,
        coding_overhead=2, max_payload=248,
        capture_margin_db=3.0, beating_penalty=0.97, sensitivity_dbm=-99.0,
    ),
    PhyId.BLE_125K: PhyMode(
        id=PhyId.BLE_125K, bitrate=1_000_000,
        preamble_bits=80, sync_bits=256, header_bits=16, crc_bits=24,
        coding_overhead=8, max_payload=248,
        capture_margin_db=3.0, beating_penalty=0.98, sensitivity_dbm=-103.0,
    ),
}


def get_phy(phy_id: PhyId | str) -> PhyMode:
    return PHY_TABLE[PhyId(phy_id)]


def override_phy(phy: PhyMode, **fields) -> PhyMode:
    """Return a copy of ``phy`` with calibration fields replaced."""
    return replace(phy, **fields)


def airtime(phy: PhyMode, payload_len: int) -> int:
    """On-air time of one frame in whole microseconds (rounded up).

    Uncoded preamble/sync bits plus the FEC-expanded header, app header,
    payload, and CRC.  Exact integer arithmetic; bit-identical on repeat.
    """
    if payload_len < 0:
        raise ValueError("payload_len must be >= 0")
    if payload_len > phy.max_payload:
        raise PayloadTooLarge(
            f"{payload_len} B exceeds {phy.id.value} maximum of {phy.max_payload} B"
        )
    coded = phy.coding_overhead * (
        phy.header_bits + 8 * (payload_len + APP_HEADER_BYTES) + phy.crc_bits
    )
    bits = phy.preamble_bits + phy.sync_bits + coded
    return _ceil_div(bits * 1_000_000, phy.bitrate)


def slot_duration(phy: PhyMode, payload_len: int,
                  proc_gap_us: int = DEFAULT_PROC_GAP_US) -> int:
    """Slot length: ramp-up + airtime + processing gap."""
    return RADIO_RAMPUP_US + airtime(phy, payload_len) + proc_gap_us
