"""Frame timing: airtime closed forms, limits, slot duration."""

import pytest

from floodsim.phy import (APP_HEADER_BYTES, DEFAULT_PROC_GAP_US,
                          END_MISS_GUARD_US, PHY_TABLE, PayloadTooLarge,
                          PhyId, RADIO_RAMPUP_US, airtime, get_phy,
                          override_phy, slot_duration)

# Pinned against docs/framing_table.md.
CLOSED_FORMS = {
    PhyId.IEEE802154: (480, 32),
    PhyId.BLE_2M: (72, 4),
    PhyId.BLE_1M: (136, 8),
    PhyId.BLE_500K: (528, 16),
    PhyId.BLE_125K: (1104, 64),
}


@pytest.mark.parametrize("phy_id", list(PhyId))
@pytest.mark.parametrize("payload", [0, 1, 8, 64, 117, 118, 247, 248])
def test_airtime_matches_closed_form(phy_id, payload):
    phy = PHY_TABLE[phy_id]
    if payload > phy.max_payload:
        pytest.skip("payload exceeds PHY maximum")
    base, per_byte = CLOSED_FORMS[phy_id]
    assert airtime(phy, payload) == base + per_byte * payload


def test_airtime_rejects_out_of_range_payloads():
    phy = PHY_TABLE[PhyId.BLE_2M]
    with pytest.raises(ValueError):
        airtime(phy, -1)
    with pytest.raises(PayloadTooLarge):
        airtime(phy, 249)
    with pytest.raises(PayloadTooLarge):
        airtime(PHY_TABLE[PhyId.IEEE802154], 119)


def test_slot_duration_adds_rampup_and_gap():
    phy = PHY_TABLE[PhyId.BLE_2M]
    assert slot_duration(phy, 8) == RADIO_RAMPUP_US + 104 + DEFAULT_PROC_GAP_US
    assert slot_duration(phy, 8, proc_gap_us=0) == RADIO_RAMPUP_US + 104


def test_app_header_and_guards_pinned():
    assert APP_HEADER_BYTES == 7
    assert RADIO_RAMPUP_US == 40
    assert END_MISS_GUARD_US == 40
    assert DEFAULT_PROC_GAP_US == 100


def test_airtime_strictly_increasing_in_payload():
    for phy in PHY_TABLE.values():
        values = [airtime(phy, p) for p in range(0, phy.max_payload + 1)]
        assert all(b > a for a, b in zip(values, values[1:]))


def test_get_phy_accepts_names_and_ids():
    assert get_phy("BLE_1M") is PHY_TABLE[PhyId.BLE_1M]
    assert get_phy(PhyId.BLE_1M) is PHY_TABLE[PhyId.BLE_1M]


def test_override_phy_replaces_calibration_only():
    phy = PHY_TABLE[PhyId.BLE_2M]
    tweaked = override_phy(phy, capture_margin_db=9.0)
    assert tweaked.capture_margin_db == 9.0
    assert tweaked.bitrate == phy.bitrate
    assert PHY_TABLE[PhyId.BLE_2M].capture_margin_db == phy.capture_margin_db


def test_phy_mode_validation():
    phy = PHY_TABLE[PhyId.BLE_2M]
    with pytest.raises(ValueError):
        override_phy(phy, beating_penalty=0.0)
    with pytest.raises(ValueError):
        override_phy(phy, capture_margin_db=-1.0)
    with pytest.raises(ValueError):
        override_phy(phy, coding_overhead=0)
