"""Deterministic simulator for multi-PHY synchronous-flooding protocols."""

from .phy import (APP_HEADER_BYTES, DEFAULT_PROC_GAP_US, END_MISS_GUARD_US,
                  PHY_TABLE, PayloadTooLarge, PhyId, PhyMode,
                  RADIO_RAMPUP_US, airtime, get_phy, override_phy,
                  slot_duration)
from .medium import (DISCONNECTED, FailReason, InterferenceScenario,
                     InterferenceSegment, JAM_LEVELS, NOISE_FLOOR_DBM,
                     ReceptionOutcome, Role, Topology, TransmissionAttempt,
                     link_probability, log_distance_rss, resolve_reception)
from .driver import (EventKind, NodeSlotLog, RadioState, SlotAction,
                     SlotEvent, hop_channel, run_slot)
from .primitives import (GLOSSY, ROF, ConfigInvalid, RoundConfig,
                         RoundResult, run_round)
from .middleware import (EpochSchedule, HookViolation, MphyPattern,
                         PatternInvalid, apply_extensions, build_schedule,
                         build_dissemination_schedule, make_pattern)
from .protocols import (BACKOFF_PROBABILITY, CollectionState, EpochMetrics,
                        LateRatioReport, TrafficModel, backoff_extension,
                        rntx_extension, run_collection_epoch,
                        run_dissemination_epoch, select_pattern,
                        single_phy_pattern)
from .layouts import UnknownLayout, load_layout
from .streams import node_streams, stream
from .harness import (SCHEMA_VERSION, Scenario, ScenarioInvalid,
                      emit_report, run_dynamic_timeline, run_scenario)

__version__ = "0.1.0"
