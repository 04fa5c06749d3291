"""Epoch schedule construction and runtime round configuration.

Builds per-epoch schedules of rounds (each round with its own PHY
assignment from a static multi-PHY pattern) and applies extension hooks
that mutate the round configuration before execution.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

from .phy import PhyId, PhyMode, PHY_TABLE, slot_duration
from .primitives import ConfigInvalid, RoundConfig

# Round roles within an epoch.
ROLE_S = "S"
ROLE_T = "T"
ROLE_A = "A"
ROLE_PAYLOAD = "Payload"

PATTERN_BLOCK = 4  # multi-PHY patterns repeat over blocks of 4 TA pairs


class PatternInvalid(ValueError):
    pass


class HookViolation(ValueError):
    pass


@dataclass(frozen=True)
class MphyPattern:
    """Static split of TA pairs between a fast and a robust PHY.

    ``fast_utilization`` percent of pairs run on the fast PHY; within each
    block of four pairs the robust pairs occupy the last positions.
    """

    name: str
    fast_utilization: int
    fast_phy: PhyId
    robust_phy: PhyId

    def __post_init__(self) -> None:
        if self.fast_utilization not in (0, 25, 50, 75, 100):
            raise PatternInvalid(
                f"fast_utilization must be a multiple of 25, "
                f"got {self.fast_utilization}")

    def pair_phy(self, pair_index: int) -> PhyId:
        """PHY of TA pair ``pair_index`` (0-based)."""
        fast_per_block = self.fast_utilization // 25
        return (self.fast_phy if pair_index % PATTERN_BLOCK < fast_per_block
                else self.robust_phy)


def make_pattern(name: str, fast_phy: PhyId, robust_phy: PhyId) -> MphyPattern:
    if not name.startswith("MPHY"):
        raise PatternInvalid(f"unknown pattern {name!r}")
    try:
        util = int(name[4:])
    except ValueError:
        raise PatternInvalid(f"unknown pattern {name!r}") from None
    return MphyPattern(name, util, fast_phy, robust_phy)


PATTERN_NAMES = ("MPHY0", "MPHY25", "MPHY50", "MPHY75", "MPHY100")


@dataclass(frozen=True)
class EpochSchedule:
    epoch_period_us: int
    rounds: tuple[tuple[str, RoundConfig], ...]  # (role, config)
    pattern: Optional[MphyPattern] = None

    def duration_us(self, phy_table: Optional[dict[PhyId, PhyMode]] = None) -> int:
        table = phy_table or PHY_TABLE
        total = 0
        for _, cfg in self.rounds:
            total += cfg.nslots * slot_duration(
                table[cfg.phy], cfg.payload_len, cfg.proc_gap_us)
        return total


def build_schedule(nta: int, pattern: MphyPattern, base: RoundConfig,
                   epoch_period_us: int) -> EpochSchedule:
    """Collection epoch: one S round on the robust PHY, then NTA TA pairs.

    Each pair's T and A rounds share the PHY chosen by repeating the
    4-pair pattern; deterministic for identical inputs.
    """
    if nta < 1:
        raise PatternInvalid("nta must be >= 1")
    rounds: list[tuple[str, RoundConfig]] = [
        (ROLE_S, replace(base, phy=pattern.robust_phy)),
    ]
    for pair in range(nta):
        phy = pattern.pair_phy(pair)
        cfg = replace(base, phy=phy)
        rounds.append((ROLE_T, cfg))
        rounds.append((ROLE_A, cfg))
    return EpochSchedule(epoch_period_us, tuple(rounds), pattern)


def build_dissemination_schedule(base: RoundConfig,
                                 epoch_period_us: int) -> EpochSchedule:
    return EpochSchedule(epoch_period_us, ((ROLE_PAYLOAD, base),), None)


# A driver extension is a callable (RoundConfig, epoch_ctx, rng) -> RoundConfig.
ExtensionHook = Callable


def apply_extensions(hooks: Sequence[ExtensionHook], config: RoundConfig,
                     epoch_ctx, rng) -> RoundConfig:
    """Apply hooks in registration order; the result must stay valid."""
    out = config
    for hook in hooks:
        out = hook(out, epoch_ctx, rng)
    if out is not config:
        try:
            out.validate()
        except ConfigInvalid as exc:
            raise HookViolation(str(exc)) from exc
    return out
