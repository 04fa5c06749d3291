"""Shared test fixtures and helpers."""

from pathlib import Path

import numpy as np
import pytest

from floodsim.medium import DISCONNECTED, Role, Topology

GOLDEN_DIR = Path(__file__).parent / "golden"


def line_topology(n: int, link_dbm: float = -60.0) -> Topology:
    """n-node line where only adjacent nodes hear each other."""
    rss = np.full((n, n), DISCONNECTED)
    for i in range(n - 1):
        rss[i, i + 1] = link_dbm
        rss[i + 1, i] = link_dbm
    roles = [Role.SOURCE] * n
    return Topology(rss_dbm=rss, roles=roles)


def parse_golden(path: Path):
    """Parse a golden slot-trace file into (grid, first_rx, tx_counts).

    grid maps node -> string of per-slot codes (T/R/F/S); first_rx and
    tx_counts map node -> int.
    """
    grid: dict[int, str] = {}
    first_rx: dict[int, int] = {}
    tx_counts: dict[int, int] = {}
    for raw in path.read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("first_rx:"):
            for part in line.split(":", 1)[1].split():
                k, v = part.split("=")
                first_rx[int(k)] = int(v)
        elif line.startswith("tx_counts:"):
            for part in line.split(":", 1)[1].split():
                k, v = part.split("=")
                tx_counts[int(k)] = int(v)
        else:
            node, codes = line.split(":", 1)
            grid[int(node)] = codes.strip()
    return grid, first_rx, tx_counts


@pytest.fixture
def golden_dir() -> Path:
    return GOLDEN_DIR
