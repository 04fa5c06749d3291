"""Built-in node layouts.

Each layout ships as a JSON data file with either node coordinates (RSS
derived by log-distance path loss) or a direct pairwise RSS table for
layouts whose link budget is calibrated explicitly.
"""

from __future__ import annotations

import json
from importlib import resources

import numpy as np

from .medium import DISCONNECTED, Role, Topology, log_distance_rss

LAYOUT_FILES = {
    "dense_19": "layout_dense_19.json",
    "sparse_12": "layout_sparse_12.json",
    "all_to_one_47": "layout_all_to_one_47.json",
    "broadcast_1_to_47": "layout_broadcast_1_to_47.json",
}


class UnknownLayout(KeyError):
    pass


def _load_json(name: str) -> dict:
    try:
        fname = LAYOUT_FILES[name]
    except KeyError:
        raise UnknownLayout(
            f"unknown layout {name!r}; known: {sorted(LAYOUT_FILES)}"
        ) from None
    text = resources.files("floodsim.data").joinpath(fname).read_text()
    return json.loads(text)


def load_layout(name: str) -> Topology:
    """Build the named topology from its shipped data file."""
    data = _load_json(name)
    roles = [Role(r) for r in data["roles"]]
    if "coords_m" in data:
        rss = log_distance_rss(data["coords_m"])
    else:
        rss = np.array(
            [[DISCONNECTED if v is None else float(v) for v in row]
             for row in data["rss_dbm"]])
        np.fill_diagonal(rss, DISCONNECTED)
    return Topology(rss_dbm=rss, roles=roles)
