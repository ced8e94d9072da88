"""Boltzmann bipartite maps with heavy-tailed faces."""
from importlib.metadata import PackageNotFoundError, version

from .bdg import map_to_mobile, mobile_to_map
from .mobile import Mobile, coding_paths, condition_size
from .pmap import PlanarMap, bfs, profile
from .stablesim import distance_process, simulate_stable_shot_noise, simulate_stable_walk
from .weights import WeightModel, calibrate

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

__all__ = [
    "Mobile",
    "PlanarMap",
    "WeightModel",
    "bfs",
    "calibrate",
    "coding_paths",
    "condition_size",
    "distance_process",
    "map_to_mobile",
    "mobile_to_map",
    "profile",
    "simulate_stable_shot_noise",
    "simulate_stable_walk",
]
