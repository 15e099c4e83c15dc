"""Simulated perception and the navigation belief state."""
from .grid import (
    OccupancyGrid,
    bresenham,
    export_pgm,
    localize,
    rasterize_segments,
    read_pgm,
    trace_cells,
    update_occupancy,
)
from .nav import Mode, NavEstimate, dead_reckon, fuse_gps, mode_switch
from .sensors import MAX_RANGE, NO_RETURN, ScanFrame, beam_angles, simulate_gps, simulate_imu, simulate_lidar
from .world import WorldModel, box, distance_to_segments, point_in_convex, polyline, raycast

__all__ = [
    "MAX_RANGE", "NO_RETURN", "Mode", "NavEstimate", "OccupancyGrid", "ScanFrame", "WorldModel",
    "beam_angles", "box", "bresenham", "dead_reckon", "distance_to_segments", "export_pgm",
    "fuse_gps", "localize", "mode_switch", "point_in_convex", "polyline", "rasterize_segments",
    "raycast", "read_pgm", "simulate_gps", "simulate_imu", "simulate_lidar", "trace_cells",
    "update_occupancy",
]
