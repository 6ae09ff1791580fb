"""Optical flow with convolutional networks.

Images are (H, W, C) float32 arrays in [0, 1]; flow fields are (H, W, 2)
float64 arrays of (u, v) displacements, with NaN marking invalid pixels.
Config dictionaries use the same keys as the command-line config files.
"""

from ._deskflow import (
    ConfigError,
    DivergenceError,
    Error,
    Model,
    ShapeError,
    compute_metrics,
    correlate,
    flow_to_color,
    generate_dataset,
    generate_sample,
    gradcheck,
    lr_schedule,
    read_flo,
    refine,
    to_quarter,
    write_flo,
)

__all__ = [
    "ConfigError",
    "DivergenceError",
    "Error",
    "Model",
    "ShapeError",
    "compute_metrics",
    "correlate",
    "flow_to_color",
    "generate_dataset",
    "generate_sample",
    "gradcheck",
    "lr_schedule",
    "read_flo",
    "refine",
    "to_quarter",
    "write_flo",
]
