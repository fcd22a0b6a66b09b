"""Spiking wavelet transformer: Python access to the C++ core."""

from ._core import (
    ConfigError,
    DimensionError,
    DivergenceError,
    DomainError,
    FormatError,
    PreconditionError,
    SWformer,
    cli,
    default_config,
    haar2d,
    haar_matrix,
    ihaar2d,
    integrate_and_fire,
    lif,
    load_config,
    psnr,
    spectrum,
    spiking_round_trip,
)

__all__ = [
    "ConfigError",
    "DimensionError",
    "DivergenceError",
    "DomainError",
    "FormatError",
    "PreconditionError",
    "SWformer",
    "cli",
    "default_config",
    "haar2d",
    "haar_matrix",
    "ihaar2d",
    "integrate_and_fire",
    "lif",
    "load_config",
    "psnr",
    "spectrum",
    "spiking_round_trip",
]
