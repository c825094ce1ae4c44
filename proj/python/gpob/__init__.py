"""Subsonic flow past obstacles, traveling waves and vortex nucleation in the
Gross-Pitaevskii model."""

from ._core import (
    GpobError,
    RunConfig,
    __version__,
    gl_profile,
    local_mach_speed,
    read_field,
    run_pipeline,
    solve_flow,
    summarize,
    traveling_wave,
)

__all__ = [
    "GpobError",
    "RunConfig",
    "__version__",
    "gl_profile",
    "local_mach_speed",
    "read_field",
    "run_pipeline",
    "solve_flow",
    "summarize",
    "traveling_wave",
]
