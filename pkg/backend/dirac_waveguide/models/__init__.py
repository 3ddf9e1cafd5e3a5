from .entities import (
    SUBCOMMANDS,
    CurveSpec,
    GridSpec,
    OutputSpec,
    RunConfig,
    SolverSpec,
    Subcommand,
    SweepSpec,
    TransverseSpec,
)

__all__ = [
    "CurveSpec",
    "GridSpec",
    "OutputSpec",
    "RunConfig",
    "SUBCOMMANDS",
    "SolverSpec",
    "Subcommand",
    "SweepSpec",
    "TransverseSpec",
]
