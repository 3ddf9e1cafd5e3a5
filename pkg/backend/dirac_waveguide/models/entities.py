from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from backend.dirac_waveguide.config import settings, solver_defaults


CurveKind = Literal["zero", "gaussian_bump", "polynomial_bump", "circular_arc"]
SweepVariable = Literal["epsilon", "mass", "k"]
OutputFormat = Literal["csv", "json", "svg"]
Subcommand = Literal["transverse", "dispersion", "edge", "spectrum", "thin-sweep", "mass-sweep", "certify"]

SUBCOMMANDS: tuple[str, ...] = (
    "transverse",
    "dispersion",
    "edge",
    "spectrum",
    "thin-sweep",
    "mass-sweep",
    "certify",
)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CurveSpec(_Strict):
    kind: CurveKind = "polynomial_bump"
    kappa0: float = 1.0
    # σ for gaussian_bump, L otherwise
    length: float = Field(default=1.0, gt=0)


class GridSpec(_Strict):
    S_override: float | None = Field(default=None, gt=0)
    n_s: int = Field(default=401, ge=3)
    n_t: int = Field(default=41, ge=3)

    @field_validator("n_t")
    @classmethod
    def _odd_n_t(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError("n_t must be odd")
        return value


class SolverSpec(_Strict):
    count: int = Field(default_factory=lambda: solver_defaults.count, ge=1)
    tol: float = Field(default_factory=lambda: solver_defaults.tol, gt=0)
    max_iter: int = Field(default_factory=lambda: solver_defaults.max_iter, ge=1)
    seed: int = Field(default_factory=lambda: solver_defaults.seed)
    preconditioner: Literal["shift_invert", "jacobi", "sgs"] = Field(
        default_factory=lambda: solver_defaults.preconditioner  # type: ignore[return-value]
    )


class SweepSpec(_Strict):
    variable: SweepVariable = "k"
    values: list[float] = Field(default_factory=lambda: [0.0, 0.5, 1.0, 1.5, 2.0])

    @field_validator("values")
    @classmethod
    def _ascending(cls, values: list[float]) -> list[float]:
        if any(b < a for a, b in zip(values, values[1:])):
            raise ValueError("sweep values must be sorted ascending")
        return values


class TransverseSpec(_Strict):
    p_values: list[int] = Field(default_factory=lambda: [1, 2, 3, 4])
    fem_n: int = Field(default=512, ge=16)

    @field_validator("p_values")
    @classmethod
    def _positive_modes(cls, values: list[int]) -> list[int]:
        if not values or any(p < 1 for p in values):
            raise ValueError("p_values must be a non-empty list of positive integers")
        return values


class OutputSpec(_Strict):
    dir: str = Field(default_factory=lambda: settings.output_dir)
    formats: list[OutputFormat] = Field(default_factory=lambda: ["csv", "json", "svg"])
    export_matrices: bool = False

    @field_validator("formats")
    @classmethod
    def _unique_formats(cls, values: list[str]) -> list[str]:
        if len(set(values)) != len(values):
            raise ValueError("formats must not repeat")
        return values


class RunConfig(_Strict):
    curve: CurveSpec = Field(default_factory=CurveSpec)
    epsilon: float = Field(default=0.1, gt=0)
    mass: float = Field(default=1.0, ge=0)
    grid: GridSpec = Field(default_factory=GridSpec)
    solver: SolverSpec = Field(default_factory=SolverSpec)
    sweep: SweepSpec = Field(default_factory=SweepSpec)
    transverse: TransverseSpec = Field(default_factory=TransverseSpec)
    output: OutputSpec = Field(default_factory=OutputSpec)

    @model_validator(mode="after")
    def _sweep_ranges(self) -> "RunConfig":
        values = self.sweep.values
        match self.sweep.variable:
            case "epsilon":
                if any(v <= 0 for v in values):
                    raise ValueError("epsilon sweep values must be positive")
            case "mass":
                if any(v < 0 for v in values):
                    raise ValueError("mass sweep values must be non-negative")
        return self


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
