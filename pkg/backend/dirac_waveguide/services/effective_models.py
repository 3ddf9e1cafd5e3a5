from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from backend.dirac_waveguide.config import logger
from backend.dirac_waveguide.services.certification import UnsupportedProfile
from backend.dirac_waveguide.services.curve_geometry import TubeGeometry
from backend.dirac_waveguide.services.eigensolve import SolverOptions, solve_with
from backend.dirac_waveguide.services.strip_operator import (
    AssembledForms,
    StripGrid,
    assemble_quadratic_form,
    assemble_square_form,
    spinor_layout,
)


@dataclass(frozen=True)
class EffectiveDirac:
    """1D Dirac operator −iσ₁∂_s + m_eσ₃; its spectrum is (−∞, −m_e] ∪ [m_e, ∞)."""

    m_e: float

    @property
    def gap_edges(self) -> tuple[float, float]:
        return (-self.m_e, self.m_e)


@dataclass(frozen=True)
class ModeCoefficients:
    k: int
    a_k: float
    b_k: float


@dataclass(frozen=True)
class MassGapRow:
    m: float
    m_epsilon: float
    mu1_square: float
    mu1_dirichlet: float
    gap: float
    relative_gap: float


def effective_mass(m: float) -> float:
    if not m >= 0:
        raise ValueError(f"mass must be non-negative, got {m!r}")
    return 2.0 * m / math.pi


def effective_dirac(m: float) -> EffectiveDirac:
    return EffectiveDirac(m_e=effective_mass(m))


def mode_effective_mass(m: float, k: int) -> float:
    if k < 1:
        raise ValueError(f"mode index must be >= 1, got {k}")
    if k % 2 == 0:
        return 0.0
    return 2.0 * m / (k * math.pi)


def coupling(k: int) -> ModeCoefficients:
    if k < 2:
        raise ValueError(f"coupling coefficients need k >= 2, got {k}")
    a_k = (4.0 / math.pi) * math.sin(math.pi * (k + 1) / 4.0) ** 2 / (k + 1)
    b_k = (4.0 / math.pi) * math.sin(math.pi * (k - 1) / 4.0) ** 2 / (k - 1)
    return ModeCoefficients(k=k, a_k=a_k, b_k=b_k)


def coupling_tail(K: int) -> float:
    """Σ_{k=2}^{K} a_k²."""
    k = np.arange(2, K + 1, dtype=float)
    a_k = (4.0 / math.pi) * np.sin(math.pi * (k + 1) / 4.0) ** 2 / (k + 1)
    return float(np.sum(a_k**2))


def free_mode(k: int, sign: int, t: float | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """u_k^±(t) = ½cos(kπ(t+1)/4)(1,1) ± ½sin(kπ(t+1)/4)(1,−1)."""
    phase = k * math.pi * (np.asarray(t, dtype=float) + 1.0) / 4.0
    c = 0.5 * np.cos(phase)
    s = 0.5 * sign * np.sin(phase)
    return c + s, c - s


def mode_overlap(k: int, sign_k: int, j: int, sign_j: int) -> float:
    """⟨σ₃u_k^±, u_j^±⟩ over (−1, 1) by adaptive quadrature."""

    def integrand(t: float) -> float:
        a1, a2 = free_mode(k, sign_k, t)
        b1, b2 = free_mode(j, sign_j, t)
        return float(a1 * b1 - a2 * b2)

    value, _err = integrate.quad(integrand, -1.0, 1.0, epsabs=1e-14, epsrel=1e-14, limit=200)
    return float(value)


def assemble_dirichlet_form(geom: TubeGeometry, grid: StripGrid, *, covariant: bool = False) -> AssembledForms:
    """q_∞ on ℂ²-valued functions vanishing on t = ±1 and s = ±S.

    With ``covariant=True`` the s-derivative is ∂_s − i(κ/2)σ₃, which makes the
    discrete q_∞ the restriction of the discrete q_m to its Dirichlet subspace.
    """
    layout = spinor_layout(grid, "dirichlet")
    return assemble_quadratic_form(geom, grid, layout, mass=0.0, covariant=covariant, label="q_inf")


def _check_shared_layout(square: AssembledForms, dirichlet: AssembledForms, grid: StripGrid) -> None:
    if square.dof_map is None or dirichlet.dof_map is None:
        raise RuntimeError("forms without dof maps cannot be compared")
    if not square.dof_map.interior(grid).same_layout(dirichlet.dof_map):
        raise RuntimeError("q_m and q_inf disagree on the interior dof ordering")


def large_mass_gap(
    geom: TubeGeometry,
    grid: StripGrid,
    m_list: Sequence[float],
    solver: SolverOptions | None = None,
) -> list[MassGapRow]:
    if not geom.profile.compact_support:
        raise UnsupportedProfile("large-mass comparison needs a compactly supported curvature")
    options = solver or SolverOptions(count=2)
    dirichlet = assemble_dirichlet_form(geom, grid, covariant=True)
    mu_dirichlet = float(solve_with(dirichlet, options).eigenvalues[0])
    rows: list[MassGapRow] = []
    for m in m_list:
        square = assemble_square_form(geom, float(m), grid)
        _check_shared_layout(square, dirichlet, grid)
        mu1 = float(solve_with(square, options).eigenvalues[0])
        gap = mu_dirichlet - mu1
        rows.append(
            MassGapRow(
                m=float(m),
                m_epsilon=float(m) * geom.epsilon,
                mu1_square=mu1,
                mu1_dirichlet=mu_dirichlet,
                gap=gap,
                relative_gap=gap / mu_dirichlet,
            )
        )
    gaps = [row.gap for row in rows]
    if any(g < 0 for g in gaps) or any(b > a for a, b in zip(gaps, gaps[1:])):
        logger.warning("large-mass gap is not nonnegative and decreasing: %s", gaps)
    return rows


def dirac_levels(mu_shifted: Sequence[float] | np.ndarray, m: float) -> np.ndarray:
    """Positive Dirac eigenvalues √(μ + m²) from levels μ of D² − m²."""
    return np.sqrt(np.asarray(mu_shifted, dtype=float) + m**2)


def nonrelativistic_levels(mu_dirichlet: Sequence[float] | np.ndarray, m: float) -> np.ndarray:
    """Large-mass prediction m + μ_{2n}/(2m) for the n-th positive Dirac eigenvalue."""
    if not m > 0:
        raise ValueError(f"large-mass expansion needs m > 0, got {m!r}")
    levels = np.sort(np.asarray(mu_dirichlet, dtype=float))
    return m + levels[1::2] / (2.0 * m)


__all__ = [
    "EffectiveDirac",
    "MassGapRow",
    "ModeCoefficients",
    "assemble_dirichlet_form",
    "coupling",
    "coupling_tail",
    "dirac_levels",
    "effective_dirac",
    "effective_mass",
    "free_mode",
    "large_mass_gap",
    "mode_effective_mass",
    "mode_overlap",
    "nonrelativistic_levels",
]
