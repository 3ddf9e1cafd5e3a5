"""
    certification 给出紧支曲率下的离散谱存在性判据：
    I_ε > 0 且 m > m₀(ε) 时，D² − m² 在本质谱下方至少有两个特征值（计重数）。
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from backend.dirac_waveguide.config import logger
from backend.dirac_waveguide.services.curve_geometry import TubeGeometry, geometric_potential
from backend.dirac_waveguide.services.transverse_spectrum import e1_lower_bound, solve_root


class UnsupportedProfile(ValueError):
    pass


class NonPositiveCertificate(ValueError):
    pass


@dataclass(frozen=True)
class Certificate:
    I_epsilon: float
    m0_bound: float
    condition_holds: bool
    predicted_discrete_count_at_least: int
    epsilon: float
    m: float
    L: float
    eta: float


@dataclass(frozen=True)
class TrialEnergy:
    """Shifted energy q(u_η) = q_m(u_η) − ε⁻²E₁(mε)‖u_η‖² split by term."""

    eta: float
    edge_term: float
    kinetic_term: float
    potential_term: float
    norm_squared: float
    shifted_edge: float

    @property
    def q_value(self) -> float:
        return self.edge_term + self.kinetic_term + self.potential_term

    @property
    def rayleigh_quotient(self) -> float:
        return self.shifted_edge + self.q_value / self.norm_squared


@dataclass(frozen=True)
class UpperBounds:
    exact: float
    via_root_bound: float
    crude: float
    at_optimal_eta: float


def _require_compact(geom: TubeGeometry) -> float:
    profile = geom.profile
    if not profile.compact_support:
        raise UnsupportedProfile(f"{profile.kind} curvature has no compact support")
    return profile.support_radius


def compute_I_epsilon(geom: TubeGeometry, quad_points: int = 200) -> float:
    """I_ε = −∫∫ V_ε(s,t) cos²(πt/2) ds dt over supp κ × (−1, 1)."""
    _require_compact(geom)
    if quad_points < 2:
        raise ValueError(f"quad_points must be at least 2, got {quad_points}")
    if geom.profile.is_straight:
        return 0.0
    lo, hi = geom.profile.support_interval
    nodes, weights = special.roots_legendre(quad_points)
    s = 0.5 * (hi - lo) * (nodes + 1.0) + lo
    w_s = 0.5 * (hi - lo) * weights
    V = geometric_potential(geom, s[:, None], nodes[None, :])
    density = V * np.cos(0.5 * math.pi * nodes[None, :]) ** 2
    return float(-(w_s @ density @ weights))


def _support_constant(geom: TubeGeometry, L: float) -> float:
    return 4.0 * math.pi**2 * L / (3.0 * geom.epsilon**2) + 2.0 / L


def m0_bound(geom: TubeGeometry, I_eps: float) -> float:
    if not I_eps > 0:
        raise NonPositiveCertificate(f"I_epsilon = {I_eps:.6g} is not positive; no mass threshold exists")
    L = _require_compact(geom)
    C = _support_constant(geom, L)
    return ((C / I_eps) ** 2 - 1.0) / (2.0 * geom.epsilon)


def optimal_eta(geom: TubeGeometry, m: float) -> float:
    L = _require_compact(geom)
    return L * math.sqrt(1.0 + 2.0 * m * geom.epsilon)


def _check_eta(geom: TubeGeometry, eta: float) -> None:
    L = _require_compact(geom)
    if not eta >= L:
        raise ValueError(f"eta must cover the curvature support radius {L:g}, got {eta!r}")


def variational_energy(
    geom: TubeGeometry,
    m: float,
    eta: float | None = None,
    I_eps: float | None = None,
) -> TrialEnergy:
    eta = optimal_eta(geom, m) if eta is None else float(eta)
    _check_eta(geom, eta)
    eps = geom.epsilon
    E1 = solve_root(m * eps, 1).E
    norm_squared = 8.0 * eta / 3.0
    I_value = compute_I_epsilon(geom) if I_eps is None else I_eps
    return TrialEnergy(
        eta=eta,
        edge_term=(math.pi**2 / 4.0 - E1) * norm_squared / eps**2,
        kinetic_term=2.0 / eta,
        potential_term=-I_value,
        norm_squared=norm_squared,
        shifted_edge=E1 / eps**2,
    )


def variational_upper_bounds(
    geom: TubeGeometry,
    m: float,
    eta: float | None = None,
    I_eps: float | None = None,
) -> UpperBounds:
    energy = variational_energy(geom, m, eta, I_eps)
    eps = geom.epsilon
    L = geom.profile.support_radius
    me = m * eps
    norm_squared = energy.norm_squared
    root_bound = e1_lower_bound(me)
    via_root = (math.pi**2 / 4.0 - root_bound**2) * norm_squared / eps**2 + energy.kinetic_term + energy.potential_term
    crude = (math.pi**2 / (2.0 * eps**2)) * norm_squared / (1.0 + 2.0 * me) + energy.kinetic_term + energy.potential_term
    at_optimal = _support_constant(geom, L) / math.sqrt(1.0 + 2.0 * me) + energy.potential_term
    return UpperBounds(exact=energy.q_value, via_root_bound=via_root, crude=crude, at_optimal_eta=at_optimal)


def trial_function(
    geom: TubeGeometry, m: float, eta: float | None = None
) -> Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]:
    """u_η(s,t) = φ_η(s) cos(πt/2) (e^{iθ/2}, e^{−iθ/2})/√2 with a trapezoidal φ_η.

    φ_η is 1 on |s| ≤ η and falls linearly to 0 at |s| = 2η. The parameter m
    is accepted for symmetry with the energy; the function itself is mass-free.
    """
    eta = optimal_eta(geom, m) if eta is None else float(eta)
    _check_eta(geom, eta)
    profile = geom.profile

    def field(s: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        s_arr = np.asarray(s, dtype=float)
        t_arr = np.asarray(t, dtype=float)
        cutoff = np.clip((2.0 * eta - np.abs(s_arr)) / eta, 0.0, 1.0)
        amplitude = cutoff * np.cos(0.5 * math.pi * t_arr) / math.sqrt(2.0)
        phase = np.exp(0.5j * profile.theta(s_arr))
        return amplitude * phase, amplitude * np.conj(phase)

    return field


def certify(geom: TubeGeometry, m: float, quad_points: int = 200) -> Certificate:
    if not m >= 0:
        raise ValueError(f"mass must be non-negative, got {m!r}")
    L = _require_compact(geom)
    I_eps = compute_I_epsilon(geom, quad_points)
    holds = I_eps > 0.0
    threshold = m0_bound(geom, I_eps) if holds else math.inf
    predicted = 2 if holds and m > threshold else 0
    logger.info(
        "certify eps=%g m=%g: I_eps=%.6g m0=%.6g predicted>=%d",
        geom.epsilon,
        m,
        I_eps,
        threshold,
        predicted,
    )
    return Certificate(
        I_epsilon=I_eps,
        m0_bound=threshold,
        condition_holds=holds,
        predicted_discrete_count_at_least=predicted,
        epsilon=geom.epsilon,
        m=float(m),
        L=L,
        eta=optimal_eta(geom, m),
    )


__all__ = [
    "Certificate",
    "NonPositiveCertificate",
    "TrialEnergy",
    "UnsupportedProfile",
    "UpperBounds",
    "certify",
    "compute_I_epsilon",
    "m0_bound",
    "optimal_eta",
    "trial_function",
    "variational_energy",
    "variational_upper_bounds",
]
