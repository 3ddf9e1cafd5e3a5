"""
    curve_geometry 以曲率为唯一数据源：重建 Frenet 标架、校验管状邻域、计算几何势 V_ε。
"""
from __future__ import annotations

import math
from dataclasses import dataclass
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        def __str__(self) -> str:
            return str(self.value)

        @staticmethod
        def _generate_next_value_(name, start, count, last_values):
            return name.lower()

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate, special
from scipy.spatial import cKDTree

from backend.dirac_waveguide.config import logger


class GeometryError(ValueError):
    pass


class NonPositiveWidth(GeometryError):
    pass


class WidthTooLarge(GeometryError):
    pass


class OutOfRange(GeometryError):
    pass


class DegenerateJacobian(GeometryError):
    def __init__(self, message: str, min_factor: float | None = None):
        super().__init__(message)
        self.min_factor = min_factor


class CurvatureKind(StrEnum):
    ZERO = "zero"
    GAUSSIAN_BUMP = "gaussian_bump"
    POLYNOMIAL_BUMP = "polynomial_bump"
    CIRCULAR_ARC = "circular_arc"


_GAUSSIAN_CUTOFF = 1e-14
_QUAD_TOL = 1e-12
# max_x 10x(1-x^2)^4 is attained at x = 1/3
_POLY_KAPPA_PRIME_PEAK = (10.0 / 3.0) * (8.0 / 9.0) ** 4
_POLY_BUMP = Polynomial([1.0, 0.0, -1.0]) ** 5
_POLY_BUMP_ANTIDERIVATIVE = _POLY_BUMP.integ()


@dataclass(frozen=True)
class CurvatureProfile:
    """Signed curvature κ(s) of an arc-length parametrised base curve.

    ``length`` is σ for the Gaussian bump and L for the polynomial bump and
    the circular arc; it is ignored for ``ZERO``.
    """

    kind: CurvatureKind
    kappa0: float = 0.0
    length: float = 1.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.kappa0):
            raise GeometryError("kappa0 must be finite")
        if self.kind != CurvatureKind.ZERO and not (self.length > 0 and math.isfinite(self.length)):
            raise GeometryError(f"{self.kind} needs a positive finite length, got {self.length!r}")

    @classmethod
    def zero(cls) -> "CurvatureProfile":
        return cls(CurvatureKind.ZERO)

    @classmethod
    def gaussian_bump(cls, kappa0: float, sigma: float) -> "CurvatureProfile":
        return cls(CurvatureKind.GAUSSIAN_BUMP, float(kappa0), float(sigma))

    @classmethod
    def polynomial_bump(cls, kappa0: float, L: float) -> "CurvatureProfile":
        return cls(CurvatureKind.POLYNOMIAL_BUMP, float(kappa0), float(L))

    @classmethod
    def circular_arc(cls, kappa0: float, L: float) -> "CurvatureProfile":
        return cls(CurvatureKind.CIRCULAR_ARC, float(kappa0), float(L))

    @property
    def is_straight(self) -> bool:
        return self.kind == CurvatureKind.ZERO or self.kappa0 == 0.0

    @property
    def sup_kappa(self) -> float:
        return 0.0 if self.kind == CurvatureKind.ZERO else abs(self.kappa0)

    @property
    def sup_kappa_prime(self) -> float:
        match self.kind:
            case CurvatureKind.GAUSSIAN_BUMP:
                return abs(self.kappa0) / self.length * math.exp(-0.5)
            case CurvatureKind.POLYNOMIAL_BUMP:
                return abs(self.kappa0) / self.length * _POLY_KAPPA_PRIME_PEAK
            case _:
                return 0.0

    @property
    def support_interval(self) -> tuple[float, float]:
        match self.kind:
            case CurvatureKind.ZERO:
                return (0.0, 0.0)
            case CurvatureKind.GAUSSIAN_BUMP:
                cutoff = self.length * math.sqrt(2.0 * math.log(1.0 / _GAUSSIAN_CUTOFF))
                return (-cutoff, cutoff)
            case CurvatureKind.POLYNOMIAL_BUMP:
                return (-self.length, self.length)
            case CurvatureKind.CIRCULAR_ARC:
                return (0.0, self.length)
        raise GeometryError(f"unknown curvature kind: {self.kind!r}")

    @property
    def support_radius(self) -> float:
        lo, hi = self.support_interval
        return max(abs(lo), abs(hi))

    @property
    def compact_support(self) -> bool:
        return self.kind != CurvatureKind.GAUSSIAN_BUMP

    def kappa(self, s: float | np.ndarray) -> np.ndarray:
        x = np.asarray(s, dtype=float)
        match self.kind:
            case CurvatureKind.ZERO:
                return np.zeros_like(x)
            case CurvatureKind.GAUSSIAN_BUMP:
                return self.kappa0 * np.exp(-(x**2) / (2.0 * self.length**2))
            case CurvatureKind.POLYNOMIAL_BUMP:
                u = x / self.length
                return np.where(np.abs(u) < 1.0, self.kappa0 * (1.0 - u**2) ** 5, 0.0)
            case CurvatureKind.CIRCULAR_ARC:
                return np.where((x >= 0.0) & (x <= self.length), self.kappa0, 0.0)
        raise GeometryError(f"unknown curvature kind: {self.kind!r}")

    def kappa_prime(self, s: float | np.ndarray) -> np.ndarray:
        x = np.asarray(s, dtype=float)
        match self.kind:
            case CurvatureKind.GAUSSIAN_BUMP:
                return -self.kappa(x) * x / self.length**2
            case CurvatureKind.POLYNOMIAL_BUMP:
                u = x / self.length
                inner = -10.0 * u * (1.0 - u**2) ** 4
                return np.where(np.abs(u) < 1.0, self.kappa0 * inner / self.length, 0.0)
            case _:
                # the arc's jumps at 0 and L are not resolved: κ' = 0 a.e.
                return np.zeros_like(x)

    def kappa_second(self, s: float | np.ndarray) -> np.ndarray:
        x = np.asarray(s, dtype=float)
        match self.kind:
            case CurvatureKind.GAUSSIAN_BUMP:
                sigma2 = self.length**2
                return self.kappa(x) * (x**2 / sigma2**2 - 1.0 / sigma2)
            case CurvatureKind.POLYNOMIAL_BUMP:
                u = x / self.length
                w = 1.0 - u**2
                inner = -10.0 * w**4 + 80.0 * u**2 * w**3
                return np.where(np.abs(u) < 1.0, self.kappa0 * inner / self.length**2, 0.0)
            case _:
                return np.zeros_like(x)

    def theta(self, s: float | np.ndarray) -> np.ndarray:
        """Tangent angle θ(s) = ∫₀ˢ κ with θ₀ = 0, from closed-form antiderivatives."""
        x = np.asarray(s, dtype=float)
        match self.kind:
            case CurvatureKind.ZERO:
                return np.zeros_like(x)
            case CurvatureKind.GAUSSIAN_BUMP:
                scale = self.length * math.sqrt(2.0)
                return self.kappa0 * self.length * math.sqrt(math.pi / 2.0) * special.erf(x / scale)
            case CurvatureKind.POLYNOMIAL_BUMP:
                u = np.clip(x / self.length, -1.0, 1.0)
                return self.kappa0 * self.length * _POLY_BUMP_ANTIDERIVATIVE(u)
            case CurvatureKind.CIRCULAR_ARC:
                return self.kappa0 * np.clip(x, 0.0, self.length)
        raise GeometryError(f"unknown curvature kind: {self.kind!r}")


@dataclass(frozen=True)
class FrenetState:
    s: float | np.ndarray
    gamma: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    theta: float | np.ndarray


@dataclass(frozen=True)
class TubeValidity:
    width_ok: bool
    injectivity_sampled_ok: bool


@dataclass(frozen=True)
class TubeGeometry:
    profile: CurvatureProfile
    epsilon: float
    truncation_S: float
    validity: TubeValidity


def _quad_segment(fn, a: float, b: float) -> float:
    if a == b:
        return 0.0
    value, _err = integrate.quad(fn, a, b, epsabs=_QUAD_TOL, epsrel=_QUAD_TOL, limit=200)
    return float(value)


def _gamma_by_quadrature(profile: CurvatureProfile, s: np.ndarray) -> np.ndarray:
    lo, hi = profile.support_interval
    inside = np.clip(s, lo, hi)
    # 样本点排序后逐段积分，累加得到 ∫₀ˢ (cos θ, sin θ)
    nodes = np.unique(np.concatenate([[lo, 0.0, hi], inside]))

    def cos_theta(x: float) -> float:
        return math.cos(float(profile.theta(x)))

    def sin_theta(x: float) -> float:
        return math.sin(float(profile.theta(x)))

    steps = np.zeros((nodes.size, 2))
    for idx in range(1, nodes.size):
        a, b = float(nodes[idx - 1]), float(nodes[idx])
        steps[idx, 0] = _quad_segment(cos_theta, a, b)
        steps[idx, 1] = _quad_segment(sin_theta, a, b)
    cumulative = np.cumsum(steps, axis=0)
    cumulative -= cumulative[np.searchsorted(nodes, 0.0)]

    gamma = cumulative[np.searchsorted(nodes, inside)]
    for edge, mask in ((lo, s < lo), (hi, s > hi)):
        if not np.any(mask):
            continue
        theta_edge = float(profile.theta(edge))
        base = cumulative[np.searchsorted(nodes, edge)]
        gamma[mask] = base + np.outer(s[mask] - edge, [math.cos(theta_edge), math.sin(theta_edge)])
    return gamma


def _gamma(profile: CurvatureProfile, s: np.ndarray) -> np.ndarray:
    if profile.is_straight:
        return np.stack([s, np.zeros_like(s)], axis=-1)
    if profile.kind == CurvatureKind.CIRCULAR_ARC:
        k0, L = profile.kappa0, profile.length
        arc = np.clip(s, 0.0, L)
        gamma = np.stack([np.sin(k0 * arc) / k0, (1.0 - np.cos(k0 * arc)) / k0], axis=-1)
        below = np.minimum(s, 0.0)
        above = np.maximum(s - L, 0.0)
        gamma[..., 0] += below + above * math.cos(k0 * L)
        gamma[..., 1] += above * math.sin(k0 * L)
        return gamma
    return _gamma_by_quadrature(profile, s)


def frenet(profile: CurvatureProfile, s: float | np.ndarray) -> FrenetState:
    """Frenet state at a scalar s, or stacked states (leading axis) for a 1-D array."""
    scalar = np.ndim(s) == 0
    points = np.atleast_1d(np.asarray(s, dtype=float))
    theta = profile.theta(points)
    tangent = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    normal = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
    gamma = _gamma(profile, points)
    if scalar:
        return FrenetState(
            s=float(points[0]),
            gamma=gamma[0],
            tangent=tangent[0],
            normal=normal[0],
            theta=float(theta[0]),
        )
    return FrenetState(s=points, gamma=gamma, tangent=tangent, normal=normal, theta=theta)


def truncation_length(profile: CurvatureProfile, epsilon: float) -> float:
    return profile.support_radius + 10.0 * max(1.0, 1.0 / epsilon)


def check_width(profile: CurvatureProfile, epsilon: float) -> None:
    if not epsilon > 0:
        raise NonPositiveWidth(f"epsilon must be positive, got {epsilon!r}")
    sup_kappa = profile.sup_kappa
    if sup_kappa > 0 and epsilon >= 1.0 / (2.0 * sup_kappa):
        raise WidthTooLarge(
            f"epsilon={epsilon:g} violates epsilon < 1/(2 sup|kappa|) = {1.0 / (2.0 * sup_kappa):g}"
        )


def _sampled_injectivity(profile: CurvatureProfile, epsilon: float, S: float, samples: int) -> bool:
    s = np.linspace(-S, S, samples)
    t = np.linspace(-1.0, 1.0, samples)
    state = frenet(profile, s)
    points = state.gamma[:, None, :] + epsilon * t[None, :, None] * state.normal[:, None, :]
    tree = cKDTree(points.reshape(-1, 2))
    pairs = tree.query_pairs(r=epsilon / samples, output_type="ndarray")
    if pairs.size == 0:
        return True
    i_a, j_a = np.divmod(pairs[:, 0], samples)
    i_b, j_b = np.divmod(pairs[:, 1], samples)
    disjoint = (np.abs(i_a - i_b) > 1) | (np.abs(j_a - j_b) > 1)
    clashes = int(np.count_nonzero(disjoint))
    if clashes:
        logger.warning("Tube map sampled as non-injective: %d close cell-disjoint pairs", clashes)
    return clashes == 0


def validate_tube(profile: CurvatureProfile, epsilon: float, samples: int = 1000) -> TubeGeometry:
    check_width(profile, epsilon)
    if samples < 1000:
        raise GeometryError(f"injectivity sampling needs at least 1000 samples per axis, got {samples}")
    S = truncation_length(profile, epsilon)
    injective = True if profile.is_straight else _sampled_injectivity(profile, epsilon, S, samples)
    return TubeGeometry(
        profile=profile,
        epsilon=float(epsilon),
        truncation_S=S,
        validity=TubeValidity(width_ok=True, injectivity_sampled_ok=injective),
    )


def tube_map(geom: TubeGeometry, s: float | np.ndarray, t: float | np.ndarray) -> np.ndarray:
    if not geom.validity.width_ok:
        raise WidthTooLarge("tube map needs a tube that satisfies the width condition")
    t_arr = np.asarray(t, dtype=float)
    if np.any(np.abs(t_arr) > 1.0):
        raise OutOfRange("t must lie in [-1, 1]")
    state = frenet(geom.profile, s)
    return state.gamma + geom.epsilon * t_arr[..., None] * state.normal


def jacobian_factor(geom: TubeGeometry, s: float | np.ndarray, t: float | np.ndarray) -> np.ndarray:
    """1 − εtκ(s), the metric factor of the straightened strip."""
    return 1.0 - geom.epsilon * np.asarray(t, dtype=float) * geom.profile.kappa(s)


def sample_jacobian(geom: TubeGeometry, samples: int = 200) -> tuple[float, float]:
    s = np.linspace(-geom.truncation_S, geom.truncation_S, samples)
    t = np.linspace(-1.0, 1.0, samples)
    factor = jacobian_factor(geom, s[:, None], t[None, :])
    return float(factor.min()), float(factor.max())


def geometric_potential(geom: TubeGeometry, s: float | np.ndarray, t: float | np.ndarray) -> np.ndarray:
    s_arr = np.asarray(s, dtype=float)
    t_arr = np.asarray(t, dtype=float)
    profile = geom.profile
    eps = geom.epsilon
    kappa = profile.kappa(s_arr)
    g = 1.0 - eps * t_arr * kappa
    if np.any(g <= 0.0):
        raise DegenerateJacobian("1 - eps*t*kappa <= 0: tube folds onto itself", float(np.min(g)))
    kappa_p = profile.kappa_prime(s_arr)
    kappa_pp = profile.kappa_second(s_arr)
    return (
        -(kappa**2) / (4.0 * g**2)
        - kappa_pp * eps * t_arr / (2.0 * g**3)
        - 5.0 * kappa_p**2 * eps**2 * t_arr**2 / (4.0 * g**4)
    )


__all__ = [
    "CurvatureKind",
    "CurvatureProfile",
    "DegenerateJacobian",
    "FrenetState",
    "GeometryError",
    "NonPositiveWidth",
    "OutOfRange",
    "TubeGeometry",
    "TubeValidity",
    "WidthTooLarge",
    "check_width",
    "frenet",
    "geometric_potential",
    "jacobian_factor",
    "sample_jacobian",
    "truncation_length",
    "tube_map",
    "validate_tube",
]
