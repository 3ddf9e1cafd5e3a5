from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import integrate, linalg, optimize, sparse

from backend.dirac_waveguide.config import logger


class NoSignChange(RuntimeError):
    pass


_MIN_TOL = 1e-14
_NEWTON_POLISH_STEPS = 3


@dataclass(frozen=True)
class TransverseRoot:
    p: int
    mass: float
    E: float
    bracket: tuple[float, float]
    residual: float

    @property
    def relative_residual(self) -> float:
        # |F| carries a factor m from m sin(2√E); compare against max(1, m)
        return self.residual / max(1.0, self.mass)


@dataclass(frozen=True)
class TransverseMode:
    """Normalised eigenfunction of T(k, m) = −iσ₂ d/dt + kσ₁ + mσ₃ on (−1, 1)."""

    lam: float
    alpha: complex
    beta: complex
    mass: float
    k: float
    E: float

    def evaluate(self, t: float | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        root = math.sqrt(self.E)
        phase = root * (np.asarray(t, dtype=float) + 1.0)
        c, s = np.cos(phase), np.sin(phase)
        u1 = self.alpha * c + self.beta * s
        u2 = (c * (self.k * self.alpha + root * self.beta) + s * (self.k * self.beta - root * self.alpha)) / (
            self.lam + self.mass
        )
        return u1, u2


def bracket(p: int) -> tuple[float, float]:
    return ((2 * p - 1) ** 2 * math.pi**2 / 16.0, p**2 * math.pi**2 / 4.0)


def secular_function(mass: float, E: float) -> float:
    root = math.sqrt(E)
    return mass * math.sin(2.0 * root) + root * math.cos(2.0 * root)


def _secular_in_x(mass: float, x: float) -> float:
    # x = 2√E, so F = m sin x + (x/2) cos x has no poles on the bracket
    return mass * math.sin(x) + 0.5 * x * math.cos(x)


def _secular_in_x_prime(mass: float, x: float) -> float:
    return (mass + 0.5) * math.cos(x) - 0.5 * x * math.sin(x)


def _validate_root_args(mass: float, p: int, tol: float) -> None:
    if not mass >= 0 or not math.isfinite(mass):
        raise ValueError(f"mass must be a finite non-negative number, got {mass!r}")
    if int(p) != p or p < 1:
        raise ValueError(f"mode index p must be a positive integer, got {p!r}")
    if not tol >= _MIN_TOL:
        raise ValueError(f"tol must be at least {_MIN_TOL:g}, got {tol!r}")


def solve_root(mass: float, p: int = 1, tol: float = _MIN_TOL) -> TransverseRoot:
    _validate_root_args(mass, p, tol)
    lo, hi = bracket(p)
    if mass == 0.0:
        return TransverseRoot(p=p, mass=0.0, E=lo, bracket=(lo, hi), residual=abs(secular_function(0.0, lo)))

    a = (2 * p - 1) * math.pi / 2.0
    b = p * math.pi
    f_a = _secular_in_x(mass, a)
    f_b = _secular_in_x(mass, b)
    if f_a == 0.0 or f_b == 0.0 or (f_a > 0) == (f_b > 0):
        raise NoSignChange(f"secular function keeps its sign on bracket p={p}, mass={mass!r}")

    x = optimize.brentq(lambda y: _secular_in_x(mass, y), a, b, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500)
    best = abs(_secular_in_x(mass, x))
    for _ in range(_NEWTON_POLISH_STEPS):
        slope = _secular_in_x_prime(mass, x)
        if slope == 0.0:
            break
        candidate = x - _secular_in_x(mass, x) / slope
        if not a < candidate < b:
            break
        value = abs(_secular_in_x(mass, candidate))
        if value >= best:
            break
        x, best = candidate, value

    E = min(max(x * x / 4.0, math.nextafter(lo, math.inf)), math.nextafter(hi, -math.inf))
    residual = abs(secular_function(mass, E))
    logger.debug("solve_root p=%d mass=%g -> E=%.17g residual=%.3e", p, mass, E, residual)
    return TransverseRoot(p=p, mass=float(mass), E=E, bracket=(lo, hi), residual=residual)


def transverse_table(mass: float, p_values: Iterable[int]) -> list[TransverseRoot]:
    return [solve_root(mass, int(p)) for p in p_values]


def small_mass_check(mass: float) -> float:
    if not 0.0 < mass <= 1e-2:
        raise ValueError(f"small_mass_check needs 0 < mass <= 1e-2, got {mass!r}")
    E1 = solve_root(mass, 1).E
    return abs(E1 - math.pi**2 / 16.0 - mass) / mass**2


def large_mass_check(mass: float) -> float:
    if not mass >= 1e2:
        raise ValueError(f"large_mass_check needs mass >= 100, got {mass!r}")
    E1 = solve_root(mass, 1).E
    return abs(E1 - math.pi**2 / 4.0 + math.pi**2 / (4.0 * mass)) * mass**2


def e1_lower_bound(mass: float) -> float:
    """Lower bound (π/2)·2m/(1+2m) for √E₁(m), from tan x ≤ x − π on (π/2, π]."""
    if not mass >= 0:
        raise ValueError(f"mass must be non-negative, got {mass!r}")
    return 0.5 * math.pi * 2.0 * mass / (1.0 + 2.0 * mass)


def dispersion(k: float, mass: float, p: int = 1) -> tuple[float, float]:
    lam = math.sqrt(mass**2 + k**2 + solve_root(mass, p).E)
    return (-lam, lam)


def essential_edge_squared_shifted(epsilon: float, m: float) -> float:
    """ε⁻²E₁(mε): bottom of the essential spectrum of D² − m²."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    if not m >= 0:
        raise ValueError(f"mass must be non-negative, got {m!r}")
    return solve_root(m * epsilon, 1).E / epsilon**2


def essential_edge(epsilon: float, m: float) -> float:
    return math.sqrt(essential_edge_squared_shifted(epsilon, m) + m**2)


def transverse_mode(k: float, mass: float, p: int = 1, sign: int = 1) -> TransverseMode:
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    E = solve_root(mass, p).E
    lam = sign * math.sqrt(mass**2 + k**2 + E)
    # boundary row at t = -1: (m + λ − k)α = √E β
    raw = TransverseMode(lam=lam, alpha=complex(math.sqrt(E)), beta=complex(mass + lam - k), mass=mass, k=k, E=E)

    def density(t: float) -> float:
        u1, u2 = raw.evaluate(t)
        return float(abs(u1) ** 2 + abs(u2) ** 2)

    norm2, _err = integrate.quad(density, -1.0, 1.0, epsabs=1e-13, epsrel=1e-13, limit=200)
    scale = 1.0 / math.sqrt(norm2)
    return TransverseMode(
        lam=lam,
        alpha=raw.alpha * scale,
        beta=raw.beta * scale,
        mass=mass,
        k=k,
        E=E,
    )


def _p1_layout(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Dof table for the 1D oracle: per node two slots, constrained ends keep one."""
    dof = -np.ones((n + 1, 2), dtype=int)
    spin = np.zeros((n + 1, 2, 2))
    dof[0, 0] = 0
    spin[0, 0] = (1.0, 1.0)  # u₂(−1) = +u₁(−1)
    counter = 1
    for node in range(1, n):
        dof[node] = (counter, counter + 1)
        spin[node, 0] = (1.0, 0.0)
        spin[node, 1] = (0.0, 1.0)
        counter += 2
    dof[n, 0] = counter
    spin[n, 0] = (1.0, -1.0)  # u₂(1) = −u₁(1)
    return dof, spin


def _p1_transverse_matrices(n: int, mass: float, shift: float) -> tuple[np.ndarray, np.ndarray]:
    """Dense P1 matrices of ∫|u'|² + shift∫|u|² + m(|u(1)|² + |u(−1)|²) and ∫|u|² on n elements."""
    h = 2.0 / n
    dof, spin = _p1_layout(n)
    local_k = np.array([[1.0, -1.0], [-1.0, 1.0]]) / h
    local_m = np.array([[2.0, 1.0], [1.0, 2.0]]) * h / 6.0

    rows: list[int] = []
    cols: list[int] = []
    stiff: list[float] = []
    mass_vals: list[float] = []
    for element in range(n):
        nodes = (element, element + 1)
        for a in range(2):
            for b in range(2):
                for sa in range(2):
                    for sb in range(2):
                        ra, cb = dof[nodes[a], sa], dof[nodes[b], sb]
                        if ra < 0 or cb < 0:
                            continue
                        c = float(spin[nodes[a], sa] @ spin[nodes[b], sb])
                        if c == 0.0:
                            continue
                        rows.append(ra)
                        cols.append(cb)
                        stiff.append(c * (local_k[a, b] + shift * local_m[a, b]))
                        mass_vals.append(c * local_m[a, b])
    size = int(dof.max()) + 1
    A = sparse.coo_matrix((stiff, (rows, cols)), shape=(size, size)).tocsr()
    B = sparse.coo_matrix((mass_vals, (rows, cols)), shape=(size, size)).tocsr()
    # m(|u(1)|² + |u(−1)|²), |e|² = 2 at both constrained ends
    edge = sparse.coo_matrix(
        ([2.0 * mass, 2.0 * mass], ([dof[0, 0], dof[n, 0]], [dof[0, 0], dof[n, 0]])), shape=(size, size)
    )
    return (A + edge).toarray(), B.toarray()


def transverse_fem_oracle(k: float, mass: float, n: int, count: int = 8) -> np.ndarray:
    """Lowest eigenvalues μ of ‖T(k,m)u‖² on a P1 grid with n elements; λ = ±√μ."""
    if n < 16:
        raise ValueError(f"transverse_fem_oracle needs n >= 16, got {n}")
    A, B = _p1_transverse_matrices(n, mass, mass**2 + k**2)
    values = linalg.eigh(A, B, eigvals_only=True, subset_by_index=[0, min(count, A.shape[0]) - 1])
    return np.asarray(values)


def discrete_transverse_edge(epsilon: float, m: float, n_t: int) -> float:
    """Lowest eigenvalue of ε⁻²(−∂_t² with the spinor rows at t = ±1) on the strip's t-grid.

    Same P1 discretisation as the t-direction of the strip assembly with
    n_t nodes, so it is the discrete counterpart of ε⁻²E₁(mε).
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    if not m >= 0:
        raise ValueError(f"mass must be non-negative, got {m!r}")
    if n_t < 3 or n_t % 2 == 0:
        raise ValueError(f"n_t must be odd and at least 3, got {n_t}")
    A, B = _p1_transverse_matrices(n_t - 1, m * epsilon, 0.0)
    lowest = linalg.eigh(A, B, eigvals_only=True, subset_by_index=[0, 0])
    return float(lowest[0]) / epsilon**2


def discrete_dirichlet_edge(epsilon: float, n_t: int) -> float:
    """ε⁻² times the lowest P1 Dirichlet eigenvalue of −∂_t² on n_t − 1 elements of (−1, 1)."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    if n_t < 3:
        raise ValueError(f"n_t must be at least 3, got {n_t}")
    n = n_t - 1
    h = 2.0 / n
    c = math.cos(math.pi / n)
    return 6.0 / h**2 * (1.0 - c) / (2.0 + c) / epsilon**2


__all__ = [
    "NoSignChange",
    "TransverseMode",
    "TransverseRoot",
    "bracket",
    "discrete_dirichlet_edge",
    "discrete_transverse_edge",
    "dispersion",
    "e1_lower_bound",
    "essential_edge",
    "essential_edge_squared_shifted",
    "large_mass_check",
    "secular_function",
    "small_mass_check",
    "solve_root",
    "transverse_fem_oracle",
    "transverse_mode",
    "transverse_table",
]
