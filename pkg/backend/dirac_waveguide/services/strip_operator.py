"""
    strip_operator 在截断带 [-S,S]×[-1,1] 上用 Q1 元离散 D² − m² 的二次型。
    自旋边界条件 u₂(·,±1) = ∓u₁(·,±1) 通过约简基函数消元，不用罚函数。
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Literal

import numpy as np
from scipy import io as scipy_io
from scipy import sparse

from backend.dirac_waveguide.config import logger
from backend.dirac_waveguide.services.curve_geometry import (
    DegenerateJacobian,
    TubeGeometry,
    geometric_potential,
)
from backend.dirac_waveguide.services.transverse_spectrum import (
    discrete_dirichlet_edge,
    discrete_transverse_edge,
)


class ZeroField(ValueError):
    pass


class ConstraintViolation(ValueError):
    pass


BoundaryKind = Literal["infinite_mass", "dirichlet"]

PAULI_1 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_2 = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_3 = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

_SPIN_UP = (1.0, 0.0)
_SPIN_DOWN = (0.0, 1.0)
_SPIN_BOTTOM = (1.0, 1.0)  # t = −1: u₂ = +u₁
_SPIN_TOP = (1.0, -1.0)  # t = +1: u₂ = −u₁

_GAUSS_1D = np.array([-1.0, 1.0]) / math.sqrt(3.0)
# Q1 local node order as (di, dj) offsets in (s, t)
_LOCAL_NODES = ((0, 0), (1, 0), (0, 1), (1, 1))
_JACOBIAN_MARGIN = 0.5


@dataclass(frozen=True)
class StripGrid:
    S: float
    n_s: int
    n_t: int

    def __post_init__(self) -> None:
        if not self.S > 0:
            raise ValueError(f"truncation S must be positive, got {self.S!r}")
        if self.n_s < 3 or self.n_t < 3:
            raise ValueError(f"grid needs n_s >= 3 and n_t >= 3, got ({self.n_s}, {self.n_t})")
        if self.n_t % 2 == 0:
            raise ValueError(f"n_t must be odd so that t = 0 is a node, got {self.n_t}")

    @classmethod
    def for_geometry(
        cls,
        geom: TubeGeometry,
        n_s: int,
        n_t: int,
        S_override: float | None = None,
    ) -> "StripGrid":
        S = float(S_override) if S_override is not None else geom.truncation_S
        return cls(S=S, n_s=int(n_s), n_t=int(n_t))

    @property
    def h_s(self) -> float:
        return 2.0 * self.S / (self.n_s - 1)

    @property
    def h_t(self) -> float:
        return 2.0 / (self.n_t - 1)

    @property
    def s_nodes(self) -> np.ndarray:
        return np.linspace(-self.S, self.S, self.n_s)

    @property
    def t_nodes(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.n_t)

    @property
    def n_nodes(self) -> int:
        return self.n_s * self.n_t

    def node_index(self, i: int | np.ndarray, j: int | np.ndarray) -> int | np.ndarray:
        return i * self.n_t + j

    def refined(self) -> "StripGrid":
        return StripGrid(S=self.S, n_s=2 * self.n_s - 1, n_t=2 * self.n_t - 1)


@dataclass(frozen=True)
class DofMap:
    node: np.ndarray
    spinor: np.ndarray
    table: np.ndarray
    boundary: BoundaryKind

    @property
    def size(self) -> int:
        return int(self.node.size)

    def interior(self, grid: StripGrid) -> "DofMap":
        j = self.node % grid.n_t
        keep = (j > 0) & (j < grid.n_t - 1)
        node = self.node[keep]
        spinor = self.spinor[keep]
        table = -np.ones_like(self.table)
        slot = np.zeros(grid.n_nodes, dtype=int)
        for idx, n in enumerate(node):
            table[n, slot[n]] = idx
            slot[n] += 1
        return DofMap(node=node, spinor=spinor, table=table, boundary="dirichlet")

    def same_layout(self, other: "DofMap") -> bool:
        return (
            self.node.shape == other.node.shape
            and bool(np.array_equal(self.node, other.node))
            and bool(np.array_equal(self.spinor, other.spinor))
        )


@dataclass(frozen=True)
class AssembledForms:
    A: sparse.csr_matrix
    B: sparse.csr_matrix
    dof_map: DofMap | None = None
    grid: StripGrid | None = None
    m2_subtracted: bool = False
    label: str = ""
    # lower bound on the discrete spectrum, used as the shift-invert pole
    spectral_floor: float | None = None

    @property
    def dimension(self) -> int:
        return int(self.A.shape[0])


@dataclass(frozen=True)
class SpinorField:
    values: np.ndarray
    grid: StripGrid

    def __post_init__(self) -> None:
        if self.values.shape != (self.grid.n_nodes, 2):
            raise ValueError(f"spinor field needs shape ({self.grid.n_nodes}, 2), got {self.values.shape}")

    @classmethod
    def from_callable(
        cls,
        grid: StripGrid,
        fn: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]],
    ) -> "SpinorField":
        s, t = np.meshgrid(grid.s_nodes, grid.t_nodes, indexing="ij")
        u1, u2 = fn(s.ravel(), t.ravel())
        values = np.stack([np.broadcast_to(u1, s.size), np.broadcast_to(u2, s.size)], axis=-1).astype(complex)
        return cls(values=values, grid=grid)


def spinor_layout(grid: StripGrid, boundary: BoundaryKind = "infinite_mass") -> DofMap:
    """Free dofs: two per interior node, one constrained spinor per node on t = ±1.

    Nodes on s = ±S carry none (artificial Dirichlet truncation); with
    ``boundary="dirichlet"`` the t = ±1 rows are dropped as well.
    """
    nodes: list[int] = []
    spins: list[tuple[float, float]] = []
    table = -np.ones((grid.n_nodes, 2), dtype=int)
    for i in range(1, grid.n_s - 1):
        for j in range(grid.n_t):
            n = int(grid.node_index(i, j))
            if j in (0, grid.n_t - 1):
                if boundary == "dirichlet":
                    continue
                table[n, 0] = len(nodes)
                nodes.append(n)
                spins.append(_SPIN_BOTTOM if j == 0 else _SPIN_TOP)
                continue
            for slot, spin in enumerate((_SPIN_UP, _SPIN_DOWN)):
                table[n, slot] = len(nodes)
                nodes.append(n)
                spins.append(spin)
    return DofMap(
        node=np.asarray(nodes, dtype=int),
        spinor=np.asarray(spins, dtype=float).reshape(-1, 2),
        table=table,
        boundary=boundary,
    )


def _local_shapes(xi: float, eta: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = np.empty(4)
    dxi = np.empty(4)
    deta = np.empty(4)
    for a, (di, dj) in enumerate(_LOCAL_NODES):
        sx = -1.0 if di == 0 else 1.0
        sy = -1.0 if dj == 0 else 1.0
        n[a] = 0.25 * (1.0 + sx * xi) * (1.0 + sy * eta)
        dxi[a] = 0.25 * sx * (1.0 + sy * eta)
        deta[a] = 0.25 * sy * (1.0 + sx * xi)
    return n, dxi, deta


def _hermitian_from_upper(rows: np.ndarray, cols: np.ndarray, vals: np.ndarray, size: int) -> sparse.csr_matrix:
    upper = sparse.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()
    strict = sparse.triu(upper, k=1, format="csr")
    return (upper + strict.conj().T).tocsr()


def _spectral_floor(
    geom: TubeGeometry,
    grid: StripGrid,
    boundary: BoundaryKind,
    mass: float,
    min_potential: float,
) -> float:
    """Transverse P1 edge plus min(0, V_ε at the quadrature points).

    The s-kinetic integrand is non-negative at every Gauss point and the
    t-part of each s-slice is integrated exactly, so no Ritz value of the
    assembled pair lies below this number.
    """
    if boundary == "infinite_mass":
        edge = discrete_transverse_edge(geom.epsilon, mass, grid.n_t)
    else:
        edge = discrete_dirichlet_edge(geom.epsilon, grid.n_t)
    floor = edge + min(0.0, min_potential)
    return floor - 1e-9 * max(1.0, abs(floor))


def assemble_quadratic_form(
    geom: TubeGeometry,
    grid: StripGrid,
    layout: DofMap,
    *,
    mass: float = 0.0,
    covariant: bool = True,
    label: str = "",
) -> AssembledForms:
    """Q1 assembly of ∫g⁻²|D_s u|² + ε⁻²∫|∂_t u|² + ∫V_ε|u|² (+ edge term).

    ``covariant`` selects D_s = ∂_s − i(κ/2)σ₃ instead of plain ∂_s. The edge
    term (m/ε)∫|u(s,±1)|² is added when the layout keeps the t = ±1 rows.
    Only the upper triangle is accumulated; A and B are completed by
    conjugate transposition so that A = Aᴴ and B = Bᴴ hold exactly.
    """
    eps = geom.epsilon
    profile = geom.profile
    h_s, h_t = grid.h_s, grid.h_t
    s_nodes, t_nodes = grid.s_nodes, grid.t_nodes

    ii, jj = np.meshgrid(np.arange(grid.n_s - 1), np.arange(grid.n_t - 1), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    n_el = ii.size
    el_nodes = np.stack([grid.node_index(ii + di, jj + dj) for di, dj in _LOCAL_NODES], axis=1)

    scalar = np.zeros((4, 4, n_el))
    twist = np.zeros((4, 4, n_el))
    mass_local = np.zeros((4, 4))
    weight = 0.25 * h_s * h_t
    min_factor = math.inf
    min_potential = math.inf
    for gx in _GAUSS_1D:
        for gy in _GAUSS_1D:
            n, dxi, deta = _local_shapes(gx, gy)
            d_s = dxi * (2.0 / h_s)
            d_t = deta * (2.0 / h_t)
            s_q = s_nodes[ii] + 0.5 * h_s * (1.0 + gx)
            t_q = t_nodes[jj] + 0.5 * h_t * (1.0 + gy)
            kappa = profile.kappa(s_q)
            g = 1.0 - eps * t_q * kappa
            min_factor = min(min_factor, float(g.min()))
            if min_factor <= _JACOBIAN_MARGIN:
                raise DegenerateJacobian(
                    f"1 - eps*t*kappa = {min_factor:.4g} <= 1/2 at a quadrature point", min_factor
                )
            inv_g2 = 1.0 / g**2
            potential = geometric_potential(geom, s_q, t_q)
            min_potential = min(min_potential, float(np.min(potential)))
            for a in range(4):
                for b in range(4):
                    value = (
                        inv_g2 * d_s[a] * d_s[b]
                        + (d_t[a] * d_t[b] / eps**2)
                        + potential * n[a] * n[b]
                    )
                    if covariant:
                        value = value + inv_g2 * 0.25 * kappa**2 * n[a] * n[b]
                        twist[a, b] += weight * inv_g2 * 0.5 * kappa * (n[a] * d_s[b] - d_s[a] * n[b])
                    scalar[a, b] += weight * value
                    mass_local[a, b] += weight * n[a] * n[b]

    if layout.boundary == "infinite_mass" and mass != 0.0:
        edge = (mass / eps) * (h_s / 6.0) * np.array([[2.0, 1.0], [1.0, 2.0]])
        bottom = (jj == 0).astype(float)
        top = (jj == grid.n_t - 2).astype(float)
        scalar[0:2, 0:2] += edge[:, :, None] * bottom
        scalar[2:4, 2:4] += edge[:, :, None] * top

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    a_vals: list[np.ndarray] = []
    b_vals: list[np.ndarray] = []
    spin_of = np.zeros((grid.n_nodes, 2, 2))
    valid = layout.table >= 0
    spin_of[valid] = layout.spinor[layout.table[valid]]
    for a in range(4):
        for b in range(4):
            for sa in range(2):
                for sb in range(2):
                    r = layout.table[el_nodes[:, a], sa]
                    c = layout.table[el_nodes[:, b], sb]
                    ea = spin_of[el_nodes[:, a], sa]
                    eb = spin_of[el_nodes[:, b], sb]
                    overlap = ea[:, 0] * eb[:, 0] + ea[:, 1] * eb[:, 1]
                    chiral = ea[:, 0] * eb[:, 0] - ea[:, 1] * eb[:, 1]
                    keep = (r >= 0) & (c >= 0) & (r <= c) & ((overlap != 0.0) | (chiral != 0.0))
                    if not np.any(keep):
                        continue
                    val = overlap[keep] * scalar[a, b, keep] + 1j * chiral[keep] * twist[a, b, keep]
                    diag = r[keep] == c[keep]
                    val[diag] = val[diag].real
                    rows.append(r[keep])
                    cols.append(c[keep])
                    a_vals.append(val)
                    b_vals.append(overlap[keep] * mass_local[a, b])

    size = layout.size
    row_idx = np.concatenate(rows) if rows else np.zeros(0, dtype=int)
    col_idx = np.concatenate(cols) if cols else np.zeros(0, dtype=int)
    A = _hermitian_from_upper(row_idx, col_idx, np.concatenate(a_vals) if a_vals else np.zeros(0, complex), size)
    B = _hermitian_from_upper(row_idx, col_idx, np.concatenate(b_vals) if b_vals else np.zeros(0), size)
    logger.debug(
        "assembled %s: dofs=%d nnz(A)=%d grid=(%d,%d) S=%g min(1-eps*t*kappa)=%.4f",
        label or layout.boundary,
        size,
        A.nnz,
        grid.n_s,
        grid.n_t,
        grid.S,
        min_factor,
    )
    return AssembledForms(
        A=A,
        B=B,
        dof_map=layout,
        grid=grid,
        m2_subtracted=layout.boundary == "infinite_mass",
        label=label,
        spectral_floor=_spectral_floor(geom, grid, layout.boundary, mass, min_potential),
    )


def assemble_square_form(geom: TubeGeometry, m: float, grid: StripGrid) -> AssembledForms:
    """Shifted form q_m(u) = ‖D_Γ(ε,m)u‖² − m²‖u‖² in straightened coordinates."""
    if not m >= 0:
        raise ValueError(f"mass must be non-negative, got {m!r}")
    layout = spinor_layout(grid, "infinite_mass")
    return assemble_quadratic_form(geom, grid, layout, mass=m, covariant=True, label="q_m")


def coefficients(forms: AssembledForms, field: SpinorField, *, rtol: float = 1e-10) -> np.ndarray:
    layout = forms.dof_map
    if layout is None:
        raise ValueError("forms carry no dof map; cannot project a spinor field")
    spin = layout.spinor
    x = np.einsum("dk,dk->d", field.values[layout.node], spin) / np.einsum("dk,dk->d", spin, spin)
    rebuilt = np.zeros_like(field.values)
    np.add.at(rebuilt, layout.node, x[:, None] * spin)
    scale = max(float(np.abs(field.values).max(initial=0.0)), 1.0)
    if float(np.abs(rebuilt - field.values).max(initial=0.0)) > rtol * scale:
        raise ConstraintViolation("spinor field violates the boundary rows or the s = ±S truncation")
    return x


def rayleigh(forms: AssembledForms, field: SpinorField) -> float:
    x = coefficients(forms, field)
    denominator = float(np.real(np.vdot(x, forms.B @ x)))
    if not denominator > 0.0:
        raise ZeroField("Rayleigh quotient of a zero field")
    return float(np.real(np.vdot(x, forms.A @ x))) / denominator


def export_matrix_market(forms: AssembledForms, directory: Path, stem: str) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for name, matrix in (("A", forms.A), ("B", forms.B)):
        target = directory / f"{stem}_{name}.mtx"
        scipy_io.mmwrite(str(target), matrix, comment=f"{forms.label or stem} {name}")
        written.append(target)
    return written


__all__ = [
    "AssembledForms",
    "BoundaryKind",
    "ConstraintViolation",
    "DofMap",
    "PAULI_1",
    "PAULI_2",
    "PAULI_3",
    "SpinorField",
    "StripGrid",
    "ZeroField",
    "assemble_quadratic_form",
    "assemble_square_form",
    "coefficients",
    "export_matrix_market",
    "rayleigh",
    "spinor_layout",
]
