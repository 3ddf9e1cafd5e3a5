from __future__ import annotations

import math

import numpy as np
import pytest

from backend.dirac_waveguide.services.certification import UnsupportedProfile
from backend.dirac_waveguide.services.curve_geometry import CurvatureProfile, validate_tube
from backend.dirac_waveguide.services.effective_models import (
    assemble_dirichlet_form,
    coupling,
    coupling_tail,
    dirac_levels,
    effective_dirac,
    effective_mass,
    free_mode,
    large_mass_gap,
    mode_effective_mass,
    mode_overlap,
    nonrelativistic_levels,
)
from backend.dirac_waveguide.services.eigensolve import SolverOptions, dense_oracle
from backend.dirac_waveguide.services.strip_operator import StripGrid, assemble_square_form
from backend.dirac_waveguide.services.transverse_spectrum import discrete_dirichlet_edge, essential_edge


def test_effective_mass_and_gap() -> None:
    assert effective_mass(math.pi / 2.0) == pytest.approx(1.0)
    assert effective_dirac(math.pi).gap_edges == pytest.approx((-2.0, 2.0))
    with pytest.raises(ValueError):
        effective_mass(-1.0)


@pytest.mark.parametrize("k", range(2, 10))
def test_coupling_matches_mode_overlaps(k: int) -> None:
    coeffs = coupling(k)
    assert coeffs.a_k == pytest.approx(mode_overlap(k, 1, 1, 1), abs=1e-10)
    assert coeffs.b_k == pytest.approx(mode_overlap(k, 1, 1, -1), abs=1e-10)


def test_coupling_needs_k_at_least_two() -> None:
    with pytest.raises(ValueError):
        coupling(1)


@pytest.mark.parametrize("k", range(1, 10))
def test_mode_effective_mass_is_the_diagonal_overlap(k: int) -> None:
    m = 3.0
    expected = m * mode_overlap(k, 1, k, 1)
    assert mode_effective_mass(m, k) == pytest.approx(expected, abs=1e-10)
    if k % 2 == 0:
        assert mode_effective_mass(m, k) == 0.0
    assert mode_effective_mass(m, 1) == pytest.approx(effective_mass(m))


def test_coupling_tail_sums_and_converges() -> None:
    direct = sum(coupling(k).a_k ** 2 for k in range(2, 6))
    assert coupling_tail(5) == pytest.approx(direct, rel=1e-14)
    assert 0.0 < coupling_tail(4000) - coupling_tail(2000) < 1e-3


def test_free_modes_satisfy_the_bottom_boundary_condition() -> None:
    for k in (1, 2, 5):
        for sign in (1, -1):
            u1, u2 = free_mode(k, sign, -1.0)
            assert float(u1) == pytest.approx(float(u2))
            norm2 = mode_overlap(k, sign, k, sign)
            assert abs(norm2) <= 1.0


def test_square_form_is_bounded_by_the_covariant_dirichlet_form(canonical_bump: CurvatureProfile) -> None:
    geom = validate_tube(canonical_bump, 0.2)
    grid = StripGrid(S=2.0, n_s=13, n_t=7)
    mu_dirichlet = float(dense_oracle(assemble_dirichlet_form(geom, grid, covariant=True)).min())

    lowest = [float(dense_oracle(assemble_square_form(geom, m, grid)).min()) for m in (0.0, 1.0, 5.0, 20.0, 100.0)]
    assert all(b >= a - 1e-9 * abs(a) for a, b in zip(lowest, lowest[1:]))
    assert all(mu <= mu_dirichlet * (1.0 + 1e-10) for mu in lowest)


def test_dirichlet_layout_matches_the_square_form_interior(canonical_bump: CurvatureProfile) -> None:
    geom = validate_tube(canonical_bump, 0.2)
    grid = StripGrid(S=2.0, n_s=9, n_t=5)
    square = assemble_square_form(geom, 1.0, grid)
    dirichlet = assemble_dirichlet_form(geom, grid)
    assert square.dof_map.interior(grid).same_layout(dirichlet.dof_map)
    assert dirichlet.label == "q_inf"
    assert dirichlet.dimension == (grid.n_s - 2) * 2 * (grid.n_t - 2)


def test_large_mass_gap_shrinks(canonical_bump: CurvatureProfile) -> None:
    eps = 0.2
    geom = validate_tube(canonical_bump, eps)
    grid = StripGrid(S=2.0, n_s=9, n_t=15)
    rows = large_mass_gap(geom, grid, [5.0, 25.0, 250.0], SolverOptions(count=2, tol=1e-5, max_iter=5000))

    assert [row.m_epsilon for row in rows] == pytest.approx([1.0, 5.0, 50.0])
    assert len({row.mu1_dirichlet for row in rows}) == 1
    gaps = [row.gap for row in rows]
    assert all(g >= -1e-6 * rows[0].mu1_dirichlet for g in gaps)
    assert gaps == sorted(gaps, reverse=True)
    assert rows[-1].relative_gap <= 0.05


def test_large_mass_gap_needs_compact_curvature() -> None:
    geom = validate_tube(CurvatureProfile.gaussian_bump(1.0, 0.5), 0.2)
    with pytest.raises(UnsupportedProfile):
        large_mass_gap(geom, StripGrid(S=2.0, n_s=9, n_t=5), [1.0])


def test_level_conversions() -> None:
    assert np.allclose(dirac_levels([0.0, 3.0], 2.0), [2.0, math.sqrt(7.0)])
    assert np.allclose(nonrelativistic_levels([4.0, 1.0, 2.0, 3.0], 10.0), [10.1, 10.2])
    with pytest.raises(ValueError):
        nonrelativistic_levels([1.0, 2.0], 0.0)


def test_thin_strip_edge_approaches_the_effective_mass_linearly() -> None:
    m = 1.0
    epsilons = (1e-2, 1e-3, 1e-4)
    errors = [abs(essential_edge(eps, m) - math.pi / (4.0 * eps) - effective_mass(m)) for eps in epsilons]
    assert errors[-1] < 1e-3
    slopes = [math.log(a / b) / math.log(10.0) for a, b in zip(errors, errors[1:])]
    assert slopes == pytest.approx([1.0, 1.0], abs=0.05)


def test_straight_dirichlet_form_sits_at_the_dirichlet_threshold() -> None:
    eps = 0.2
    grid = StripGrid(S=4.0, n_s=17, n_t=17)
    forms = assemble_dirichlet_form(validate_tube(CurvatureProfile.zero(), eps), grid)
    values = dense_oracle(forms)
    assert values.min() == pytest.approx(math.pi**2 / (4.0 * eps**2), rel=2e-2)
    assert values.min() > discrete_dirichlet_edge(eps, grid.n_t)


def test_bump_dirichlet_form_binds_with_paired_levels(canonical_bump: CurvatureProfile) -> None:
    eps = 0.2
    grid = StripGrid(S=4.0, n_s=17, n_t=17)
    straight = dense_oracle(assemble_dirichlet_form(validate_tube(CurvatureProfile.zero(), eps), grid))
    bent = dense_oracle(assemble_dirichlet_form(validate_tube(canonical_bump, eps), grid))
    assert bent.min() < straight.min()
    pairs = bent[:20].reshape(-1, 2)
    assert np.allclose(pairs[:, 0], pairs[:, 1], rtol=0.0, atol=1e-8 * abs(bent[:20]).max())
