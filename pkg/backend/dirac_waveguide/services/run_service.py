"""
    run_service 编排各子命令：读 RunConfig，调用几何/谱/证书模块，产出行数据、摘要和绘图描述。
    写文件由 storage.artifact_store 负责。
"""
from __future__ import annotations

import math
import time
import uuid
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from backend.dirac_waveguide.config import logger
from backend.dirac_waveguide.models import RunConfig
from backend.dirac_waveguide.services.certification import certify, variational_energy, variational_upper_bounds
from backend.dirac_waveguide.services.curve_geometry import (
    CurvatureProfile,
    TubeGeometry,
    sample_jacobian,
    validate_tube,
)
from backend.dirac_waveguide.services.effective_models import (
    effective_mass,
    large_mass_gap,
    nonrelativistic_levels,
)
from backend.dirac_waveguide.services.eigensolve import (
    NotConverged,
    SolverOptions,
    SpectralResult,
    group_multiplicities,
    solve_with,
)
from backend.dirac_waveguide.services.run_context import add_run_meta, get_run_context, run_context
from backend.dirac_waveguide.services.strip_operator import AssembledForms, StripGrid, assemble_square_form
from backend.dirac_waveguide.services.system_log import log_event
from backend.dirac_waveguide.services.transverse_spectrum import (
    dispersion,
    e1_lower_bound,
    essential_edge,
    essential_edge_squared_shifted,
    large_mass_check,
    small_mass_check,
    solve_root,
    transverse_fem_oracle,
)


HEADERS: dict[str, list[str]] = {
    "transverse": ["p", "mass", "E_p", "bracket_lo", "bracket_hi", "residual"],
    "dispersion": ["k", "p", "lambda_minus", "lambda_plus", "E_p"],
    "edge": ["epsilon", "m", "edge", "renormalized_edge", "effective_mass"],
    "spectrum": ["index", "mu", "lambda_dirac", "residual", "converged", "below_edge", "multiplicity"],
    "thin-sweep": ["epsilon", "m", "renormalized_edge", "effective_mass", "error"],
    "mass-sweep": ["m", "m_epsilon", "mu1_square", "mu1_dirichlet", "gap", "relative_gap"],
    "certify": ["epsilon", "m", "I_epsilon", "m0_bound", "condition_holds", "predicted_discrete_count_at_least"],
}

DEFAULT_THIN_EPSILONS = (1e-2, 1e-3, 1e-4)
DEFAULT_MASS_EPSILON_PRODUCTS = (1.0, 2.0, 5.0, 10.0, 20.0, 50.0)
DEFAULT_K_GRID = tuple(float(k) for k in np.linspace(0.0, 4.0, 41))


@dataclass(frozen=True)
class PlotSeries:
    label: str
    x: list[float]
    y: list[float]
    style: str = "-"


@dataclass(frozen=True)
class PlotSpec:
    name: str
    xlabel: str
    ylabel: str
    series: list[PlotSeries]
    log_x: bool = False
    log_y: bool = False


@dataclass
class RunResult:
    subcommand: str
    config: RunConfig
    header: list[str]
    rows: list[dict[str, Any]] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)
    plots: list[PlotSpec] = field(default_factory=list)
    matrices: list[tuple[str, AssembledForms]] = field(default_factory=list)
    error: NotConverged | None = None


def build_profile(config: RunConfig) -> CurvatureProfile:
    spec = config.curve
    match spec.kind:
        case "zero":
            return CurvatureProfile.zero()
        case "gaussian_bump":
            return CurvatureProfile.gaussian_bump(spec.kappa0, spec.length)
        case "polynomial_bump":
            return CurvatureProfile.polynomial_bump(spec.kappa0, spec.length)
        case "circular_arc":
            return CurvatureProfile.circular_arc(spec.kappa0, spec.length)
    raise ValueError(f"unknown curve kind: {spec.kind!r}")


def solver_options(config: RunConfig, count: int | None = None) -> SolverOptions:
    s = config.solver
    return SolverOptions(
        count=count if count is not None else s.count,
        tol=s.tol,
        max_iter=s.max_iter,
        seed=s.seed,
        preconditioner=s.preconditioner,
    )


def _grid(config: RunConfig, geom: TubeGeometry) -> StripGrid:
    g = config.grid
    return StripGrid.for_geometry(geom, g.n_s, g.n_t, g.S_override)


def _sweep(config: RunConfig, variable: str) -> list[float] | None:
    if config.sweep.variable == variable:
        return [float(v) for v in config.sweep.values]
    return None


def _run_transverse(config: RunConfig, result: RunResult) -> None:
    mass = config.mass
    roots = [solve_root(mass, p) for p in config.transverse.p_values]
    for root in roots:
        result.rows.append(
            {
                "p": root.p,
                "mass": root.mass,
                "E_p": root.E,
                "bracket_lo": root.bracket[0],
                "bracket_hi": root.bracket[1],
                "residual": root.residual,
            }
        )
    n = config.transverse.fem_n
    fem = transverse_fem_oracle(0.0, mass, n, count=1)
    exact = mass**2 + solve_root(mass, 1).E
    result.summary.update(
        {
            "max_residual": max(r.residual for r in roots),
            "max_relative_residual": max(r.relative_residual for r in roots),
            "sqrt_E1_lower_bound": e1_lower_bound(mass),
            "fem_n": n,
            "fem_lowest": float(fem[0]),
            "fem_error": abs(float(fem[0]) - exact),
        }
    )
    if 0.0 < mass <= 1e-2:
        result.summary["small_mass_ratio"] = small_mass_check(mass)
    if mass >= 1e2:
        result.summary["large_mass_ratio"] = large_mass_check(mass)


def _run_dispersion(config: RunConfig, result: RunResult) -> None:
    mass = config.mass
    ks = _sweep(config, "k") or list(DEFAULT_K_GRID)
    series: list[PlotSeries] = []
    for p in config.transverse.p_values:
        E_p = solve_root(mass, p).E
        minus: list[float] = []
        plus: list[float] = []
        for k in ks:
            lo, hi = dispersion(k, mass, p)
            minus.append(lo)
            plus.append(hi)
            result.rows.append({"k": k, "p": p, "lambda_minus": lo, "lambda_plus": hi, "E_p": E_p})
        series.append(PlotSeries(label=f"$\\lambda_{{{p}}}^{{+}}$", x=list(ks), y=plus))
        series.append(PlotSeries(label=f"$\\lambda_{{{p}}}^{{-}}$", x=list(ks), y=minus, style="--"))
    result.summary["gap_half_width"] = math.sqrt(mass**2 + solve_root(mass, 1).E)
    result.plots.append(PlotSpec(name="dispersion", xlabel="$k$", ylabel="$\\lambda$", series=series))


def _run_edge(config: RunConfig, result: RunResult) -> None:
    epsilons = _sweep(config, "epsilon") or [config.epsilon]
    masses = _sweep(config, "mass") or [config.mass]
    for eps in epsilons:
        for m in masses:
            edge = essential_edge(eps, m)
            result.rows.append(
                {
                    "epsilon": eps,
                    "m": m,
                    "edge": edge,
                    "renormalized_edge": edge - math.pi / (4.0 * eps),
                    "effective_mass": effective_mass(m),
                }
            )


def _run_thin_sweep(config: RunConfig, result: RunResult) -> None:
    m = config.mass
    epsilons = sorted(_sweep(config, "epsilon") or list(DEFAULT_THIN_EPSILONS), reverse=True)
    m_e = effective_mass(m)
    errors: list[float] = []
    for eps in epsilons:
        renormalized = essential_edge(eps, m) - math.pi / (4.0 * eps)
        error = abs(renormalized - m_e)
        errors.append(error)
        result.rows.append(
            {"epsilon": eps, "m": m, "renormalized_edge": renormalized, "effective_mass": m_e, "error": error}
        )
    slopes = [
        math.log(e0 / e1) / math.log(x0 / x1)
        for (x0, e0), (x1, e1) in zip(zip(epsilons, errors), zip(epsilons[1:], errors[1:]))
        if e0 > 0 and e1 > 0
    ]
    result.summary.update({"slopes": slopes, "final_error": errors[-1] if errors else math.nan})
    result.plots.append(
        PlotSpec(
            name="thin_sweep",
            xlabel="$\\varepsilon$",
            ylabel="$|E_{\\mathrm{ess}} - \\pi/(4\\varepsilon) - 2m/\\pi|$",
            series=[PlotSeries(label="error", x=epsilons, y=errors, style="o-")],
            log_x=True,
            log_y=True,
        )
    )


def _spectrum_rows(
    result: RunResult, spectral: SpectralResult, m: float, calibrated_edge: float, margin: float
) -> int:
    values = spectral.eigenvalues
    groups = group_multiplicities(values)
    multiplicity: list[int] = []
    for _value, size in groups:
        multiplicity.extend([size] * size)
    below = 0
    for idx, mu in enumerate(values):
        shifted = float(mu) + m**2
        is_below = bool(mu < calibrated_edge - margin)
        below += int(is_below)
        result.rows.append(
            {
                "index": idx + 1,
                "mu": float(mu),
                "lambda_dirac": math.sqrt(shifted) if shifted >= 0 else math.nan,
                "residual": float(spectral.residuals[idx]),
                "converged": bool(spectral.converged[idx]),
                "below_edge": is_below,
                "multiplicity": multiplicity[idx],
            }
        )
    return below


def _run_spectrum(config: RunConfig, result: RunResult) -> None:
    m = config.mass
    eps = config.epsilon
    profile = build_profile(config)
    geom = validate_tube(profile, eps)
    grid = _grid(config, geom)
    options = solver_options(config)
    forms = assemble_square_form(geom, m, grid)
    if config.output.export_matrices:
        result.matrices.append(("q_m", forms))

    analytic_edge = essential_edge_squared_shifted(eps, m)
    spectral: SpectralResult
    try:
        spectral = solve_with(forms, options)
    except NotConverged as exc:
        spectral = exc.result
        result.error = exc

    if profile.is_straight:
        calibrated_edge = float(spectral.eigenvalues[0])
    else:
        straight = validate_tube(CurvatureProfile.zero(), eps)
        reference = assemble_square_form(straight, m, grid)
        try:
            calibrated_edge = float(solve_with(reference, solver_options(config, count=2)).eigenvalues[0])
        except NotConverged as exc:
            calibrated_edge = float(exc.result.eigenvalues[0])
            result.error = result.error or exc

    margin = max(options.tol, 1e-9) * max(1.0, abs(calibrated_edge))
    below = _spectrum_rows(result, spectral, m, calibrated_edge, margin)
    j_min, j_max = sample_jacobian(geom)
    result.summary.update(
        {
            "dimension": forms.dimension,
            "grid": {"S": grid.S, "n_s": grid.n_s, "n_t": grid.n_t},
            "analytic_edge": analytic_edge,
            "calibrated_edge": calibrated_edge,
            "below_edge_count": below,
            "iterations": spectral.iterations,
            "all_converged": spectral.all_converged,
            "jacobian_range": [j_min, j_max],
            "injectivity_sampled_ok": geom.validity.injectivity_sampled_ok,
            "message": (
                f"{below} discrete eigenvalue(s) below edge" if below else "no discrete eigenvalues below edge"
            ),
        }
    )
    if m > 0 and below:
        result.summary["dirac_levels_below_edge"] = [
            row["lambda_dirac"] for row in result.rows if row["below_edge"]
        ]
    result.plots.append(
        PlotSpec(
            name="spectrum",
            xlabel="$j$",
            ylabel="$\\mu_j$",
            series=[
                PlotSeries(
                    label="$\\mu_j$",
                    x=[float(r["index"]) for r in result.rows],
                    y=[float(r["mu"]) for r in result.rows],
                    style="o",
                ),
                PlotSeries(
                    label="calibrated edge",
                    x=[1.0, float(max(1, len(result.rows)))],
                    y=[calibrated_edge, calibrated_edge],
                    style="--",
                ),
                PlotSeries(
                    label="$\\varepsilon^{-2}E_1(m\\varepsilon)$",
                    x=[1.0, float(max(1, len(result.rows)))],
                    y=[analytic_edge, analytic_edge],
                    style=":",
                ),
            ],
        )
    )


def _run_mass_sweep(config: RunConfig, result: RunResult) -> None:
    eps = config.epsilon
    geom = validate_tube(build_profile(config), eps)
    grid = _grid(config, geom)
    m_list = _sweep(config, "mass") or [me / eps for me in DEFAULT_MASS_EPSILON_PRODUCTS]
    rows = large_mass_gap(geom, grid, m_list, solver_options(config, count=2))
    for row in rows:
        result.rows.append(
            {
                "m": row.m,
                "m_epsilon": row.m_epsilon,
                "mu1_square": row.mu1_square,
                "mu1_dirichlet": row.mu1_dirichlet,
                "gap": row.gap,
                "relative_gap": row.relative_gap,
            }
        )
    mu1 = [row.mu1_square for row in rows]
    gaps = [row.gap for row in rows]
    result.summary.update(
        {
            "dominated": all(g >= 0 for g in gaps),
            "mu1_nondecreasing": all(b >= a for a, b in zip(mu1, mu1[1:])),
            "gap_decreasing": all(b <= a for a, b in zip(gaps, gaps[1:])),
            "final_relative_gap": rows[-1].relative_gap if rows else math.nan,
            "nonrelativistic_lowest": [
                float(nonrelativistic_levels([row.mu1_dirichlet, row.mu1_dirichlet], row.m)[0])
                for row in rows
                if row.m > 0
            ],
        }
    )
    result.plots.append(
        PlotSpec(
            name="mass_sweep",
            xlabel="$m\\varepsilon$",
            ylabel="$(\\mu_1(q_\\infty) - \\mu_1(q_m)) / \\mu_1(q_\\infty)$",
            series=[
                PlotSeries(
                    label="relative gap",
                    x=[row.m_epsilon for row in rows],
                    y=[max(row.relative_gap, np.finfo(float).tiny) for row in rows],
                    style="o-",
                )
            ],
            log_x=True,
            log_y=True,
        )
    )


def _run_certify(config: RunConfig, result: RunResult) -> None:
    m = config.mass
    profile = build_profile(config)
    for eps in _sweep(config, "epsilon") or [config.epsilon]:
        geom = validate_tube(profile, eps)
        cert = certify(geom, m)
        result.rows.append(
            {
                "epsilon": cert.epsilon,
                "m": cert.m,
                "I_epsilon": cert.I_epsilon,
                "m0_bound": cert.m0_bound,
                "condition_holds": cert.condition_holds,
                "predicted_discrete_count_at_least": cert.predicted_discrete_count_at_least,
            }
        )
        entry: dict[str, Any] = {
            "epsilon": cert.epsilon,
            "I_epsilon": cert.I_epsilon,
            "m0_bound": cert.m0_bound,
            "L": cert.L,
            "eta": cert.eta,
        }
        if cert.L > 0:
            energy = variational_energy(geom, m, cert.eta, cert.I_epsilon)
            bounds = variational_upper_bounds(geom, m, cert.eta, cert.I_epsilon)
            entry.update(
                {
                    "q_value": energy.q_value,
                    "rayleigh_quotient": energy.rayleigh_quotient,
                    "upper_bound_root": bounds.via_root_bound,
                    "upper_bound_crude": bounds.crude,
                    "upper_bound_optimal_eta": bounds.at_optimal_eta,
                }
            )
        result.summary.setdefault("certificates", []).append(entry)


_HANDLERS = {
    "transverse": _run_transverse,
    "dispersion": _run_dispersion,
    "edge": _run_edge,
    "spectrum": _run_spectrum,
    "thin-sweep": _run_thin_sweep,
    "mass-sweep": _run_mass_sweep,
    "certify": _run_certify,
}


def run(subcommand: str, config: RunConfig) -> RunResult:
    handler = _HANDLERS.get(subcommand)
    if handler is None:
        raise ValueError(f"unknown subcommand: {subcommand!r}")
    result = RunResult(subcommand=subcommand, config=config, header=list(HEADERS[subcommand]))
    started = time.perf_counter()
    with run_context(subcommand=subcommand, run_id=uuid.uuid4().hex[:12], meta={}):
        log_event("run_started", meta={"epsilon": config.epsilon, "mass": config.mass})
        try:
            handler(config, result)
        except NotConverged as exc:
            result.error = exc
        elapsed = time.perf_counter() - started
        add_run_meta(rows=len(result.rows), converged=result.error is None)
        meta = dict(get_run_context().get("meta") or {})
        log_event("run_finished", meta={"seconds": round(elapsed, 3)})
    if "solver_iterations" in meta:
        result.summary["solver_iterations"] = meta["solver_iterations"]
    logger.info("%s finished: %d rows in %.2fs", subcommand, len(result.rows), elapsed)
    return result


__all__ = [
    "HEADERS",
    "PlotSeries",
    "PlotSpec",
    "RunResult",
    "build_profile",
    "run",
    "solver_options",
]
