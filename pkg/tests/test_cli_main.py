from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pytest

import backend.dirac_waveguide.services.run_service as run_service
import backend.dirac_waveguide.storage as storage
from backend.dirac_waveguide.main import build_parser, main, overrides_from_args
from backend.dirac_waveguide.models import RunConfig
from backend.dirac_waveguide.services.eigensolve import NotConverged, SpectralResult


def test_overrides_from_args() -> None:
    args = build_parser().parse_args(
        ["dispersion", "--mass", "2", "--p", "1..3", "--k-max", "4", "--n-t", "9", "--format", "csv, svg"]
    )
    out = overrides_from_args(args)

    assert out["mass"] == 2.0
    assert out["transverse"] == {"p_values": [1, 2, 3]}
    assert out["grid"] == {"n_t": 9}
    assert out["output"] == {"formats": ["csv", "svg"]}
    assert out["sweep"]["variable"] == "k"
    assert len(out["sweep"]["values"]) == 41
    assert out["sweep"]["values"][-1] == 4.0


def test_transverse_run_writes_csv(tmp_path, capsys) -> None:
    code = main(["transverse", "--mass", "0.5", "--p", "1..3", "--out", str(tmp_path), "--format", "csv"])
    assert code == 0
    lines = (tmp_path / "transverse.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("# subcommand: transverse")
    assert len([line for line in lines if not line.startswith("#")]) == 4
    assert "transverse: ok" in capsys.readouterr().out


def test_bad_mode_range_is_a_config_error(tmp_path, capsys) -> None:
    assert main(["transverse", "--p", "3..1", "--out", str(tmp_path)]) == 2
    assert "--p expects" in capsys.readouterr().err
    assert main(["transverse", "--p", "x", "--out", str(tmp_path)]) == 2


def test_even_n_t_is_a_config_error(tmp_path, capsys) -> None:
    assert main(["spectrum", "--n-t", "8", "--out", str(tmp_path)]) == 2
    assert "n_t" in capsys.readouterr().err


def test_too_wide_tube_is_a_validation_error(tmp_path, capsys) -> None:
    # default curve is the bump with κ₀ = 1, so ε must stay below 1/2
    assert main(["certify", "--epsilon", "0.6", "--out", str(tmp_path)]) == 2
    assert "WidthTooLarge" in capsys.readouterr().err


def test_straight_spectrum_reports_no_bound_states(tmp_path) -> None:
    config_path = tmp_path / "straight.yaml"
    config_path.write_text(
        "\n".join(
            [
                "curve:",
                "  kind: zero",
                "epsilon: 0.5",
                "mass: 1.0",
                "grid:",
                "  S_override: 2.0",
                "  n_s: 9",
                "  n_t: 5",
                "solver:",
                "  count: 2",
                "",
            ]
        ),
        encoding="utf-8",
    )
    out = tmp_path / "out"
    code = main(["spectrum", "--config", str(config_path), "--out", str(out), "--format", "csv,json"])
    assert code == 0

    doc = json.loads((out / "spectrum.json").read_text(encoding="utf-8"))
    assert doc["summary"]["message"] == "no discrete eigenvalues below edge"
    assert doc["summary"]["below_edge_count"] == 0
    assert all(row["below_edge"] is False for row in doc["rows"])


def test_certify_reports_a_finite_threshold(tmp_path) -> None:
    code = main(["certify", "--epsilon", "0.05", "--mass", "1", "--out", str(tmp_path), "--format", "json"])
    assert code == 0
    doc = json.loads((tmp_path / "certify.json").read_text(encoding="utf-8"))
    row = doc["rows"][0]
    assert row["I_epsilon"] > 0.0
    assert isinstance(row["m0_bound"], float)
    assert row["condition_holds"] is True
    assert doc["summary"]["certificates"][0]["eta"] > 1.0


def test_unconverged_solver_exits_with_partial_results(tmp_path, monkeypatch, capsys) -> None:
    partial = SpectralResult(
        eigenvalues=np.array([1.0]),
        residuals=np.array([1e-2]),
        iterations=3,
        converged=np.array([False]),
    )

    def _fake_run(subcommand: str, config: RunConfig) -> run_service.RunResult:
        result = run_service.RunResult(subcommand=subcommand, config=config, header=["index", "mu"])
        result.rows.append({"index": 1, "mu": 1.0})
        result.error = NotConverged("1 of 1 eigenpairs above tol", partial)
        return result

    monkeypatch.setattr(run_service, "run", _fake_run)
    code = main(["spectrum", "--out", str(tmp_path), "--format", "csv,json"])

    assert code == 3
    assert (tmp_path / "spectrum.csv").exists()
    doc = json.loads((tmp_path / "spectrum.json").read_text(encoding="utf-8"))
    assert "eigenpairs above tol" in doc["summary"]["error"]
    assert "did not converge" in capsys.readouterr().err


def test_artifact_write_failure_exits_one(tmp_path, monkeypatch) -> None:
    def _boom(*args, **kwargs):
        raise storage.ArtifactWriteError("disk full")

    monkeypatch.setattr(storage, "emit", _boom)
    assert main(["edge", "--out", str(tmp_path)]) == 1


def test_unexpected_failure_exits_one(tmp_path, monkeypatch) -> None:
    def _fake_run(subcommand: str, config: RunConfig) -> run_service.RunResult:
        raise RuntimeError("boom")

    monkeypatch.setattr(run_service, "run", _fake_run)
    assert main(["edge", "--out", str(tmp_path)]) == 1


def test_canonical_bump_spectrum_converges_and_binds(tmp_path) -> None:
    config_path = Path(__file__).resolve().parents[1] / "configs" / "canonical_bump.yaml"
    code = main(["spectrum", "--config", str(config_path), "--out", str(tmp_path), "--format", "json"])
    assert code == 0

    doc = json.loads((tmp_path / "spectrum.json").read_text(encoding="utf-8"))
    summary = doc["summary"]
    assert summary["all_converged"] is True
    assert summary["below_edge_count"] >= 1
    assert summary["calibrated_edge"] >= summary["analytic_edge"]
    assert all(row["residual"] <= 1e-6 for row in doc["rows"])


def _csv_body(path: Path) -> list[list[str]]:
    with path.open(encoding="utf-8", newline="") as fh:
        return list(csv.reader(line for line in fh if not line.startswith("#")))


def test_thin_sweep_reports_first_order_convergence(tmp_path) -> None:
    code = main(["thin-sweep", "--mass", "1", "--out", str(tmp_path), "--format", "csv,json,svg"])
    assert code == 0

    body = _csv_body(tmp_path / "thin_sweep.csv")
    assert body[0] == run_service.HEADERS["thin-sweep"]
    assert [float(row[0]) for row in body[1:]] == [1e-2, 1e-3, 1e-4]

    doc = json.loads((tmp_path / "thin_sweep.json").read_text(encoding="utf-8"))
    summary = doc["summary"]
    assert set(summary) >= {"slopes", "final_error"}
    assert len(summary["slopes"]) == 2
    assert all(abs(slope - 1.0) <= 0.05 for slope in summary["slopes"])
    assert summary["final_error"] < 1e-3
    errors = [row["error"] for row in doc["rows"]]
    assert errors == sorted(errors, reverse=True)
    assert (tmp_path / "thin_sweep.svg").exists()


def test_thin_sweep_rejects_a_non_positive_width(tmp_path) -> None:
    assert main(["thin-sweep", "--epsilon", "0", "--out", str(tmp_path)]) == 2


def test_mass_sweep_gap_is_dominated_and_shrinks(tmp_path) -> None:
    argv = ["mass-sweep", "--epsilon", "0.2", "--S", "2", "--n-s", "9", "--n-t", "15"]
    code = main(argv + ["--out", str(tmp_path), "--format", "csv,json"])
    assert code == 0

    body = _csv_body(tmp_path / "mass_sweep.csv")
    assert body[0] == run_service.HEADERS["mass-sweep"]
    assert len(body) == 1 + len(run_service.DEFAULT_MASS_EPSILON_PRODUCTS)

    doc = json.loads((tmp_path / "mass_sweep.json").read_text(encoding="utf-8"))
    summary = doc["summary"]
    assert summary["dominated"] is True
    assert summary["mu1_nondecreasing"] is True
    assert summary["gap_decreasing"] is True
    assert summary["final_relative_gap"] < 0.05
    assert len(summary["nonrelativistic_lowest"]) == len(doc["rows"])
    gaps = [row["relative_gap"] for row in doc["rows"]]
    assert gaps[0] > 10.0 * gaps[-1]
    assert [row["m_epsilon"] for row in doc["rows"]] == [
        pytest.approx(v) for v in run_service.DEFAULT_MASS_EPSILON_PRODUCTS
    ]


def test_mass_sweep_exits_three_when_the_solver_stalls(tmp_path, monkeypatch) -> None:
    partial = SpectralResult(
        eigenvalues=np.array([1.0, 1.0]),
        residuals=np.array([1e-2, 1e-2]),
        iterations=5,
        converged=np.array([False, False]),
    )

    def _stalled(*args, **kwargs):
        raise NotConverged("2 of 2 eigenpairs above tol", partial)

    monkeypatch.setattr(run_service, "large_mass_gap", _stalled)
    code = main(["mass-sweep", "--out", str(tmp_path), "--format", "json"])
    assert code == 3
    doc = json.loads((tmp_path / "mass_sweep.json").read_text(encoding="utf-8"))
    assert "eigenpairs above tol" in doc["summary"]["error"]
    assert doc["rows"] == []
