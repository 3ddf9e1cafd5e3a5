from __future__ import annotations

import csv
import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from backend.dirac_waveguide.models import RunConfig, SweepSpec, TransverseSpec
from backend.dirac_waveguide.services.curve_geometry import CurvatureProfile, validate_tube
from backend.dirac_waveguide.services.run_service import HEADERS, RunResult, run
from backend.dirac_waveguide.services.strip_operator import StripGrid, assemble_square_form
from backend.dirac_waveguide.storage import ArtifactStore, ArtifactWriteError, emit, summary_document
from backend.dirac_waveguide.storage.artifact_store import CSV_COMMENT, format_cell


def _transverse_result() -> RunResult:
    config = RunConfig(mass=0.0, transverse=TransverseSpec(p_values=[1, 2, 3, 4], fem_n=64))
    return run("transverse", config)


def _dispersion_result() -> RunResult:
    config = RunConfig(
        mass=1.0,
        sweep=SweepSpec(variable="k", values=[0.0, 0.5, 1.0, 1.5]),
        transverse=TransverseSpec(p_values=[1, 2]),
    )
    return run("dispersion", config)


def test_format_cell() -> None:
    assert format_cell(True) == "true"
    assert format_cell(np.bool_(False)) == "false"
    assert format_cell(3) == "3"
    assert format_cell(0.1) == "0.10000000000000001"
    assert format_cell(np.float64(math.pi**2 / 16.0)) == "%.17g" % (math.pi**2 / 16.0)


def test_transverse_csv_has_full_precision(tmp_path) -> None:
    result = _transverse_result()
    written = emit(result, ["csv", "json"], tmp_path, version="test")
    assert [p.name for p in written] == ["transverse.csv", "transverse.json"]

    with (tmp_path / "transverse.csv").open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(line for line in fh if not line.startswith(CSV_COMMENT)))
    assert rows[0] == HEADERS["transverse"]
    assert len(rows) == 5
    for p, row in enumerate(rows[1:], start=1):
        assert row[0] == str(p)
        assert row[2] == "%.17g" % ((2 * p - 1) ** 2 * math.pi**2 / 16.0)


def test_summary_json_round_trips_the_config(tmp_path) -> None:
    result = _transverse_result()
    emit(result, ["json"], tmp_path, version="v-test")
    doc = json.loads((tmp_path / "transverse.json").read_text(encoding="utf-8"))

    assert doc["subcommand"] == "transverse"
    assert doc["version"] == "v-test"
    assert RunConfig.model_validate(doc["config"]) == result.config
    assert len(doc["rows"]) == 4
    assert doc["summary"]["fem_n"] == 64


def test_non_finite_summary_values_become_strings() -> None:
    result = RunResult(
        subcommand="certify",
        config=RunConfig(),
        header=list(HEADERS["certify"]),
        summary={"m0_bound": math.inf, "slope": math.nan, "floor": -math.inf},
    )
    doc = summary_document(result, version="test")
    assert doc["summary"] == {"m0_bound": "inf", "slope": "nan", "floor": "-inf"}
    json.dumps(doc, allow_nan=False)


def test_dispersion_svg_is_well_formed(tmp_path) -> None:
    written = emit(_dispersion_result(), ["svg"], tmp_path, version="test")
    assert [p.name for p in written] == ["dispersion.svg"]
    root = ET.parse(tmp_path / "dispersion.svg").getroot()
    assert root.tag.endswith("svg")


def test_reruns_are_byte_identical(tmp_path) -> None:
    first, second = tmp_path / "a", tmp_path / "b"
    emit(_dispersion_result(), ["csv", "json", "svg"], first, version="test")
    emit(_dispersion_result(), ["csv", "json", "svg"], second, version="test")

    for name in ("dispersion.csv", "dispersion.json", "dispersion.svg"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_matrices_are_exported_next_to_the_results(tmp_path, canonical_bump: CurvatureProfile) -> None:
    forms = assemble_square_form(validate_tube(canonical_bump, 0.2), 1.0, StripGrid(S=2.0, n_s=9, n_t=5))
    result = RunResult(
        subcommand="spectrum",
        config=RunConfig(),
        header=list(HEADERS["spectrum"]),
        matrices=[("q_m", forms)],
    )
    written = ArtifactStore(tmp_path).emit(result, ["csv"], version="test")
    names = sorted(p.relative_to(tmp_path).as_posix() for p in written)
    assert names == ["matrices/spectrum_q_m_A.mtx", "matrices/spectrum_q_m_B.mtx", "spectrum.csv"]


def test_unwritable_directory_raises(tmp_path) -> None:
    blocked = tmp_path / "blocked"
    blocked.write_text("not a directory", encoding="utf-8")
    with pytest.raises(ArtifactWriteError):
        emit(_transverse_result(), ["csv"], blocked, version="test")


def test_csv_preamble_echoes_the_config(tmp_path) -> None:
    result = _transverse_result()
    emit(result, ["csv"], tmp_path, version="v-test")
    lines = (tmp_path / "transverse.csv").read_text(encoding="utf-8").splitlines()

    comments = [line[len(CSV_COMMENT):] for line in lines if line.startswith(CSV_COMMENT)]
    assert comments[:2] == ["subcommand: transverse", "version: v-test"]
    assert comments[2].startswith("config: ")
    echoed = json.loads(comments[2][len("config: "):])
    assert RunConfig.model_validate(echoed) == result.config
    # comments come first, then the header
    assert lines[len(comments)] == ",".join(HEADERS["transverse"])
