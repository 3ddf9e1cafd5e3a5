from __future__ import annotations

import csv
import json
import math
import subprocess
from pathlib import Path
from typing import Any, Iterable

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from backend.dirac_waveguide.config import PROJECT_ROOT, logger, settings  # noqa: E402
from backend.dirac_waveguide.services.run_service import PlotSpec, RunResult  # noqa: E402
from backend.dirac_waveguide.services.strip_operator import export_matrix_market  # noqa: E402


class ArtifactWriteError(RuntimeError):
    pass


def format_cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        f = float(value)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return value


def version_string() -> str:
    if settings.version_override:
        return settings.version_override
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=PROJECT_ROOT,
            capture_output=True,
            text=True,
            timeout=10,
            check=False,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    described = out.stdout.strip()
    return described if out.returncode == 0 and described else "unknown"


def summary_document(result: RunResult, version: str | None = None) -> dict[str, Any]:
    summary = dict(result.summary)
    if result.error is not None:
        summary["error"] = str(result.error)
    return _jsonable(
        {
            "subcommand": result.subcommand,
            "version": version if version is not None else version_string(),
            "config": result.config.model_dump(mode="json"),
            "summary": summary,
            "rows": result.rows,
        }
    )


CSV_COMMENT = "# "


def csv_preamble(result: RunResult, version: str) -> list[str]:
    """Comment lines that echo the run: subcommand, version and the full config as JSON."""
    config = json.dumps(result.config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return [f"subcommand: {result.subcommand}", f"version: {version}", f"config: {config}"]


def _write_csv(
    path: Path, header: list[str], rows: Iterable[dict[str, Any]], preamble: Iterable[str] = ()
) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        for line in preamble:
            fh.write(f"{CSV_COMMENT}{line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(row.get(col, "")) for col in header])


def _write_svg(path: Path, plot: PlotSpec) -> None:
    with plt.rc_context({"svg.hashsalt": "dirac-waveguide", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        try:
            for series in plot.series:
                ax.plot(series.x, series.y, series.style, label=series.label)
            if plot.log_x:
                ax.set_xscale("log")
            if plot.log_y:
                ax.set_yscale("log")
            ax.set_xlabel(plot.xlabel)
            ax.set_ylabel(plot.ylabel)
            if len(plot.series) > 1:
                ax.legend(loc="best", fontsize="small")
            fig.tight_layout()
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)


class ArtifactStore:
    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def emit(self, result: RunResult, formats: Iterable[str], version: str | None = None) -> list[Path]:
        stem = result.subcommand.replace("-", "_")
        version = version if version is not None else version_string()
        written: list[Path] = []
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            for fmt in formats:
                match fmt:
                    case "csv":
                        target = self.directory / f"{stem}.csv"
                        _write_csv(target, result.header, result.rows, csv_preamble(result, version))
                        written.append(target)
                    case "json":
                        target = self.directory / f"{stem}.json"
                        doc = summary_document(result, version)
                        target.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
                        written.append(target)
                    case "svg":
                        for plot in result.plots:
                            target = self.directory / f"{plot.name}.svg"
                            _write_svg(target, plot)
                            written.append(target)
                    case _:
                        raise ValueError(f"unknown output format: {fmt!r}")
            for name, forms in result.matrices:
                written.extend(export_matrix_market(forms, self.directory / "matrices", f"{stem}_{name}"))
        except OSError as exc:
            raise ArtifactWriteError(f"cannot write artifacts to {self.directory}: {exc}") from exc
        logger.debug("wrote %d artifact(s) to %s", len(written), self.directory)
        return written


def emit(result: RunResult, formats: Iterable[str], directory: str | Path, version: str | None = None) -> list[Path]:
    return ArtifactStore(directory).emit(result, formats, version)


__all__ = [
    "ArtifactStore",
    "ArtifactWriteError",
    "CSV_COMMENT",
    "csv_preamble",
    "emit",
    "format_cell",
    "summary_document",
    "version_string",
]
