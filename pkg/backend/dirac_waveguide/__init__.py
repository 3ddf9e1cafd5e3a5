"""dirac-waveguide 入口：弯曲平面波导上带无穷质量边界条件的 Dirac 算子。"""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from backend.dirac_waveguide.models import RunConfig
    from backend.dirac_waveguide.services.run_service import RunResult


def run(subcommand: str, config: "RunConfig") -> "RunResult":
    # numpy 等到真正运行时再导入，main 需要先设置线程环境变量
    from backend.dirac_waveguide.services.run_service import run as _run

    return _run(subcommand, config)


__all__ = ["run"]
