import os
import sys
from pathlib import Path

import pytest


ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

os.environ.setdefault("APP_ENV", "test")
os.environ.setdefault("DIRAC_VERSION", "test")


@pytest.fixture()
def canonical_bump():
    from backend.dirac_waveguide.services.curve_geometry import CurvatureProfile

    return CurvatureProfile.polynomial_bump(1.0, 1.0)
