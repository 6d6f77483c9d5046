import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qcgl_sources.grid import GridSpec  # noqa: E402
from qcgl_sources.profile import nozaki_bekki, solve_source  # noqa: E402
from qcgl_sources.wavetrain import QcglParams  # noqa: E402

# reference configuration: the stability scans found no spectrally stable source,
# and this one forms phase plateaus early enough for the nonlinear runs
REFERENCE = QcglParams(2.0, 0.4, -0.1, -0.05)


@pytest.fixture(scope="session")
def reference_profile():
    guess = nozaki_bekki(REFERENCE.alpha, REFERENCE.beta, GridSpec(80.0, 0.1))
    return solve_source(REFERENCE, guess)


@pytest.fixture(scope="session")
def nb_profile():
    """Nozaki-Bekki hole at (alpha, beta) = (1, -1)."""
    return nozaki_bekki(1.0, -1.0, GridSpec(60.0, 0.05))
