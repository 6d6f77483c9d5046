"""Standing sources of the cubic-quintic complex Ginzburg-Landau equation:
wave-train constants, source profiles, the linearization and its adjoint
null vectors, the modulation ansatz, direct simulation and verification."""

from .errors import DomainError, QcglError
from .wavetrain import QcglParams, WaveTrain, wave_train_constants

__all__ = ["DomainError", "QcglError", "QcglParams", "WaveTrain", "wave_train_constants"]
