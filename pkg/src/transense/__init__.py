"""Quantum-limited transmittance estimation in thermal noise.

Fisher-information calculators for six sensing schemes, the CRB-achieving
TMSV receiver (two-mode squeezer + photon-number-resolving detection),
maximum-likelihood estimators with a two-stage protocol, and a Monte Carlo
harness for MSE-convergence studies.
"""

__version__ = "0.1.0"

from .exceptions import (  # noqa: E402
    DomainError,
    NumericDomainError,
    ReceiverExistenceError,
    StepUnderflowError,
    TruncationError,
    UnsupportedRangeError,
)
from .gaussian import Scenario  # noqa: E402

__all__ = [
    "__version__",
    "Scenario",
    "DomainError",
    "NumericDomainError",
    "ReceiverExistenceError",
    "StepUnderflowError",
    "TruncationError",
    "UnsupportedRangeError",
]
