"""QKD figures of merit derived from a teleportation fidelity."""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import optimize

from qrelay.errors import DomainError

UNIVERSAL_LIMIT = 2.0 / 3.0
FOUR_STATE_LIMIT = 0.75
SIX_STATE_THRESHOLD = 0.724
ERROR_CORRECTION_THRESHOLD = 0.80


def _check_fraction(f: float, name: str = "fidelity") -> float:
    f = float(f)
    if not 0.0 <= f <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {f!r}")
    return f


def binary_entropy(p: float) -> float:
    p = _check_fraction(p, "probability")
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def secure_bits(f: float) -> float:
    """Asymptotic secure fraction 1 - 2 H2(1 - f) per sifted coincidence.

    Zero at and beyond the error-rate cutoff, including the mirrored branch
    of H2 for error rates above 1/2.
    """
    f = _check_fraction(f)
    if f <= 0.5:
        return 0.0
    return max(0.0, 1.0 - 2.0 * binary_entropy(1.0 - f))


def qber_cutoff() -> float:
    """Error rate at which the secure fraction reaches zero."""
    return optimize.brentq(lambda e: 1.0 - 2.0 * binary_entropy(e), 0.01, 0.5 - 1e-12, xtol=1e-14)


@dataclass(frozen=True)
class ThresholdReport:
    """Threshold flags for one fidelity; every comparison is strict."""

    fidelity: float
    passes_universal_2_3: bool
    passes_4state_75: bool
    passes_6state_724: bool
    passes_ec_80: bool
    secure_bits_per_coincidence: float

    def as_dict(self) -> dict:
        return {
            "fidelity": self.fidelity,
            "passes_universal_2_3": self.passes_universal_2_3,
            "passes_4state_75": self.passes_4state_75,
            "passes_6state_724": self.passes_6state_724,
            "passes_ec_80": self.passes_ec_80,
            "secure_bits_per_coincidence": self.secure_bits_per_coincidence,
        }


def threshold_report(f: float) -> ThresholdReport:
    f = _check_fraction(f)
    return ThresholdReport(
        fidelity=f,
        passes_universal_2_3=f > UNIVERSAL_LIMIT,
        passes_4state_75=f > FOUR_STATE_LIMIT,
        passes_6state_724=f > SIX_STATE_THRESHOLD,
        passes_ec_80=f > ERROR_CORRECTION_THRESHOLD,
        secure_bits_per_coincidence=secure_bits(f),
    )
