"""Design arithmetic for calibrating the information weight of a trial."""
import math

from pydantic import BaseModel, Field
from scipy.special import ndtr, ndtri

from .errors import ModelError


class PowerDesign(BaseModel):
    information: float = Field(..., description="Total information I_n needed for the target power")
    alpha_local: float
    beta: float
    delta: float

    def alpha_for_effect(self, delta_effect: float) -> float:
        """Local level at which the test at the border has power 1 - beta against delta_effect."""
        z_beta = -float(ndtri(self.beta))
        return float(ndtr(-(delta_effect * math.sqrt(self.information) - z_beta)))


def power_design(alpha_local: float, beta: float, delta: float) -> PowerDesign:
    if not (0.0 < alpha_local < 1.0 and 0.0 < beta < 1.0):
        raise ModelError("alpha_local and beta must lie in (0, 1)")
    if not delta > 0.0:
        raise ModelError("delta must be positive")
    z_alpha = -float(ndtri(alpha_local))
    z_beta = -float(ndtri(beta))
    information = (z_alpha + z_beta) ** 2 / delta ** 2
    return PowerDesign(information=information, alpha_local=alpha_local, beta=beta, delta=delta)


def calibrate_information_weight(target_alpha_local: float, delta: float, alpha_local: float = 0.0125) -> float:
    """q with q ** delta * alpha_local == target_alpha_local."""
    if not 0.0 < target_alpha_local <= alpha_local:
        raise ModelError(f"target level {target_alpha_local} must lie in (0, {alpha_local}]")
    if not delta > 0.0:
        raise ModelError("delta must be positive")
    return (target_alpha_local / alpha_local) ** (1.0 / delta)
