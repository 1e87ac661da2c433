"""Ready-made simulation scenarios: the two-dose efficacy/safety study and the Holm trade-off study."""
import math
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtri

from .config import DEFAULT_SEED
from .errors import ScenarioError
from .graph import efficacy_safety_graph, holm_graph
from .models import CurveSpec, InformationWeightSpec, Scenario

ALPHA = 0.025

# Two-dose efficacy/safety study (hazard-ratio scale, log-transformed)
NONINFERIORITY_MARGIN = math.log(1.46)
SUPERIORITY_EFFECT = 0.491967
STANDARD_ERROR = 0.122749
# STANDARD_ERROR / sqrt(2): twice the efficacy information. Matches the compatible bounds of
# safety hypotheses without an effect, -z(0.0125) * SE = -0.195 and -z(0.025) * SE = -0.171
SAFETY_STANDARD_ERROR = 0.086797
Q_EFFICACY = 0.00063
CROSS_CORRELATION = 0.5

# True (E1, E2, S1, S2) per scenario, in units of SUPERIORITY_EFFECT
TRIAL_DESIGNS = {
    1: (0, 0, 1, 1),
    2: (1, 1, 1, 1),
    3: (0, 1, 1, 1),
    4: (0, 0, 1, 0),
    5: (1, 0, 0, 0),
    6: (1, 1, 0, 0),
    7: (1, 1, 1, 0),
}

# Holm trade-off study
HOLM_SIZE = 5
HOLM_Q_GRID = [1e-10, 1e-4, 0.01, 0.1, 0.38, 0.8, 1.0]
SAFETY_Q_GRID = [1e-10, 0.01, 0.1, 0.38, 1.0]


def efficacy_safety_correlation() -> np.ndarray:
    corr = np.eye(4)
    corr[0, 1] = corr[1, 0] = CROSS_CORRELATION
    corr[2, 3] = corr[3, 2] = CROSS_CORRELATION
    return corr


def _two_dose(name: str, theta: Sequence[float], q_safety: float, n_sims: int, seed: int,
              safety_se: float, curve: Optional[CurveSpec] = None) -> Scenario:
    if not safety_se > 0:
        raise ScenarioError(f"safety standard error must be positive, got {safety_se}")
    return Scenario(
        name=name,
        graph=efficacy_safety_graph(treatments=2, alpha=ALPHA),
        weights=InformationWeightSpec(per_hypothesis=[Q_EFFICACY, Q_EFFICACY, q_safety, q_safety]),
        true_theta=list(theta),
        stderrs=[STANDARD_ERROR, STANDARD_ERROR, safety_se, safety_se],
        correlation=efficacy_safety_correlation().tolist(),
        shifts=[NONINFERIORITY_MARGIN, NONINFERIORITY_MARGIN, 0.0, 0.0],
        n_sims=n_sims,
        seed=seed,
        curve=curve
    )


def trial_scenario(number: int, q_safety: float = 1e-10, n_sims: int = 100000, seed: int = DEFAULT_SEED,
                   safety_se: float = SAFETY_STANDARD_ERROR) -> Scenario:
    """Two-dose scenario; efficacy is tested for non-inferiority, safety for superiority."""
    if number not in TRIAL_DESIGNS:
        raise ScenarioError(f"unknown scenario {number}; choose one of {sorted(TRIAL_DESIGNS)}")
    theta = [SUPERIORITY_EFFECT * k for k in TRIAL_DESIGNS[number]]
    return _two_dose(f"trial_scenario{number}", theta, q_safety, n_sims, seed, safety_se)


def global_null_scenario(q_safety: float = 1e-10, n_sims: int = 100000, seed: int = DEFAULT_SEED,
                         safety_se: float = SAFETY_STANDARD_ERROR) -> Scenario:
    """Every parameter on its tested border."""
    theta = [-NONINFERIORITY_MARGIN, -NONINFERIORITY_MARGIN, 0.0, 0.0]
    return _two_dose("global_null", theta, q_safety, n_sims, seed, safety_se)


def safety_curve_scenario(number: int = 1, q_grid: Optional[Sequence[float]] = None,
                          n_sims: int = 100000, seed: int = DEFAULT_SEED,
                          safety_se: float = SAFETY_STANDARD_ERROR) -> Scenario:
    """Sweeps the safety weight q_S with the efficacy weight held fixed."""
    base = trial_scenario(number, n_sims=n_sims, seed=seed, safety_se=safety_se)
    curve = CurveSpec(q_grid=list(q_grid or SAFETY_Q_GRID), hypotheses=["S1", "S2"])
    return base.model_copy(update={"name": f"safety_curve{number}", "curve": curve})


def bonferroni_power_effect(m: int = HOLM_SIZE, alpha: float = ALPHA, power: float = 0.8) -> float:
    """Effect for which each Bonferroni test at alpha/m has the given power (unit SE)."""
    return float(-ndtri(alpha / m) - ndtri(1.0 - power))


def holm_tradeoff_scenario(q: float = 1.0, n_sims: int = 100000, seed: int = DEFAULT_SEED,
                           q_grid: Optional[Sequence[float]] = None) -> Scenario:
    c = bonferroni_power_effect()
    return Scenario(
        name="holm5_tradeoff",
        graph=holm_graph(HOLM_SIZE, alpha=ALPHA),
        weights=InformationWeightSpec.of(q),
        true_theta=[c] * HOLM_SIZE,
        stderrs=[1.0] * HOLM_SIZE,
        correlation=np.eye(HOLM_SIZE).tolist(),
        n_sims=n_sims,
        seed=seed,
        curve=CurveSpec(q_grid=list(q_grid or HOLM_Q_GRID))
    )
