"""JSON inputs and JSON/CSV outputs of the command-line tool."""
import json
import math
from pathlib import Path
from typing import Any, List, Sequence, Type, TypeVar

import pandas as pd
from pydantic import BaseModel

from .models import CurveRow, EstimatesInput, HypothesisGraph, Scenario, ScenarioResult

T = TypeVar("T", bound=BaseModel)


def _load(path: str, model: Type[T]) -> T:
    text = Path(path).read_text()
    return model.model_validate(json.loads(text))


def load_graph(path: str) -> HypothesisGraph:
    return _load(path, HypothesisGraph)


def load_estimates(path: str) -> EstimatesInput:
    return _load(path, EstimatesInput)


def load_scenario(path: str) -> Scenario:
    return _load(path, Scenario)


def encode_reals(values: Sequence[float]) -> List[Any]:
    """Infinite bounds become the strings "-inf"/"inf"; NaN becomes null."""
    out = []
    for v in values:
        if math.isnan(v):
            out.append(None)
        elif math.isinf(v):
            out.append("-inf" if v < 0 else "inf")
        else:
            out.append(v)
    return out


def dump_json(payload: dict, path: str = None) -> str:
    text = json.dumps(payload, indent=2)
    if path:
        Path(path).write_text(text + "\n")
    return text


def scenario_table(result: ScenarioResult) -> pd.DataFrame:
    rows = []
    for method, summary in result.methods.items():
        for j, label in enumerate(result.labels):
            rows.append({
                "hypothesis": label,
                "method": method,
                "power": summary.power[j],
                "mean_bound_finite": summary.mean_bound_finite[j],
                "mean_bound_rejected": summary.mean_bound_rejected[j],
                "pct_finite": 100.0 * summary.pct_finite[j],
                "power_se": summary.power_se[j],
                "mean_bound_finite_se": summary.mean_bound_finite_se[j],
                "mean_bound_rejected_se": summary.mean_bound_rejected_se[j],
            })
    return pd.DataFrame(rows)


def curve_table(rows: Sequence[CurveRow]) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in rows])


def write_csv(frame: pd.DataFrame, path: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
