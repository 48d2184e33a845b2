"""Agreement between machine scores and human ratings."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from scipy import stats as _sps

from .errors import AllTied, DegenerateVariance


@dataclass(frozen=True)
class RatedSample:
    machine_score: float
    human_rating: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.machine_score) and math.isfinite(self.human_rating)):
            raise ValueError("rated samples must be finite")


def load_ratings(path: Union[str, Path]) -> list[RatedSample]:
    """Ratings from JSON lines or a JSON array of ``{"machine_score", "human_rating"}`` objects."""
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    rows = json.loads(text) if stripped.startswith("[") else [
        json.loads(line) for line in text.splitlines() if line.strip()]
    return [RatedSample(float(r["machine_score"]), float(r["human_rating"])) for r in rows]


def _axes(samples: Sequence[RatedSample]) -> tuple[np.ndarray, np.ndarray]:
    if len(samples) < 2:
        raise DegenerateVariance("at least two samples are required")
    x = np.array([s.machine_score for s in samples], dtype=float)
    y = np.array([s.human_rating for s in samples], dtype=float)
    return x, y


def _check_variance(x: np.ndarray, y: np.ndarray) -> None:
    if np.all(x == x[0]):
        raise DegenerateVariance("machine scores are constant")
    if np.all(y == y[0]):
        raise DegenerateVariance("human ratings are constant")


def pcc(samples: Sequence[RatedSample]) -> float:
    """Pearson product-moment correlation."""
    x, y = _axes(samples)
    _check_variance(x, y)
    return float(_sps.pearsonr(x, y)[0])


def r_squared(samples: Sequence[RatedSample]) -> float:
    """Coefficient of determination of the least-squares fit ``human ~ a + b * machine``."""
    x, y = _axes(samples)
    _check_variance(x, y)
    fit = _sps.linregress(x, y)
    residual = y - (fit.intercept + fit.slope * x)
    ss_res = float(np.dot(residual, residual))
    centred = y - y.mean()
    return 1.0 - ss_res / float(np.dot(centred, centred))


def kendall_tau(samples: Sequence[RatedSample]) -> float:
    """Tie-corrected Kendall rank correlation (tau-b).

    Pair counts are kept as integers so that untied data gives an exact
    ``(C - D) / n0``.
    """
    if len(samples) < 2:
        raise AllTied("at least two samples are required")
    x = np.array([s.machine_score for s in samples], dtype=float)
    y = np.array([s.human_rating for s in samples], dtype=float)
    iu = np.triu_indices(len(x), k=1)
    dx = np.sign(x[:, None] - x[None, :])[iu].astype(np.int64)
    dy = np.sign(y[:, None] - y[None, :])[iu].astype(np.int64)
    untied_x = int(np.count_nonzero(dx))
    untied_y = int(np.count_nonzero(dy))
    if untied_x == 0 or untied_y == 0:
        raise AllTied("one axis has no untied pair")
    net = int(np.dot(dx, dy))
    if untied_x == untied_y:
        return net / untied_x
    return net / math.sqrt(untied_x * untied_y)


def agreement_row(samples: Sequence[RatedSample]) -> str:
    """``pcc 1-R^2 tau`` with three decimals, as printed by the CLI."""
    unexplained = max(0.0, 1.0 - r_squared(samples))
    return f"{pcc(samples):.3f} {unexplained:.3f} {kendall_tau(samples):.3f}"
