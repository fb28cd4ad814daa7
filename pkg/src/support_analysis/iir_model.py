"""
IIR Initialization Error - Recurrent Priming Codec

Stacked single-pole filters y[t] = a y[t-1] + (1 - a) x[t] started from
y[-1] = 0 and driven by x = 1, as a linear stand-in for stacked GRU layers
started from zero hidden state. The error 1 - y[t] of the n-th filter tells
how many warm-up (priming) steps a stack of depth n needs.
"""

from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Any, Dict, Optional
import logging

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

CLOSED_FORM_DEPTHS = (1, 2, 3)
MAX_PRIMING_SEARCH = 10_000


@dataclass(frozen=True)
class IirConfig:
    """Pole a in (0, 1) and stack depth."""
    a: Real
    n_filters: int = 1

    def __post_init__(self):
        if not 0 < self.a < 1:
            raise ValueError(f"pole must lie in (0, 1), got {self.a}")
        if self.n_filters < 1:
            raise ValueError(f"need at least one filter, got {self.n_filters}")

    def to_dict(self) -> Dict[str, Any]:
        return {"a": float(self.a), "n_filters": self.n_filters}


def iir_error(n_filters: int, a: Real, t: int) -> Real:
    """Closed-form error of the n-th filter at step t, for n in {1, 2, 3}.

    Works with floats and with ``Fraction`` poles (exact result).
    """
    IirConfig(a, n_filters)
    if n_filters not in CLOSED_FORM_DEPTHS:
        raise ValueError(
            f"closed form exists for 1-3 filters, got {n_filters}; use iir_simulate"
        )
    if t < 0:
        raise ValueError(f"step index must be >= 0, got {t}")

    if n_filters == 1:
        return a ** (t + 1)
    if n_filters == 2:
        return (t + 2) * a ** (t + 1) - (t + 1) * a ** (t + 2)
    half = Fraction(1, 2) if isinstance(a, Fraction) else 0.5
    return (
        half * (t + 2) * (t + 3) * a ** (t + 1)
        - (t + 1) * (t + 3) * a ** (t + 2)
        + half * (t + 1) * (t + 2) * a ** (t + 3)
    )


def iir_simulate(n_filters: int, a: float, t_max: int) -> np.ndarray:
    """Run the cascade and return errors of every stage.

    Returns:
        Array (n_filters, t_max + 1); row j holds 1 - y_{j+1}[t] for t = 0..t_max
    """
    IirConfig(a, n_filters)
    if t_max < 0:
        raise ValueError(f"t_max must be >= 0, got {t_max}")

    outputs = np.zeros((n_filters, t_max + 1), dtype=np.float64)
    previous = np.zeros(n_filters, dtype=np.float64)
    for t in range(t_max + 1):
        stage_input = 1.0
        for j in range(n_filters):
            previous[j] = a * previous[j] + (1.0 - a) * stage_input
            stage_input = previous[j]
        outputs[:, t] = previous
    return 1.0 - outputs


def min_priming_steps(n_filters: int, a: Real, threshold: Optional[Real] = None) -> int:
    """First step t at which the n-th filter's error is at most ``threshold`` (default a^2).

    The cascade runs in exact rational arithmetic, so boundary cases such as
    a = 1/3 for two filters resolve exactly.
    """
    IirConfig(a, n_filters)
    pole = a if isinstance(a, Fraction) else Fraction(a)
    limit = pole ** 2 if threshold is None else Fraction(threshold)

    state = [Fraction(0)] * n_filters
    for t in range(MAX_PRIMING_SEARCH):
        stage_input = Fraction(1)
        for j in range(n_filters):
            state[j] = pole * state[j] + (1 - pole) * stage_input
            stage_input = state[j]
        if 1 - state[-1] <= limit:
            return t
    raise ValueError(
        f"error did not fall below {float(limit):.3g} within {MAX_PRIMING_SEARCH} steps"
    )


def iir_table(n_filters: int, a: float, t_max: int) -> pd.DataFrame:
    """Simulated errors as a table: one row per t, one column per stage."""
    errors = iir_simulate(n_filters, a, t_max)
    table = pd.DataFrame({"t": np.arange(t_max + 1)})
    for j in range(n_filters):
        table[f"error_{j + 1}"] = errors[j]
    if n_filters in CLOSED_FORM_DEPTHS:
        table["closed_form"] = [iir_error(n_filters, a, t) for t in range(t_max + 1)]
    return table
