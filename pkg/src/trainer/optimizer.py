"""
Optimizer - Recurrent Priming Codec

Adam with a large epsilon, plus global-norm gradient clipping.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Tuple
import logging

import numpy as np

from src.errors import ShapeError, TrainingDivergedError

logger = logging.getLogger(__name__)

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1.0
MAX_GRAD_NORM = 0.5


@dataclass
class AdamState:
    """First/second moments per parameter and the step counter."""
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    beta1: float = BETA1
    beta2: float = BETA2
    epsilon: float = EPSILON

    @classmethod
    def zeros_like(cls, params: Mapping[str, np.ndarray]) -> "AdamState":
        return cls(
            m={name: np.zeros_like(p) for name, p in params.items()},
            v={name: np.zeros_like(p) for name, p in params.items()},
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "step": self.step,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
            "tensors": len(self.m),
        }


def adam_step(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray],
              state: AdamState, lr: float) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """One Adam update; inputs are left untouched.

    theta' = theta - lr * m_hat / (sqrt(v_hat) + epsilon)

    Raises:
        TrainingDivergedError: a gradient holds NaN or infinity
    """
    for name in sorted(params):
        if name not in grads:
            raise ShapeError(f"adam_step: no gradient for '{name}'")
        if grads[name].shape != params[name].shape:
            raise ShapeError(
                f"adam_step: gradient of '{name}' has shape {grads[name].shape}, "
                f"parameter has {params[name].shape}"
            )
        if not np.all(np.isfinite(grads[name])):
            raise TrainingDivergedError(f"non-finite gradient for '{name}'", step=state.step)

    step = state.step + 1
    correction1 = 1.0 - state.beta1 ** step
    correction2 = 1.0 - state.beta2 ** step

    new_params: Dict[str, np.ndarray] = {}
    new_m: Dict[str, np.ndarray] = {}
    new_v: Dict[str, np.ndarray] = {}
    for name in sorted(params):
        p, g = params[name], grads[name].astype(params[name].dtype, copy=False)
        m = state.m.get(name, np.zeros_like(p))
        v = state.v.get(name, np.zeros_like(p))
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        new_params[name] = (p - lr * m_hat / (np.sqrt(v_hat) + state.epsilon)).astype(p.dtype)
        new_m[name] = m.astype(p.dtype)
        new_v[name] = v.astype(p.dtype)

    return new_params, AdamState(new_m, new_v, step, state.beta1, state.beta2, state.epsilon)


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    """L2 norm over every gradient tensor, accumulated in float64 in name order."""
    total = 0.0
    for name in sorted(grads):
        g = np.asarray(grads[name], dtype=np.float64)
        total += float(np.sum(g * g))
    return float(np.sqrt(total))


def clip_global_norm(grads: Mapping[str, np.ndarray],
                     max_norm: float = MAX_GRAD_NORM) -> Dict[str, np.ndarray]:
    """Scale all gradients by max_norm / norm when the global norm exceeds max_norm."""
    norm = global_norm(grads)
    if norm <= max_norm or norm == 0.0:
        return dict(grads)
    factor = max_norm / norm
    logger.debug(f"Clipping gradients: global norm {norm:.4g} -> {max_norm}")
    return {name: (g * factor).astype(g.dtype) for name, g in grads.items()}
