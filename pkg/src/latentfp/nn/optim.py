"""Adam with L2 weight decay folded into the gradient."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass
class TrainConfig:
    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    weight_decay_mu: float = 1e-4
    batch_size: int = 12
    epochs: int = 400
    iterations_per_epoch: int = 64
    lam: float = 0.1
    noise_sigma: float = 3.5e-3
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("learning_rate", "adam_epsilon", "batch_size", "epochs", "iterations_per_epoch"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.weight_decay_mu < 0 or self.noise_sigma < 0 or self.lam < 0:
            raise ValueError("weight_decay_mu, noise_sigma and lam must be >= 0")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")

    @property
    def total_iterations(self) -> int:
        return self.epochs * self.iterations_per_epoch

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AdamState:
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    t: int = 0

    @classmethod
    def zeros_like(cls, params: list[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState, config: TrainConfig) -> AdamState:
    """One in-place Adam update.

    The decay term ``mu * param`` is added to each gradient before the moment
    updates, i.e. classic L2 regularization rather than decoupled decay.
    """
    if not state.m:
        fresh = AdamState.zeros_like(params)
        state.m, state.v = fresh.m, fresh.v
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and optimizer state disagree in length")
    state.t += 1
    b1, b2, mu = config.beta1, config.beta2, config.weight_decay_mu
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        g = g + mu * p
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / c1
        v_hat = v / c2
        p -= (config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_epsilon)).astype(p.dtype)
    return state
