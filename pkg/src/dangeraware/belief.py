"""Bayesian belief over the binary danger-awareness coefficient."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class DegenerateEvidenceError(ValueError):
    """The observed action has zero likelihood under every weighted hypothesis."""


@dataclass(frozen=True)
class Belief:
    """P(beta = 1) and P(beta = 0)."""

    p_aware: float = 0.5
    p_unaware: float = 0.5

    def __post_init__(self) -> None:
        a, u = float(self.p_aware), float(self.p_unaware)
        if not (a >= 0 and u >= 0) or abs(a + u - 1.0) > 1e-12:
            raise ValueError(f"invalid belief ({a}, {u})")
        object.__setattr__(self, "p_aware", a)
        object.__setattr__(self, "p_unaware", u)

    @property
    def weights(self) -> np.ndarray:
        """Weights indexed by beta: ``[P(beta=0), P(beta=1)]``."""
        return np.array([self.p_unaware, self.p_aware])


def update_belief(prior: Belief, observed_action_index: int,
                  likelihoods: Sequence[np.ndarray]) -> Belief:
    """One Bayes step.

    ``likelihoods[beta]`` is the predictive action distribution under that
    beta, evaluated at the observed human state and the robot's true state.
    """
    l0 = float(likelihoods[0][observed_action_index])
    l1 = float(likelihoods[1][observed_action_index])
    num_aware = l1 * prior.p_aware
    num_unaware = l0 * prior.p_unaware
    denom = num_aware + num_unaware
    if denom == 0.0:
        raise DegenerateEvidenceError(
            f"action {observed_action_index} has zero likelihood under the current belief")
    # both components divided separately so a near-certain belief keeps a
    # representable (non-zero) minority mass
    return Belief(num_aware / denom, num_unaware / denom)
