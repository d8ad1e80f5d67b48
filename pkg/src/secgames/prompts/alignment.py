"""Scalar objectives used when aligning reasoning policies."""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from secgames.errors import InvalidInputError


def dpo_loss(log_prob_chosen: float, log_prob_rejected: float, kl_penalty: float = 0.0, kl_value: float = 0.0) -> float:
    """Preference loss ``-log sigmoid(chosen - rejected) + kl_penalty * kl_value``.

    ``log(1 + exp(-d))`` is evaluated with ``logaddexp`` so large gaps of
    either sign neither overflow nor lose precision.
    """
    if kl_penalty < 0 or kl_value < 0:
        raise InvalidInputError("kl_penalty and kl_value must be nonnegative")
    gap = log_prob_chosen - log_prob_rejected
    return float(np.logaddexp(0.0, -gap)) + kl_penalty * kl_value


def elbo_value(log_likelihood_terms: Iterable[float], kl_term: float) -> float:
    """Summed expected log-likelihood minus the KL term."""
    if kl_term < 0:
        raise InvalidInputError("kl_term must be nonnegative")
    return math.fsum(log_likelihood_terms) - kl_term
