"""Exception types shared across the package."""

from __future__ import annotations

import numpy as np


class AdmissibilityError(ValueError):
    """A model was evaluated on a nonphysical state (e.g. negative density)."""

    def __init__(self, message: str, state=None, where=None):
        super().__init__(message)
        self.state = None if state is None else np.asarray(state)
        self.where = where


class NewtonConvergenceError(RuntimeError):
    """Newton's method hit its iteration cap.

    ``iterate`` holds the last iterate and ``history`` the residual
    infinity-norms, starting with the initial guess.
    """

    def __init__(self, message: str, iterate=None, history=None, context=None):
        super().__init__(message)
        self.iterate = iterate
        self.history = list(history or [])
        self.context = context


class SingularSystemError(np.linalg.LinAlgError):
    """A linear solve failed or left an unacceptable residual."""

    def __init__(self, message: str, condition_estimate: float | None = None):
        super().__init__(message)
        self.condition_estimate = condition_estimate
