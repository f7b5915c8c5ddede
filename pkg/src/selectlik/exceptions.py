"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when an argument violates a documented precondition."""


class RejectionBudgetError(RuntimeError):
    """Raised when the rejection sampler exhausts its attempt budget.

    Attributes
    ----------
    study_index : int
        Index of the study whose budget was exhausted.
    attempts : int
        Number of proposals drawn before giving up.
    """

    def __init__(self, study_index, attempts):
        self.study_index = study_index
        self.attempts = attempts
        super().__init__(
            f"rejection budget exhausted for study {study_index} "
            f"after {attempts} attempts"
        )


class TruncationUnderflowError(ArithmeticError):
    """Raised when a truncation region holds less mass than ~1e-300."""


class NonConvergenceError(RuntimeError):
    """Raised when no optimizer restart satisfied the termination criteria.

    Carries the best point found in ``best`` (a FitResult).
    """

    def __init__(self, message, best):
        self.best = best
        super().__init__(message)


class NoRidgeError(RuntimeError):
    """Raised when a superlevel set never reaches the ridge region."""


class GridTooSmallError(RuntimeError):
    """Raised when a posterior grid captures almost none of the mass."""
