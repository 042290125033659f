"""Exception types shared by the ldos1d modules."""


class DomainError(ValueError):
    """Argument outside the range where a routine is defined or accurate."""


class ContractError(ValueError):
    """A precondition on the inputs of an operation was violated."""


class EvaluationError(ArithmeticError):
    """A numerical evaluation failed (non-finite samples, no convergence)."""

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where
