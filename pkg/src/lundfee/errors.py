"""Exception types shared by the library and the command line."""


class ParameterError(ValueError):
    """Invalid or out-of-range model parameters."""


class InstabilityError(ParameterError):
    """The arrival drift is not below the service rate."""


class InfeasibleTransactionError(ParameterError):
    """A transaction does not fit into an empty block."""


class ParseError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(ValueError):
    """Input is well formed but violates the expected structure."""


class BucketNotFoundError(LookupError):
    def __init__(self, phi, valid):
        self.phi = phi
        self.valid = list(valid)
        super().__init__(f"fee bucket {phi!r} not present; valid lower bounds: {self.valid}")

    def __str__(self):
        return self.args[0]


class EstimationError(ArithmeticError):
    """An estimator is undefined on the given data."""


class InfeasibleTargetError(RuntimeError):
    def __init__(self, message, best_bucket=None, best_tail=None):
        super().__init__(message)
        self.best_bucket = best_bucket
        self.best_tail = best_tail


class OracleUndefinedError(RuntimeError):
    """No bucket confirms within the available horizon."""


class RunawaySimulationError(RuntimeError):
    """A simulated path exceeded its event budget."""
