class LabError(Exception):
    """Base class for every failure raised by the laboratory."""


class KahlerConeError(LabError):
    """Potential leaves the Kähler cone: 1 + Δ₀φ is not positive somewhere."""

    def __init__(self, message, m=None, min_density=None):
        super().__init__(message)
        self.m = m
        self.min_density = min_density


class GridMismatchError(LabError):
    pass


class PreconditionError(LabError):
    pass


class FitError(LabError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class HypothesisError(LabError):
    """Lift constants differ across the powers handed to the character check."""


class ConfigError(LabError):
    def __init__(self, message, path=None, line=None, field=None):
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        if field is not None:
            location += f"field '{field}': "
        super().__init__(location + message)
        self.path = path
        self.line = line
        self.field = field
