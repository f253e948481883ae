"""Exception types shared across the package."""

from __future__ import annotations


class DimensionError(ValueError):
    """Operands have incompatible shapes or lengths."""


class ManifoldError(ValueError):
    """A manifold-side invariant (orthonormality, tangency, base point) is violated."""


class DegenerateMeanError(ArithmeticError):
    """The Euclidean mean of a point cluster is rank deficient, so its
    projection back onto the manifold is not unique."""


class ParameterError(ValueError):
    """A scalar parameter is outside its admissible range."""


class ScheduleError(ParameterError):
    """A sample-size schedule parameter is outside its admissible range."""


class TopologyError(ValueError):
    """The requested communication graph cannot be built or is disconnected."""


class OracleError(ValueError):
    """A gradient oracle was asked for something it cannot provide."""


class ConfigError(ValueError):
    """Experiment configuration is invalid.

    ``errors`` holds one human-readable message per offending field.
    """

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class EngineFault(RuntimeError):
    """A numerical audit failed mid-run.

    Carries the iteration index and a snapshot of the per-agent states for
    post-mortem inspection.
    """

    def __init__(self, message: str, iteration: int, states=None):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration
        self.states = states
