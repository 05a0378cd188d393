"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid sizes, parameters or experiment configuration."""


class TopologyError(ValueError):
    """Graph or mixing matrix violates a structural requirement."""


class InadmissibleError(ValueError):
    """Step sizes or spectrum fall outside the convergence conditions."""


class RankDeficiencyError(ValueError):
    pass


class DivergenceError(ArithmeticError):
    """Raised when the iterates become non-finite or blow up."""

    def __init__(self, k, message=None):
        self.k = k
        super().__init__(message or f"state diverged at iteration {k}")
