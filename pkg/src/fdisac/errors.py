"""Exception types raised by the simulator."""


class InvalidInputError(ValueError):
    """Arguments violate an operation's preconditions."""


class RankDeficiencyError(InvalidInputError):
    """A block-diagonalization null space is too small for the stream count."""


class EstimationFailure(RuntimeError):
    """No usable resource element was left for an estimator."""


class ConfigError(InvalidInputError):
    """A scenario configuration violates its invariants or schema."""
