"""Exception and warning types shared across the package."""


class DegenerateSeriesError(ValueError):
    """Raised when a series has zero spread and admits no affine rescaling."""


class OutOfRangeError(ValueError):
    """Raised when a value falls outside the encodable digit range."""


class DivergenceError(RuntimeError):
    """Raised when simulated iterates become non-finite or explode."""


class MalformedContextError(ValueError):
    """Raised when a context string is not a valid serialized state prefix."""


class UnknownStateError(ValueError):
    """Raised when an oracle is conditioned on a state with no outgoing mass."""


class RemoteUnavailableError(RuntimeError):
    """Raised when a remote provider endpoint cannot produce a usable response."""


class EmptyTrajectoryError(ValueError):
    """Raised when row estimation receives no states to condition on."""


class NoFilledRowsError(ValueError):
    """Raised when imputation is asked to fill a matrix with no observed rows."""


class DimensionMismatchError(ValueError):
    """Raised when distributions, blocks, or mixing weights disagree in shape."""


class NonErgodicChainError(ValueError):
    """Raised when a chain has no spectral gap and no unique stationary law."""


class ConfigError(ValueError):
    """Raised when an experiment config file has unknown or invalid entries."""


class SinkhornConvergenceWarning(RuntimeWarning):
    """Emitted when the barycenter fixed point stops far from its tolerance."""


class OutOfBandWarning(UserWarning):
    """Emitted when an initial point is clamped onto the encodable band."""
