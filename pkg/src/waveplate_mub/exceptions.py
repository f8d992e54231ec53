class WaveplateMubError(Exception):
    """Base class for all package errors."""


class InfeasiblePhaseError(WaveplateMubError, ValueError):
    """The wave-plate phase cannot realize the requested bases."""


class NotMubError(WaveplateMubError, ValueError):
    """A measurement setting does not realize a complete set of MUB."""


class SingularDesignError(WaveplateMubError, ValueError):
    """Measurement bases do not span the operator space."""


class ConvergenceError(WaveplateMubError, RuntimeError):
    """A numerical routine failed to converge."""
