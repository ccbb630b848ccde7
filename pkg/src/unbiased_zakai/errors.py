"""Exception hierarchy shared by every module of the package."""


class ZakaiError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(ZakaiError, ValueError):
    """Unknown model name, bad parameter range or malformed config file."""


class ResolutionError(ZakaiError, ValueError):
    """A discretization level finer than the stored observation data was requested."""


class ShapeError(ZakaiError, ValueError):
    """Mismatched array sizes (PMFs, path blocks, trajectories)."""


class LevelError(ZakaiError, ValueError):
    """An operation that needs a coarse partner level was called at level 0."""


class DegeneracyError(ZakaiError, FloatingPointError):
    """All particle weights collapsed to zero (or became non-finite)."""


class UnsupportedModelError(ZakaiError, TypeError):
    """The exact oracle was asked to handle a model outside the linear-Gaussian class."""
