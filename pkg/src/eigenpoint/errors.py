"""Exception hierarchy shared by all eigenpoint modules."""


class EigenpointError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(EigenpointError, ValueError):
    """A system description or configuration is malformed."""


class ConstraintError(ConfigError):
    """A named rate constraint does not apply to the given topology."""


class NoClosedFormError(EigenpointError):
    """No closed-form eigensystem is catalogued for this system.

    Callers should fall back to :func:`eigenpoint.singularity.numeric_eigensystem`.
    """


class IndeterminacyError(EigenpointError, ArithmeticError):
    """A numerical rank or clustering decision sits too close to its threshold."""


class ScanError(EigenpointError):
    """A perturbation scan produced inconsistent splittings."""


class QuadratureError(EigenpointError, ArithmeticError):
    """Adaptive quadrature failed to reach the requested accuracy."""
