"""Exception types shared across the package."""


class AnchorlabError(Exception):
    """Base class for all errors raised by anchorlab."""


class DimensionError(AnchorlabError, ValueError):
    """Operands have incompatible shapes."""


class InvariantError(AnchorlabError, ValueError):
    """A value failed its algebraic invariant (projection, effect, unit state...)."""


class NotHermitianError(InvariantError):
    pass


class ConvergenceError(AnchorlabError, RuntimeError):
    """An iterative routine stopped before reaching its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class PreconditionError(AnchorlabError, ValueError):
    """An operation refused to run because its hypothesis does not hold."""


class MetadataError(AnchorlabError, ValueError):
    """An operator lacks the metadata an operation needs."""


class FixedPointError(AnchorlabError, ValueError):
    """A declared fixed point is not actually fixed."""


class CertificationError(AnchorlabError, ValueError):
    """A claimed contraction factor could not be certified."""

    def __init__(self, message, block=None, certificate=None):
        super().__init__(message)
        self.block = block
        self.certificate = certificate


class PremiseError(AnchorlabError, ValueError):
    """Malformed premise set for a sequent rule."""


class ConfigError(AnchorlabError, ValueError):
    """Invalid or incomplete scenario configuration."""
