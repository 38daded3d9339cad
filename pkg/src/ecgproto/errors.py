"""Exception types shared across the package."""


class EcgProtoError(Exception):
    """Base class for all package errors."""


class IngestionError(EcgProtoError):
    """A record referenced by a manifest could not be read."""


class TaxonomyError(EcgProtoError):
    """A label code is unknown or a taxonomy is malformed."""


class ShapeError(EcgProtoError):
    """An array does not have the contracted shape."""


class ConfigurationError(EcgProtoError):
    """Incompatible shapes, kinds, or settings between components."""


class DegenerateInputError(EcgProtoError):
    """An input (e.g. a zero-norm vector) on which an operation is undefined."""


class ProjectionError(EcgProtoError):
    """Prototype projection could not find an eligible latent patch."""


class DivergenceError(EcgProtoError):
    """Training produced a non-finite loss."""
