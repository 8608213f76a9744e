class OvdetError(Exception):
    """Base class for errors raised by this package."""


class DictionaryError(OvdetError, ValueError):
    pass


class InsufficientNegativesError(DictionaryError):
    pass


class ProviderError(OvdetError, RuntimeError):
    """An embedding provider or region scorer failed to produce a vector."""


class PseudoLabelError(OvdetError, RuntimeError):
    pass


class ShapeError(OvdetError, ValueError):
    pass


class TrainingDiverged(OvdetError, RuntimeError):
    def __init__(self, message, last_checkpoint=None):
        super().__init__(message)
        self.last_checkpoint = last_checkpoint
