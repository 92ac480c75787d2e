"""Exception types shared across the package."""


class LakemendError(Exception):
    """Base class for all package errors."""


class ConfigError(LakemendError):
    """Invalid configuration: unknown attribute, bad mode, inconsistent options."""


class IngestError(LakemendError):
    """CSV ingestion failure; message names the offending file/row/column."""


class ArtifactError(LakemendError):
    """Index artifact load failure: bad magic, version, or digest mismatch."""


class RetrievalError(LakemendError):
    """Index query failure, including remote embedder transport errors."""


class RerankError(LakemendError):
    """Reranker failure, e.g. cross-scorer transport error or bad response."""


class ReasonError(LakemendError):
    """Reasoner failure. Subclasses distinguish typed remote-client failures."""


class ModelTimeout(ReasonError):
    """Remote model call exceeded its timeout budget."""


class ModelTransportError(ReasonError):
    """Remote model endpoint unreachable or returned a malformed response."""


class ModelRefusal(ReasonError):
    """Remote model returned an empty or unusable completion."""


class CalibrationError(LakemendError):
    """Threshold calibration received an unusable labeled set."""


class EvaluationError(LakemendError):
    """Accuracy evaluation failure, e.g. missing ground-truth rows."""


class InternalError(LakemendError):
    """Invariant violation inside the pipeline (lake/catalog inconsistency)."""
