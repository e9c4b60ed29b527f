"""Exception types shared across the pipeline."""


class RestoryError(Exception):
    """Base class for every error this package raises deliberately."""


# --- ingest ---------------------------------------------------------------


class MalformedManifest(RestoryError):
    """A frames or storyboard manifest is missing, truncated, or inconsistent."""


class MissingImageFile(RestoryError):
    """A manifest or storyboard references an image that does not exist."""


class EmptyVideo(RestoryError):
    """A source video has no frame entries to sample."""


class DecodeError(RestoryError):
    """An image file exists but cannot be decoded."""


# --- providers ------------------------------------------------------------


class ProviderError(RestoryError):
    """Base class for failures talking to an external model service."""


class ProviderUnavailable(ProviderError):
    """Transport kept failing after the retry policy was exhausted."""


class DetectorUnavailable(ProviderUnavailable):
    """The person detector kept failing after the retry policy was exhausted."""


class EmptyResponse(ProviderError):
    """The provider answered with blank text."""


class DimensionMismatch(ProviderError):
    """An embedding's dimension disagrees with earlier responses or its pair."""


# --- captioner ------------------------------------------------------------


class TemplateError(RestoryError):
    """A prompt template fails placeholder validation at load time."""


class EmptyP1Answer(RestoryError):
    """The posture answer chained into the context prompt is empty."""


# --- similarity / aligner ---------------------------------------------------


class AlphaOutOfRange(RestoryError):
    """The similarity weight must lie in [0, 1]."""


class Infeasible(RestoryError):
    """The input video has too few frames for the requested assignment."""


class SlotOutOfRange(RestoryError):
    """A slot index does not exist in the similarity matrix."""


# --- storyboard -------------------------------------------------------------


class SlotCountMismatch(RestoryError):
    """An alignment's slot count differs from its reference storyboard's."""


class MissingFrame(RestoryError):
    """An alignment or edit refers to an input frame that is not available."""


class IndexOutOfRange(RestoryError):
    """A curation edit names a slot or candidate outside the valid range."""


class InvalidTarget(IndexOutOfRange):
    """A curation edit targets a storyboard that cannot be edited."""


class MissingMatrix(RestoryError):
    """A frame replacement needs a similarity matrix to refresh its breakdown."""


# --- config / serving -------------------------------------------------------


class ConfigError(RestoryError):
    """A project or provider configuration is invalid."""


class InvalidProject(ConfigError):
    """The project root is missing required files or directories."""


class PortInUse(RestoryError):
    """The requested server port is already bound."""
