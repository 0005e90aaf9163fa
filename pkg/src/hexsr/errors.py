"""Exception types shared across the toolkit."""


class HexsrError(Exception):
    """Base class for all toolkit errors."""


class NonPositivePitchError(HexsrError, ValueError):
    """A grid or detector pitch was zero or negative."""


class GridTooCoarseError(HexsrError, ValueError):
    """Frequency grid spacing is too coarse for OTF diagnostics."""


class KernelTooSmallError(HexsrError, ValueError):
    """Requested PSF kernel support discards too much tail energy."""


class PitchMismatchError(HexsrError, ValueError):
    """Image pitch does not match the pitch an operation requires."""


class GridOutsideImageError(HexsrError, ValueError):
    """A sampling grid extends beyond the source image extent."""


class UnsupportedFactorError(HexsrError, ValueError):
    """Upsampling factor outside the supported set."""


class DegenerateTriangulationError(HexsrError, ValueError):
    """Scattered points are collinear or otherwise untriangulable."""


class EmptyTrainingSetError(HexsrError, ValueError):
    """A fitting routine was called with no training pairs."""


class ShapeMismatchError(HexsrError, ValueError):
    """Tensor or image shapes are inconsistent."""


class MissingDistanceError(HexsrError, ValueError):
    """Distance-head model invoked without a distance matrix."""


class NonFiniteGradientError(HexsrError, RuntimeError):
    """Backward pass produced a NaN or infinite gradient."""


class DivergenceError(HexsrError, RuntimeError):
    """Training loss became non-finite."""


class ConfigError(HexsrError, ValueError):
    """Experiment configuration is invalid."""


class DatasetError(HexsrError, ValueError):
    """Dataset directory is missing files or contains unreadable images."""
