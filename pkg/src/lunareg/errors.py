"""Exception types shared across the toolkit."""


class LunaregError(Exception):
    """Base class for all toolkit errors."""


class ImageFormatError(LunaregError):
    """Unreadable file or unsupported raster format / bit depth."""


class DegenerateGeometry(LunaregError):
    """Point configuration does not determine the requested transform."""


class TooFewMatches(LunaregError):
    """Fewer correspondences than the estimator's minimal sample."""


class NoConsensus(LunaregError):
    """RANSAC found no hypothesis with enough inliers."""


class PointAtInfinity(LunaregError):
    """Projective mapping sent a point to the plane at infinity."""


class InsufficientSamples(LunaregError):
    """Not enough descriptors to fit the requested basis."""


class EvaluationSkipped(LunaregError):
    """Metric evaluation had no valid pixels to work with."""
