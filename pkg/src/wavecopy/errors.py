"""Exception types shared across the simulator modules."""


class WavecopyError(Exception):
    """Base class for all simulator errors."""


# scene
class DegenerateCameraError(WavecopyError):
    """Camera look-at point coincides with its position."""


class SceneValidationError(WavecopyError):
    """Scene violates a structural invariant (duplicate ids, interpenetration)."""


# propagation
class ZeroDistanceError(WavecopyError):
    """Field requested closer than 1e-12 m to a source or patch."""


class ConfigUnresolvedError(WavecopyError):
    """A tile participates in propagation without a deployed state."""


# tiles
class BacksideIncidenceError(WavecopyError):
    """Profile requested for a direction behind the tile face."""


class UnsupportedCallbackError(WavecopyError):
    """Callback kind not present in the codebook dispatch table."""


# controller
class NoRouteError(WavecopyError):
    """No path within the hop bound connects the endpoints."""


class InfeasibleError(WavecopyError):
    """Commands cannot be served by node-disjoint routes."""


class UnknownTileError(WavecopyError):
    """Deployment names a tile id absent from the scene."""


class LayoutMismatchError(WavecopyError):
    """Tile mapping between scenes is not congruent within tolerance."""


# transport
class NonFiniteSampleError(WavecopyError):
    """Reading contains NaN or infinity and cannot be framed."""


class BadMagicError(WavecopyError):
    """Byte buffer does not start with the frame magic."""


class BadChecksumError(WavecopyError):
    """Frame CRC-32 does not match its header+payload."""


class TruncatedError(WavecopyError):
    """Byte buffer ends before the declared frame does."""


class DimMismatchError(WavecopyError):
    """Array-like operands have incompatible dimensions."""


class ConnectionLostError(WavecopyError):
    """Stream session ended mid-frame."""


# dataset
class CorruptManifestError(WavecopyError):
    """Dataset manifest is unreadable or missing required keys."""


class SizeMismatchError(WavecopyError):
    """On-disk dataset disagrees with its manifest record count."""


class IndexMismatchError(WavecopyError):
    """Generated images do not align with the dataset test indices."""


# metrics
class TooSmallError(WavecopyError):
    """Image below the minimum window size for the metric."""


class ZeroFieldError(WavecopyError):
    """Fidelity requested against an all-zero field vector."""


class EmptyError(WavecopyError):
    """Summary statistics requested for an empty sample."""
