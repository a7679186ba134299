"""Exception types shared across the package."""


class FloodbenchError(Exception):
    """Base class for all floodbench contract violations."""


class ShapeMismatchError(FloodbenchError, ValueError):
    """Two rasters that must agree in shape do not."""


class MalformedLabelError(FloodbenchError, ValueError):
    """A label raster contains a code outside {0, 1, 2}."""


class DegenerateDisparityError(FloodbenchError, ValueError):
    """Disparity alignment is undefined: zero mean absolute deviation."""


class DegenerateActivationError(FloodbenchError, ValueError):
    """A normalization channel has zero variance."""


class UnsupportedKernelError(FloodbenchError, ValueError):
    """Gradient checking was requested for a non-differentiable kernel."""


class EmptyDatasetError(FloodbenchError, ValueError):
    """A statistic was requested on an empty collection."""


class DatasetLayoutError(FloodbenchError, ValueError):
    """Prediction and label directories do not describe the same image set."""


class ManifestError(FloodbenchError, ValueError):
    """A study manifest or model-flag table is malformed."""
