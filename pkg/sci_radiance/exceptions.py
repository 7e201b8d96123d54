class AngleNearPiError(Exception):
    pass


class PixelOutOfBoundsError(Exception):
    pass


class NonIntegerOnesCountError(Exception):
    pass


class DimensionMismatchError(Exception):
    pass


class ShapeMismatchError(Exception):
    pass


class ZeroMaskPixelError(Exception):
    pass


class ImageTooSmallError(Exception):
    pass


class FileFormatError(Exception):
    pass


class ConfigurationError(Exception):
    pass


class VisualizationSetupError(Exception):
    pass
