"""Adapter error types."""


class FeatxError(Exception):
    """Base class for adapter errors."""


class UndecodableImage(FeatxError):
    """An input file could not be decoded as an image; carries the path."""

    def __init__(self, path):
        super().__init__(f"cannot decode image: {path}")
        self.path = str(path)


class UnknownLayer(FeatxError):
    """Requested layer id is not in the backbone's tap table."""


class UnknownExtractor(FeatxError):
    pass


class EmptyImageDirectory(FeatxError):
    pass
