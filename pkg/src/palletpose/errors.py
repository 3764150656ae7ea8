"""Exception types raised across the package."""


class PalletPoseError(Exception):
    """Base class for all errors raised by palletpose."""


class BehindCamera(PalletPoseError):
    """A point that must be projected has non-positive depth."""


class FrameMismatch(PalletPoseError):
    """Two poses were combined whose frame ids do not chain."""


class SceneRejection(PalletPoseError):
    """No valid scene could be sampled within the attempt budget."""


class TooFewPoints(PalletPoseError):
    pass


class DegenerateConfiguration(PalletPoseError):
    """Point configuration is collinear or otherwise rank deficient."""


class DivergedBehindCamera(PalletPoseError):
    pass


class ParseError(PalletPoseError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(f"{where}{message}")


class NonMonotonicTimestamps(PalletPoseError):
    pass


class TooFewSamples(PalletPoseError):
    pass
