"""Exception types raised across the package."""


class ScorePathError(Exception):
    pass


class SingularityError(ScorePathError):
    """1 - rho*d is too close to zero for the projection to be defined."""


class DimensionMismatch(ScorePathError, ValueError):
    pass


class PoseOutsideCorridor(ScorePathError, ValueError):
    pass


class EmptyDataset(ScorePathError):
    pass


class SingleClassData(ScorePathError):
    pass


class EvaluationFailure(ScorePathError):
    def __init__(self, theta, d, cause):
        super().__init__(f"score evaluation failed at theta={theta!r}, d={d!r}: {cause}")
        self.theta = theta
        self.d = d
        self.cause = cause


class OriginOutsideGrid(ScorePathError):
    pass


class InconclusiveProtocol(ScorePathError):
    pass


class NoBracket(ScorePathError):
    def __init__(self, theta):
        super().__init__(f"no sign change of F along d at theta={theta!r}")
        self.theta = theta


class DegenerateSlopes(ScorePathError):
    pass


class NonPositiveDelta(ScorePathError):
    pass


class NegativeRatioSample(ScorePathError):
    def __init__(self, theta, ratio):
        super().__init__(f"boundary ratio {ratio!r} <= 0 at theta={theta!r}")
        self.theta = theta
        self.ratio = ratio
