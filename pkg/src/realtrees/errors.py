"""Exception hierarchy shared by every module."""


class RealTreesError(Exception):
    """Base class for all library errors."""


class MissingLabelColumn(RealTreesError):
    pass


class RaggedRow(RealTreesError):
    def __init__(self, line: int, expected: int, got: int):
        super().__init__(f"line {line}: expected {expected} fields, got {got}")
        self.line = line


class EmptyFile(RealTreesError):
    pass


class ConstantLabel(RealTreesError):
    pass


class StratificationInfeasible(RealTreesError):
    pass


class FeatureIndexOutOfRange(RealTreesError):
    pass


class RashomonSetOverflow(RealTreesError):
    def __init__(self, cap: int, partial: int):
        super().__init__(
            f"Rashomon set exceeds cap of {cap} trees ({partial} collected before abort)"
        )
        self.cap = cap
        self.partial = partial


class EpsilonExhausted(RealTreesError):
    pass


class DegenerateLabels(RealTreesError):
    pass


class EmptyPool(RealTreesError):
    pass


class NoPositives(RealTreesError):
    pass


class TruncationTooShort(RealTreesError):
    pass


class MilestoneUnreached(RealTreesError):
    pass


class ConfigError(RealTreesError):
    pass
