"""Exception hierarchy shared by all pipeline stages."""


class NetpartError(Exception):
    """Base class for every error raised by netpart."""


# ingest
class MalformedRow(NetpartError):
    def __init__(self, line, reason):
        super().__init__(f"line {line}: {reason}")
        self.line = line


class PeriodOutOfRange(NetpartError):
    def __init__(self, line, period, slots):
        super().__init__(f"line {line}: period {period} outside [0, {slots - 1}]")
        self.line = line
        self.period = period


class DuplicatePeriod(NetpartError):
    pass


class AllMissing(NetpartError):
    pass


# gaf
class ConstantSeries(NetpartError):
    pass


class TooShort(NetpartError):
    pass


class NotDivisible(NetpartError):
    pass


# neuralnet
class ShapeMismatch(NetpartError):
    pass


class NonFiniteLoss(NetpartError):
    def __init__(self, epoch):
        super().__init__(f"loss became non-finite at epoch {epoch}")
        self.epoch = epoch


class CheckpointFormatError(NetpartError):
    pass


# graph
class UnknownEndpoint(NetpartError):
    pass


class SelfLoop(NetpartError):
    pass


class OverlappingClusters(NetpartError):
    pass


# clustering
class KTooSmall(NetpartError):
    pass


class KTooLarge(NetpartError):
    pass


class LengthMismatch(NetpartError):
    pass


class IsolatedRoad(NetpartError):
    def __init__(self, road_id):
        super().__init__(f"road {road_id!r} has no positive similarity to any neighbour")
        self.road_id = road_id


# metrics
class MissingSeries(NetpartError):
    pass


class NoAdjacentPairs(NetpartError):
    pass


class TooFewRoads(NetpartError):
    pass


class KMismatch(NetpartError):
    pass


# synth
class InvalidScenario(NetpartError):
    pass


class UniverseMismatch(NetpartError):
    pass
