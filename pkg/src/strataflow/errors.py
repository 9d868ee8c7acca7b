"""Exception hierarchy shared across the package."""


class StrataflowError(Exception):
    """Base class for all errors raised by this package."""


class OverlappingSubstream(StrataflowError):
    """Two batches for one interval carry the same substream id."""


class InvalidFraction(StrataflowError):
    """Coin-flip sampling fraction outside (0, 1]."""


class BudgetTooSmall(StrataflowError):
    """Per-interval sample budget is below the number of strata."""


class DegenerateArrival(StrataflowError):
    """Weight calibration invoked with zero arrivals; caller logic error."""


class InvalidWorkers(StrataflowError):
    """Worker count for sharded sampling is unusable."""


class InsufficientSample(StrataflowError):
    """Sample variance requested for fewer than two items."""


class EmptyWindow(StrataflowError):
    """Mean estimation over a window with no strata."""


class StaleBatch(StrataflowError):
    """Batch arrived for an already-closed local interval."""


# Topology construction

class TopologyError(StrataflowError):
    pass


class CycleDetected(TopologyError):
    pass


class MultipleRoots(TopologyError):
    pass


class OrphanSource(TopologyError):
    pass


class UnknownScenario(StrataflowError):
    pass


# Wire protocol

class TransportError(StrataflowError):
    pass


class BadMagic(TransportError):
    pass


class UnsupportedVersion(TransportError):
    pass


class UnknownMessageType(TransportError):
    pass


class TruncatedPayload(TransportError):
    pass


class CountMismatch(TransportError):
    """Declared item count disagrees with the items actually present."""


# Ingest

class IngestError(StrataflowError):
    pass


class MalformedRow(IngestError):
    pass


class MissingColumn(IngestError):
    pass
