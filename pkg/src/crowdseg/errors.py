"""Exception types raised by the package's contracts."""


class CrowdsegError(Exception):
    """Base class for every package-specific error."""


# --- mask geometry ---------------------------------------------------------

class DimensionMismatch(CrowdsegError):
    pass


class EmptyMask(CrowdsegError):
    pass


class EmptyInput(CrowdsegError):
    pass


class RunSumMismatch(CrowdsegError):
    pass


class TooFewVertices(CrowdsegError):
    pass


# --- diversity metrics -----------------------------------------------------

class EmptyReference(CrowdsegError):
    pass


class IndexOutOfRange(CrowdsegError):
    pass


class InsufficientAnnotations(CrowdsegError):
    pass


# --- ambiguity labels and scores -------------------------------------------

class WrongVoteCount(CrowdsegError):
    pass


class DuplicateWorker(CrowdsegError):
    pass


class TooFewMasks(CrowdsegError):
    pass


class ImageTooSmall(CrowdsegError):
    pass


class TargetTooLarge(CrowdsegError):
    pass


class SingleClass(CrowdsegError):
    pass


class TooFewSamples(CrowdsegError):
    pass


class ParseError(CrowdsegError):
    pass


class UnknownImage(CrowdsegError):
    pass


class NonFiniteScore(CrowdsegError):
    pass


class NoWindows(CrowdsegError):
    pass


class InvalidDistribution(CrowdsegError):
    pass


# --- allocation ------------------------------------------------------------

class MissingScore(CrowdsegError):
    pass


class PoolTooSmall(CrowdsegError):
    pass


# --- evaluation and reports ------------------------------------------------

class IdMismatch(CrowdsegError):
    pass


class EmptyGroundTruthSet(CrowdsegError):
    pass


class EmptyResults(CrowdsegError):
    pass


class IoFailure(CrowdsegError):
    pass


# --- collection service ----------------------------------------------------

class WrongKind(CrowdsegError):
    pass


class NotAssigned(CrowdsegError):
    pass


class VoteCountMismatch(CrowdsegError):
    pass


class EmptyRasterization(CrowdsegError):
    pass


class MultiplePolygons(CrowdsegError):
    pass


class RoundOneIncomplete(CrowdsegError):
    pass


class IneligibleWorker(CrowdsegError):
    pass


class MissingImage(CrowdsegError):
    pass
