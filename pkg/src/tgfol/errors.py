"""Exception hierarchy.

Every error raised by the package derives from :class:`TGFolError`; callers
that only care about "something in the construction or verification went
wrong" can catch that. Witness points, when available, are attached as the
``witness`` attribute.
"""

from __future__ import annotations


class TGFolError(Exception):
    def __init__(self, message: str = "", witness=None, **info):
        super().__init__(message)
        self.witness = witness
        self.info = info


class OutOfDomain(TGFolError):
    pass


class EvaluationError(TGFolError):
    pass


class InvalidParameter(TGFolError):
    pass


class ParseError(TGFolError):
    pass


# foliation
class MixedLeaf(TGFolError):
    pass


class NotQuasiFibered(TGFolError):
    pass


class DegenerateFrame(TGFolError):
    pass


class AmbiguousSign(TGFolError):
    pass


class QuotientUndefined(TGFolError):
    pass


class NotTransverseInTube(TGFolError):
    pass


class NoCollar(TGFolError):
    pass


class OrientationMismatch(TGFolError):
    pass


class FormMismatch(TGFolError):
    pass


# metric
class AdaptednessFailed(TGFolError):
    pass


class SignChangeInBeta(TGFolError):
    pass


class NotTransverse(TGFolError):
    pass


class SignatureLossInBlend(TGFolError):
    pass


class IncompatibleNormalMetrics(TGFolError):
    pass


class ClassificationMargin(TGFolError):
    pass


class AttractiveLeafOutsideU(TGFolError):
    pass


class OddAttractiveCount(TGFolError):
    pass


class NoInvariantDirection(TGFolError):
    pass


# geodesy
class DegenerateMetric(TGFolError):
    pass


class NotOnLeaf(TGFolError):
    pass


class LeftAtlas(TGFolError):
    pass


class StepUnderflow(TGFolError):
    pass


class LoopNotClosed(TGFolError):
    pass


class NeighborsMixedType(TGFolError):
    pass


# topology
class NotOrientableBase(TGFolError):
    pass


class NotAdmissible(TGFolError):
    pass


# gallery
class ConstructionFailed(TGFolError):
    def __init__(self, message: str = "", stage: str = "", **info):
        super().__init__(message, **info)
        self.stage = stage
