"""Exception hierarchy shared by every pipeline.

Each exception carries an ``exit_code`` so the command line front end can map
failures without a lookup table of its own:

====  =====================
code  meaning
====  =====================
2     usage error
3     data error
4     backend error
5     internal error
====  =====================
"""

from __future__ import annotations


class FakeProbeError(Exception):
    exit_code = 5


# -- data errors -------------------------------------------------------------


class DataError(FakeProbeError):
    exit_code = 3


class MissingFile(DataError):
    def __init__(self, path):
        super().__init__(f"file not found: {path}")
        self.path = path


class MalformedRecord(DataError):
    def __init__(self, line_no: int, reason: str, report: list | None = None):
        super().__init__(f"malformed record at line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason
        self.report = report or [(line_no, reason)]


class DuplicateId(DataError):
    def __init__(self, record_id: str):
        super().__init__(f"duplicate record id {record_id!r}")
        self.record_id = record_id


class InsufficientRecords(DataError):
    def __init__(self, origin: str, available: int, requested: int):
        super().__init__(
            f"origin {origin}: {available} records available, {requested} requested"
        )
        self.origin = origin
        self.available = available
        self.requested = requested


class EmptyDataset(DataError):
    pass


class LabelOutOfRange(DataError):
    pass


class SchemeMismatch(DataError):
    pass


class PromptMissing(DataError):
    def __init__(self, record_id: str):
        super().__init__(f"record {record_id!r} has an empty prompt")
        self.record_id = record_id


class EmptyPrompt(DataError):
    def __init__(self):
        super().__init__("prompt is empty")


class UndecodableImage(DataError):
    pass


class EmptyImage(DataError):
    pass


class EmptySequence(DataError):
    pass


class MixedResolutions(DataError):
    pass


class ResolutionMismatch(DataError):
    pass


class TooFewSamples(DataError):
    pass


class NoTopics(DataError):
    def __init__(self, record_id: str):
        super().__init__(f"record {record_id!r} carries no topic tag")
        self.record_id = record_id


class UnwritablePath(DataError):
    pass


# -- shape / value errors ----------------------------------------------------


class ShapeError(FakeProbeError, ValueError):
    exit_code = 3


class BadDimension(ShapeError):
    pass


class ShapeMismatch(ShapeError):
    pass


class DimMismatch(ShapeError):
    pass


class KindMismatch(ShapeError):
    pass


class ZeroVector(ShapeError):
    pass


class NonFiniteInput(ShapeError):
    pass


class BadThreshold(ShapeError):
    exit_code = 2  # always a caller-supplied parameter


# -- backend errors ----------------------------------------------------------


class BackendError(FakeProbeError):
    exit_code = 4


class BackendFailure(BackendError):
    pass


class BackendMismatch(BackendError):
    pass


class CaptionUnsupported(BackendError):
    pass


class UnknownBackend(BackendError):
    pass


# -- internal ----------------------------------------------------------------


class GradientCheckFailed(FakeProbeError):
    exit_code = 5

    def __init__(self, error: float, tolerance: float, detail: str | None = None):
        super().__init__(
            detail or f"gradient check failed: max relative error {error:.3e} > {tolerance:.1e}"
        )
        self.error = error
        self.tolerance = tolerance


class ModelFormatError(FakeProbeError):
    exit_code = 3
