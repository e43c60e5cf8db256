"""Exception hierarchy shared across the framework."""


class SafedialogError(Exception):
    """Base class for all framework errors."""


# --- corpus ---

class MalformedRecord(SafedialogError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class DuplicateId(SafedialogError):
    def __init__(self, record_id: str, line: int | None = None):
        super().__init__(f"duplicate record id {record_id!r}")
        self.record_id = record_id
        self.line = line


class UnknownId(SafedialogError):
    pass


class AlreadyDiscarded(SafedialogError):
    pass


class LengthMismatch(SafedialogError):
    pass


class EmptyInput(SafedialogError):
    pass


class InsufficientPool(SafedialogError):
    pass


# --- relations ---

class UnknownRelation(SafedialogError):
    def __init__(self, text: str):
        super().__init__(f"not a known relation: {text!r}")
        self.text = text


class NoValidRelation(SafedialogError):
    pass


class TaggerUnavailable(SafedialogError):
    pass


# --- vectorspace ---

class EmbedderUnavailable(SafedialogError):
    pass


class DimensionMismatch(SafedialogError):
    pass


class TooFewPoints(SafedialogError):
    pass


class NonFiniteInput(SafedialogError):
    pass


class UncoveredVector(SafedialogError):
    pass


# --- selector ---

class JudgeUnavailable(SafedialogError):
    pass


class UnparseableJudgment(SafedialogError):
    pass


class NotADistribution(SafedialogError):
    pass


class InsufficientCandidates(SafedialogError):
    pass


class ClusterScoringFailed(SafedialogError):
    def __init__(self, cluster: int):
        super().__init__(f"all candidates in cluster {cluster} failed scoring")
        self.cluster = cluster


# --- gateway ---

class BackendError(SafedialogError):
    pass


class BackendTimeout(BackendError):
    pass


class BackendUnavailable(BackendError):
    pass


class ProtocolError(BackendError):
    def __init__(self, status: int, body: str):
        super().__init__(f"backend returned {status}: {body[:200]}")
        self.status = status
        self.body = body


# --- dialogue ---

class ClosedSession(SafedialogError):
    pass


class OutOfOrder(SafedialogError):
    pass


class DialogueTurnError(SafedialogError):
    """Wraps a backend/relation failure with the turn index it occurred at."""

    def __init__(self, turn_index: int, cause: Exception):
        super().__init__(f"turn {turn_index} failed: {cause}")
        self.turn_index = turn_index
        self.cause = cause


# --- evaluator ---

class EmptySet(SafedialogError):
    pass
