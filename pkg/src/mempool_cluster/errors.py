"""Exception types shared across the pipeline."""


class DataError(Exception):
    """Base class for data-level failures; the CLI maps these to exit code 2."""


class MalformedRecord(DataError):
    """An ingest line cannot be decoded (bad JSON, bad hex, wrong field type)."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class InvariantViolation(DataError):
    """A decoded record breaks a model invariant (e.g. removetime < time)."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ConflictingRecord(DataError):
    """The same txid was ingested twice with differing content."""

    def __init__(self, txid: str, field: str):
        self.txid = txid
        self.field = field
        super().__init__(f"duplicate txid {txid} differs in {field}")


class UnknownTransaction(DataError):
    def __init__(self, txid: str):
        self.txid = txid
        super().__init__(f"transaction not ingested: {txid}")


class CycleDetected(DataError):
    """The in-mempool dependency graph contains a cycle (corrupt data)."""

    def __init__(self, txids):
        self.txids = sorted(txids)
        super().__init__("dependency cycle involving: " + ", ".join(self.txids))


class MalformedClusterFile(DataError):
    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class UnknownScenario(DataError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown scenario: {name}")


class UnknownHeuristic(DataError):
    """Unrecognized heuristic id; treated as a usage error by the CLI."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown heuristic: {name}")


class SingletonCluster(DataError):
    """Improvement classification is undefined for single-address clusters."""

    def __init__(self):
        super().__init__("cannot classify a singleton cluster")
