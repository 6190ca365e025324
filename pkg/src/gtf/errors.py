"""Exception hierarchy."""


class GTFError(Exception):
    """Base class for all errors raised by gtf."""


class ParseError(GTFError):
    def __init__(self, msg, line=None, col=None):
        self.msg = msg
        self.line = line
        self.col = col
        where = f" at line {line}, column {col}" if line is not None else ""
        super().__init__(f"{msg}{where}")


class DimensionError(GTFError):
    pass


class MetricError(GTFError):
    """Metric is not symmetric or is (numerically) singular."""


class DomainExitError(GTFError):
    def __init__(self, msg, exit_time=None):
        self.exit_time = exit_time
        super().__init__(msg if exit_time is None else f"{msg} (t = {exit_time:.6g})")


class StepLimitError(GTFError):
    pass


class BlowUpError(GTFError):
    pass


class ConvergenceError(GTFError):
    pass


class PatchError(GTFError):
    """Points or supports fall outside the convex patch."""


class SupportError(GTFError):
    pass


class RankError(GTFError):
    pass


class IllConditionedError(GTFError):
    pass


class ConfigError(GTFError):
    pass
