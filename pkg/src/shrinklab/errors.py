"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class ShrinkError(Exception):
    exit_code = 2
    reason = "error"


class ScheduleError(ShrinkError, ValueError):
    reason = "schedule"


class ScheduleUndefined(ScheduleError):
    reason = "schedule-undefined"


class MonotonicityViolation(ScheduleError):
    reason = "monotonicity-violation"


class ThresholdDomainError(ShrinkError, ValueError):
    reason = "m-too-small"


class CapExceeded(ShrinkError):
    exit_code = 3
    reason = "cap-exceeded"


class BranchBudgetExceeded(CapExceeded):
    reason = "branch-budget-exceeded"


class NullEvent(ShrinkError, ValueError):
    reason = "null-event"


class ConfigError(ShrinkError, ValueError):
    reason = "config"
