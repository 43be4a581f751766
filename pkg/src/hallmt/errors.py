"""Exception taxonomy shared by all subsystems.

ContractViolation maps to CLI exit code 1, ConfigurationError to exit
code 2. NumericFailure is raised when a computation produces non-finite
values and carries enough context to locate the offending element.
"""


class ContractViolation(Exception):
    """An operation was called with arguments that break its contract."""


class ConfigurationError(Exception):
    """Bad user-supplied configuration: unknown keys, invalid values."""


class NumericFailure(Exception):
    """Non-finite values encountered where finite numbers are required."""
