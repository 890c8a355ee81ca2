"""Exception hierarchy; the CLI maps each class to its own exit code."""


class WsanctlError(Exception):
    exit_code = 1


class ConfigurationError(WsanctlError):
    exit_code = 2


class NumericalError(WsanctlError):
    exit_code = 3


class SchedulingError(WsanctlError):
    exit_code = 4
