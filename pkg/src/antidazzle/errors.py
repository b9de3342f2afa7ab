"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class AntiDazzleError(Exception):
    code = "error"
    exit_code = 1


class ConfigError(AntiDazzleError, ValueError):
    code = "config"
    exit_code = 2


class DataIOError(AntiDazzleError, OSError):
    code = "io"
    exit_code = 3


class NumericalGuardError(AntiDazzleError, ArithmeticError):
    code = "numerical"
    exit_code = 4
