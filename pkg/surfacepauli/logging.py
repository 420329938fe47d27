"""Verbosity of the messages printed while assembling and solving. Timing information of the expensive stages
(assembly, discretization, eigensolve) is printed at the INFO level, known errors of the closed form operators and
eigensolver trouble at the WARNING level."""

import os

from enum import IntEnum

__pdoc__ = {}
for _name in ['log_debug', 'log_info', 'log_warning', 'log_warning_once', 'log_error']:
    __pdoc__[_name] = False


class LogLevel(IntEnum):
    """Verbosity of the package. A message is printed when its level is at least the current level."""

    DEBUG = 0
    """Everything, including the shifts and grid sizes chosen by the solvers."""

    INFO = 1
    """Timings and progress of the command line runs."""

    WARNING = 2
    """Warnings and errors only."""

    ERROR = 3
    """Errors only."""

    SILENT = 4
    """Nothing at all."""


def _level_from_environment(default=LogLevel.INFO):
    value = os.environ.get('SURFACEPAULI_LOG_LEVEL', '').upper()
    return LogLevel[value] if value in LogLevel.__members__ else default

_log_level = _level_from_environment()
_warned = set()

def set_log_level(level):
    """Set the current `LogLevel`. The initial level is read from the environment variable SURFACEPAULI_LOG_LEVEL
    ('debug', 'info', 'warning', 'error' or 'silent') and is INFO when it is unset."""
    global _log_level
    assert isinstance(level, LogLevel), "Log level should be a LogLevel"
    _log_level = level

def get_log_level():
    return _log_level

def _emit(level, prefix, msg):
    if _log_level <= level:
        print(prefix + str(msg))

def log_debug(msg):
    _emit(LogLevel.DEBUG, 'DEBUG: ', msg)

def log_info(msg):
    _emit(LogLevel.INFO, '', msg)

def log_warning(msg):
    _emit(LogLevel.WARNING, 'WARNING: ', msg)

def log_warning_once(key, msg):
    # Keyed on the caller, e.g. chart and term.
    if key not in _warned:
        _warned.add(key)
        log_warning(msg)

def log_error(msg):
    _emit(LogLevel.ERROR, 'ERROR: ', msg)
