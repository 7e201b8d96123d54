import logging
from typing import Callable, Union

try:
    import coloredlogs  # type: ignore
except ModuleNotFoundError:
    coloredlogs = None


logger = logging.getLogger(__name__)

LOG_FORMAT = "[%(asctime)s] %(name)-30s %(levelname)-8s %(message)s"

_LEVEL_FUNCTIONS: dict[int, Callable] = {
    logging.DEBUG: logging.debug,
    logging.INFO: logging.info,
    logging.WARNING: logging.warning,
    logging.ERROR: logging.error,
    logging.CRITICAL: logging.critical,
}

# Third party loggers that flood DEBUG output
_QUIET_LOGGERS = ("PIL",)


def parse_level(this_level: Union[int, str]) -> tuple[int, Callable]:
    """
    Resolve a level given as number or name.

    :raises RuntimeError: For levels other than DEBUG, INFO, WARNING, ERROR and
        CRITICAL
    :return: Numeric level and the module level logging function of that level
    """
    level = (
        logging.getLevelName(this_level) if isinstance(this_level, str) else this_level
    )
    if level not in _LEVEL_FUNCTIONS:
        raise RuntimeError("%s is not supported" % this_level)
    return level, _LEVEL_FUNCTIONS[level]


def verbosity_to_level(verbose: int) -> int:
    """Map a -v count to a logging level (0: WARNING, 1: INFO, 2+: DEBUG)"""
    if verbose <= 0:
        return logging.WARNING
    if verbose == 1:
        return logging.INFO
    return logging.DEBUG


def init_logging(this_level: Union[int, str]) -> bool:
    """Set up the root logger, with coloured output if coloredlogs is installed"""
    level, _ = parse_level(this_level)
    if coloredlogs is None:
        logging.basicConfig(level=level, format=LOG_FORMAT)
    else:
        coloredlogs.install(level=level, fmt=LOG_FORMAT)
    for name in _QUIET_LOGGERS:
        logging.getLogger(name).setLevel(max(level, logging.INFO))
    logger.debug("Logging initialized with level %s", logging.getLevelName(level))
    return True
