"""Logging set-up for the command line; library modules only create loggers."""
import logging
import sys

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class DiagnosticCounter(logging.Handler):
    """Counts records per level so a command can derive its exit code."""

    def __init__(self):
        super().__init__(level=logging.DEBUG)
        self.counts = {}

    def emit(self, record):
        self.counts[record.levelno] = self.counts.get(record.levelno, 0) + 1

    @property
    def errors(self):
        return sum(n for level, n in self.counts.items() if level >= logging.ERROR)

    def reset(self):
        self.counts.clear()


def configure_logging(level=logging.INFO, stream=None):
    """Install a stderr handler and a :class:`DiagnosticCounter` on the
    package logger; returns the counter."""
    logger = logging.getLogger("copolymer")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    console = logging.StreamHandler(stream or sys.stderr)
    console.setFormatter(logging.Formatter(LOG_FORMAT))
    console.setLevel(level)
    counter = DiagnosticCounter()
    logger.addHandler(console)
    logger.addHandler(counter)
    logger.setLevel(min(level, logging.WARNING))
    logger.propagate = False
    return counter
