"""
Core module - Configuration, logging, fatal-error hook and the error hierarchy.
"""
import os
import sys
import time
import logging
import traceback
import atexit

# --- Paths ---
BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
# templates ship beside the modules, in the source tree and when installed
TEMPLATES_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "templates")
LOG_DIR = os.path.join(BASE_DIR, ".log")

# Configuration from Environment Variables
OUTPUT_DIR = os.getenv("HILBERTLAB_OUTPUT_DIR", os.path.join(BASE_DIR, "output"))
LOG_PATH = os.getenv("HILBERTLAB_LOG_PATH", os.path.join(LOG_DIR, "hilbertlab.log"))
LOG_LEVEL = os.getenv("HILBERTLAB_LOG_LEVEL", "INFO").upper()
THREADS = max(1, int(os.getenv("HILBERTLAB_THREADS", "1")))
BALL_CAP = int(os.getenv("HILBERTLAB_BALL_CAP", "1000000"))
DEFAULT_SEED = int(os.getenv("HILBERTLAB_SEED", "20240229"))

SCHEMA_VERSION = "hilbertlab/v1"

PID = os.getpid()

logger = logging.getLogger("hilbertlab")


# --- Errors ---
class HilbertLabError(Exception):
    """Base class of every error raised by the lab."""
    exit_code = 1


class CollinearityViolation(HilbertLabError):
    pass


class DegenerateConfiguration(HilbertLabError):
    pass


class InvalidMatrix(HilbertLabError):
    pass


class PointAtInfinity(HilbertLabError):
    pass


class PointOutsideBody(HilbertLabError):
    pass


class DegenerateBody(HilbertLabError):
    pass


class UnsupportedFamily(HilbertLabError):
    pass


class UnsupportedDimension(HilbertLabError):
    pass


class NotAnAutomorphism(HilbertLabError):
    exit_code = 3


class UnboundedInChart(HilbertLabError):
    pass


class NotStandard(HilbertLabError):
    pass


class NonConvergence(HilbertLabError):
    pass


class BallCapExceeded(HilbertLabError):
    exit_code = 4


class NotTransitive(HilbertLabError):
    pass


class NotGenerating(HilbertLabError):
    pass


class SchemaError(HilbertLabError):
    exit_code = 2


class VerificationError(HilbertLabError):
    pass


# --- Logging ---
def configure_logging(log_path: str = LOG_PATH, console_level: str = LOG_LEVEL) -> logging.Logger:
    """Attach file and console handlers to the ``hilbertlab`` logger.

    Called by the CLI; library modules only ever ask for child loggers.
    """
    os.makedirs(os.path.dirname(log_path), exist_ok=True)
    log_formatter = logging.Formatter(f'%(asctime)s - [PID:{PID}] - %(name)s - %(levelname)s - %(message)s')

    file_handler = logging.FileHandler(log_path, mode='a', encoding='utf-8')
    file_handler.setFormatter(log_formatter)
    file_handler.setLevel(logging.DEBUG)

    console_handler = logging.StreamHandler()
    console_handler.setFormatter(log_formatter)
    console_handler.setLevel(getattr(logging, console_level, logging.INFO))

    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()
    logger.addHandler(file_handler)
    logger.addHandler(console_handler)
    logger.setLevel(logging.DEBUG)
    logger.propagate = False

    return logger


# --- Fatal Error Handler ---
def _fatal_log_path() -> str:
    return os.path.join(os.path.dirname(LOG_PATH), "fatal.log")


def _exception_chain(exc_value) -> str:
    """Render __cause__ / __context__ links of an exception."""
    chain_info = ""
    current = exc_value
    depth = 0
    while current is not None and depth < 10:
        nxt = current.__cause__ or (None if current.__suppress_context__ else current.__context__)
        if nxt is None:
            break
        label = "Caused by" if current.__cause__ is not None else "Context"
        chain_info += f"\n--- {label} (depth {depth + 1}) ---\n"
        chain_info += ''.join(traceback.format_exception(type(nxt), nxt, nxt.__traceback__))
        current = nxt
        depth += 1
    return chain_info


def log_fatal_error(exc_type, exc_value, exc_traceback):
    """Log unhandled exceptions to fatal.log with the command line and exception chain."""
    if issubclass(exc_type, KeyboardInterrupt):
        sys.__excepthook__(exc_type, exc_value, exc_traceback)
        return

    error_msg = ''.join(traceback.format_exception(exc_type, exc_value, exc_traceback))
    timestamp = time.strftime('%Y-%m-%d %H:%M:%S')
    fatal_entry = f"""
{'='*60}
FATAL ERROR at {timestamp} [PID:{PID}]
{'='*60}
Python Version: {sys.version}
Working Directory: {os.getcwd()}
Command Line: {' '.join(sys.argv)}

--- Full Traceback ---
{error_msg}
{_exception_chain(exc_value)}
{'='*60}
"""
    try:
        with open(_fatal_log_path(), 'a', encoding='utf-8') as f:
            f.write(fatal_entry)
    except OSError:
        pass  # Can't log the logging error

    logger.critical(f"FATAL ERROR: {exc_type.__name__}: {exc_value}")
    logger.critical(f"See {_fatal_log_path()} for full details")
    sys.__excepthook__(exc_type, exc_value, exc_traceback)


def _log_exit():
    logger.debug(f"Process exiting [PID:{PID}]")


_fatal_handler_installed = False


def install_fatal_handler():
    """Install the crash-report hook and the exit log line, once per process."""
    global _fatal_handler_installed
    sys.excepthook = log_fatal_error
    if _fatal_handler_installed:
        return
    atexit.register(_log_exit)
    _fatal_handler_installed = True
