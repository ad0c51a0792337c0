import contextlib
import logging
import os
import re
import sys
import threading
import time
from collections.abc import Callable
from datetime import datetime
from enum import Enum
from typing import Literal


class ANSICodes:
    Reset = "\033[0m"

    class Weight:
        Reset = "\033[22m"
        Bold = "\033[1m"

    class FgColor:
        Reset = "\033[39m"
        Grey = "\033[38;5;245m"
        Black = "\033[90m"
        Red = "\033[91m"
        Yellow = "\033[93m"
        Blue = "\033[94m"
        Magenta = "\033[95m"
        Cyan = "\033[96m"
        White = "\033[97m"

    class BgColor:
        Reset = "\033[49m"
        Yellow = "\033[103m"


def colorize_fg(text: str, color: str):
    return f"{getattr(ANSICodes.FgColor, color.capitalize())}{text}{ANSICodes.FgColor.Reset}"


def colorize_bg(text: str, color: str):
    return f"{getattr(ANSICodes.BgColor, color.capitalize())}{text}{ANSICodes.BgColor.Reset}"


def bold(text: str):
    return f"{ANSICodes.Weight.Bold}{text}{ANSICodes.Weight.Reset}"


def _stderr_is_tty():
    try:
        return os.isatty(sys.stderr.fileno())
    except (AttributeError, OSError, ValueError):
        return False


class Log:
    """
    Package-wide logger. Everything is written to stderr, because the command-line front end keeps
    stdout for its single JSON result. Features:
    - Messages can be regular strings _or_ lambdas. Lambdas are only evaluated when the message is
      actually logged, so expensive diagnostics cost nothing at lower levels.
    - Wrapping any part of a message in vertical bars ("like |this|") highlights it.
    - Wrapping an integer followed by a singular noun in dollar signs ("like $4 step$") highlights
      it and pluralizes the noun when needed.
    - Starting a message with "![label]" prints the label as a banner.

    Set `Log.force_builtin` to forward records to the standard `logging` module (logger name
    `"discgan"`) instead of writing them directly.
    """

    class LogLevel(Enum):
        NONE = 0
        FAIL = 10
        WARN = 20
        INFO = 30
        DBUG = 40

    Message = Callable[[], str] | str
    LevelName = Literal["debug", "info", "warn", "fail", "none"]

    level: LogLevel = LogLevel.NONE
    color: bool = _stderr_is_tty()
    force_builtin: bool = False
    lock: threading.RLock = threading.RLock()
    _context_width: int = 18

    _names = {
        "debug": LogLevel.DBUG,
        "info": LogLevel.INFO,
        "warn": LogLevel.WARN,
        "fail": LogLevel.FAIL,
        "none": LogLevel.NONE,
    }

    @classmethod
    def _resolve(cls, level: "Log.LogLevel | Log.LevelName"):
        if isinstance(level, cls.LogLevel):
            return level
        try:
            return cls._names[level]
        except KeyError:
            raise ValueError(f"unknown log level '{level}'") from None

    @classmethod
    def set_level(cls, level: "Log.LogLevel | Log.LevelName"):
        cls.level = cls._resolve(level)

    @classmethod
    def enabled(cls, level: "Log.LogLevel | Log.LevelName"):
        level = cls._resolve(level)
        return level is not cls.LogLevel.NONE and cls.level.value >= level.value

    @classmethod
    def _highlight(cls, match: re.Match[str]):
        if not cls.color:
            return match.group(1)
        return colorize_fg(match.group(1), "cyan")

    @classmethod
    def _pluralize(cls, match: re.Match[str]):
        count, noun = match.group(1), match.group(2)
        if abs(int(count)) != 1:
            if noun.endswith("y") and not noun.endswith(("ay", "ey", "oy")):
                noun = noun[:-1] + "ies"
            elif noun.endswith(("s", "x")):
                noun += "es"
            else:
                noun += "s"
        text = f"{count} {noun}"
        if not cls.color:
            return text
        return colorize_fg(text, "magenta")

    @classmethod
    def _banner(cls, match: re.Match[str]):
        if not cls.color:
            return f"[ {match.group(1)} ]"
        return colorize_fg(colorize_bg(bold(f" {match.group(1)} "), "yellow"), "black")

    @classmethod
    def format(cls, msg: str):
        """Applies the inline markup described in the class docstring."""
        msg = re.sub(r"\|([^\|]+)\|", cls._highlight, msg)
        msg = re.sub(r"\$(-?\d+) ([^\$]+)\$", cls._pluralize, msg)
        msg = re.sub(r"^\!\[([^\]]+)\]", cls._banner, msg)
        return msg

    @classmethod
    def _formatlevel(cls, level: LogLevel):
        if not cls.color:
            return level.name
        color = {
            cls.LogLevel.DBUG: "white",
            cls.LogLevel.INFO: "blue",
            cls.LogLevel.WARN: "yellow",
            cls.LogLevel.FAIL: "red",
        }[level]
        return colorize_fg(bold(level.name), color)

    @classmethod
    def _caller(cls, depth: int):
        frame = sys._getframe(depth)
        context = f"{os.path.basename(frame.f_code.co_filename)}:{frame.f_lineno}"
        cls._context_width = max(cls._context_width, len(context))
        padded = context.ljust(cls._context_width)
        return colorize_fg(padded, "grey") if cls.color else padded

    @classmethod
    def log(cls, level: LogLevel, msg: Message, strip_stack: int = 0):
        """
        Formats and writes a message, if `level` is enabled. `strip_stack` skips additional frames
        when looking up the caller, for use from helper functions.
        """

        if not cls.enabled(level):
            return
        with cls.lock:
            text = cls.format(msg() if callable(msg) else msg)

            if cls.force_builtin:
                logging.getLogger("discgan").log(
                    {
                        cls.LogLevel.DBUG: logging.DEBUG,
                        cls.LogLevel.INFO: logging.INFO,
                        cls.LogLevel.WARN: logging.WARNING,
                        cls.LogLevel.FAIL: logging.ERROR,
                    }[level],
                    text,
                )
                return

            stamp = datetime.now().strftime("%Y-%m-%d %H:%M:%S.%f")
            sep = colorize_fg(" | ", "grey") if cls.color else " | "
            caller = cls._caller(3 + strip_stack)
            prefix = f"{stamp}{sep}{caller}{sep}{cls._formatlevel(level)}{sep}"
            reset = ANSICodes.Reset if cls.color else ""
            for row in text.split("\n"):
                sys.stderr.write(f"{prefix}{row}{reset}\n")
            sys.stderr.flush()

    @classmethod
    def debug(cls, msg: Message, **kwargs):
        cls.log(cls.LogLevel.DBUG, msg, **kwargs)

    @classmethod
    def info(cls, msg: Message, **kwargs):
        cls.log(cls.LogLevel.INFO, msg, **kwargs)

    @classmethod
    def warn(cls, msg: Message, **kwargs):
        cls.log(cls.LogLevel.WARN, msg, **kwargs)

    @classmethod
    def fail(cls, msg: Message, **kwargs):
        cls.log(cls.LogLevel.FAIL, msg, **kwargs)

    @classmethod
    @contextlib.contextmanager
    def timed(cls, what: str, level: "Log.LevelName" = "debug"):
        """
        Context manager that logs how long the enclosed block took. Timing goes to the log only,
        never into results, so outputs stay reproducible.
        """

        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed = time.perf_counter() - start
            cls.log(cls._resolve(level), f"{what} took |{elapsed:.3f} s|.", strip_stack=1)
