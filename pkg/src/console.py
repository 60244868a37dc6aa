"""Colored terminal messages and progress bars for the simulator CLI."""

import sys

from colorama import Fore, Style, init
from tqdm import tqdm

# Initialize colorama for Windows compatibility
init(autoreset=True)

_quiet = False


class Colors:
    """Color constants and helper functions."""

    # Status colors
    SUCCESS = Fore.GREEN
    ERROR = Fore.RED
    WARNING = Fore.YELLOW
    INFO = Fore.CYAN
    TITLE = Fore.MAGENTA

    # Table colors
    HEADER = Fore.BLUE + Style.BRIGHT
    VALUE = Fore.WHITE + Style.BRIGHT
    RESET = Style.RESET_ALL


def set_quiet(quiet: bool) -> None:
    """Silence info/title messages and progress bars."""
    global _quiet
    _quiet = bool(quiet)


def is_quiet() -> bool:
    return _quiet


def colored_print(text, color=Colors.RESET, stream=None):
    """Print text with color."""
    print(f"{color}{text}{Colors.RESET}", file=stream or sys.stdout)


def success_msg(message):
    if not _quiet:
        colored_print(f"✅ {message}", Colors.SUCCESS)


def error_msg(message):
    colored_print(f"❌ {message}", Colors.ERROR, stream=sys.stderr)


def warning_msg(message):
    colored_print(f"⚠️  {message}", Colors.WARNING, stream=sys.stderr)


def info_msg(message):
    if not _quiet:
        colored_print(f"ℹ️  {message}", Colors.INFO)


def title_msg(message):
    if not _quiet:
        colored_print(f"\n{message}", Colors.TITLE + Style.BRIGHT)
        colored_print("=" * len(message), Colors.TITLE)


class ProgressBar:
    """Progress bar utility functions."""

    @staticmethod
    def create_bar(total, description="Processing", color="green"):
        """Create a progress bar with custom styling."""
        bar_format = "{desc}: {percentage:3.0f}%|{bar}| {n_fmt}/{total_fmt} [{elapsed}<{remaining}]"

        # Color mapping for tqdm
        color_map = {
            "green": "\033[92m",
            "blue": "\033[94m",
            "yellow": "\033[93m",
            "red": "\033[91m",
            "cyan": "\033[96m"
        }

        return tqdm(
            total=total,
            desc=f"{color_map.get(color, '')}{description}\033[0m",
            bar_format=bar_format,
            ncols=70,
            ascii=True,
            colour=color,
            disable=_quiet,
        )
