import sys

from colorama import Fore, Style

PT = f"{Fore.CYAN}TRAIN{Style.RESET_ALL}"
PE = f"{Fore.GREEN}EPOCH{Style.RESET_ALL}"
PB = f"{Fore.MAGENTA}BEST{Style.RESET_ALL}"
PP = f"{Fore.BLUE}PREDICT{Style.RESET_ALL}"
PW = f"{Fore.YELLOW}WARNING{Style.RESET_ALL}"
PER = f"{Fore.RED}ERROR{Style.RESET_ALL}"


class JptdpError(Exception):
    """Base class of every error raised by the package"""


def report(tag: str, message: str, quiet: bool = False) -> None:
    """Print a tagged diagnostic line on standard error"""
    if quiet:
        return

    print(f"[{tag}] {message}", file=sys.stderr, flush=True)


def split_subtype(deprel: str) -> str:
    # "nmod:poss" -> "nmod"
    return deprel.split(":", 1)[0]


__all__ = ("JptdpError", "report", "split_subtype",
           "PT", "PE", "PB", "PP", "PW", "PER")
