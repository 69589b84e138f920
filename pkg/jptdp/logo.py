from colorama import Fore, Style

LOGO = f'''{Fore.MAGENTA}
     _ ____ _____ ____  ____
    (_)  _ \\_   _|  _ \\|  _ \\
    | | |_) || | | | | | |_) |
    | |  __/ | | | |_| |  __/
   _/ |_|    |_| |____/|_|
  |__/{Style.RESET_ALL}  joint POS tagging and graph-based dependency parsing
'''

__all__ = ("LOGO",)
