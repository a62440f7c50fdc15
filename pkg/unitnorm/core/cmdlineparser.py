"""
Command line parser helpers: argument declarations, value types of
numeric options and the parser used by :func:`unitnorm.main.main`.
"""

import argparse
import sys

from gettext import gettext as _

__all__ = [
    'argument', 'ArgumentParser', 'positive_int', 'non_negative_int',
    'non_negative_float',
]


def argument(*args, **kwargs):
    """
    Return function's arguments how single command line argument
    should be parsed. *args* a *kwargs* have the same meaning as a
    :method:`argparse.ArgumentParser.add_argument` method.
    """
    return args, kwargs


def _number(convert, lowest):
    def parse(value):
        try:
            number = convert(value)
        except ValueError:
            raise argparse.ArgumentTypeError(
                _("invalid {} value: '{}'").format(convert.__name__, value))
        if number < lowest:
            raise argparse.ArgumentTypeError(
                _("must be >= {}, got {}").format(lowest, value))
        return number
    parse.__name__ = '%s_from_%s' % (convert.__name__, lowest)
    return parse


positive_int = _number(int, 1)
"""
Type of options counting steps, iterations or seeds.
"""

non_negative_int = _number(int, 0)

non_negative_float = _number(float, 0.0)
"""
Type of guidance weights, dropout rates and tolerances.
"""


class ArgumentParser(argparse.ArgumentParser):
    """
    Extends :class:`ArgumentParser` from Python's standard library.
    Prints usage of the whole parser before the error message and exits
    with code 2, so configuration errors reported through :meth:`error`
    look like any other command line error.
    """

    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(2, _('\n{:s}: error: {:s}\n').format(self.prog, message))
