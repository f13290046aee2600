#!/usr/bin/env python
# -*- coding: utf-8 -*-

# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

"""
survcobra command line.
=======================

Subcommands ``tune``, ``evaluate``, ``curves`` and ``reproduce``. Options can
also be given in a JSON document (``--config``) or through ``SURVCOBRA_*``
environment variables; the command line wins over the document, the document
over the environment.

The outcome is printed as one JSON document on stdout. Exit codes: 0 success,
1 internal failure, 2 user or input error.
"""

import argparse
import sys

from survcobra import __version__
from survcobra.modules import curves, evaluate, reproduce, tune

SUBCOMMANDS = {
    'tune': tune,
    'evaluate': evaluate,
    'curves': curves,
    'reproduce': reproduce,
}


def _flag(name):
    return '--' + name.replace('_', '-')


def add_options(parser, argument_spec):
    """One flag per option; every flag defaults to None so unset flags do not
    shadow the config document or the environment."""
    for name, spec in sorted(argument_spec.items()):
        if spec.get('type') == 'dict':
            # config document only
            continue
        flags = [_flag(name)] + [_flag(alias) for alias in spec.get('aliases', [])]
        kwargs = dict(dest=name, default=None)
        if spec.get('type') == 'bool':
            kwargs.update(action='store_const', const=True)
        else:
            kwargs.update(metavar=name.upper())
            if spec.get('choices'):
                kwargs['help'] = '|'.join(spec['choices'])
        if spec.get('default') is not None and 'help' not in kwargs:
            kwargs['help'] = 'default: %s' % spec['default']
        parser.add_argument(*flags, **kwargs)


def build_parser():
    parser = argparse.ArgumentParser(prog='survcobra', description=__doc__.strip().splitlines()[0], allow_abbrev=False)
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    subparsers = parser.add_subparsers(dest='command', metavar='COMMAND')
    subparsers.required = True
    for name, module in SUBCOMMANDS.items():
        summary = (module.__doc__ or '').strip().splitlines()[0]
        sub = subparsers.add_parser(name, help=summary, description=module.__doc__,
                                    formatter_class=argparse.RawDescriptionHelpFormatter, allow_abbrev=False)
        add_options(sub, module.argument_spec())
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    values = dict((k, v) for k, v in vars(args).items() if k != 'command' and v is not None)
    SUBCOMMANDS[args.command].main(values)


if __name__ == '__main__':
    sys.exit(main())
