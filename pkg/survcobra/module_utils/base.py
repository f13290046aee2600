#!/usr/bin/env python
# -*- coding: utf-8 -*-

# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import io
import json
import logging
import os
import sys

import pandas as pd

from survcobra.module_utils.errors import DataFileError, ParameterError, SurvCobraError
from survcobra.module_utils.helpers import atomic_write, validate_params

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

log = logging.getLogger(__name__)


def setup_logging(level):
    """Attaches one stderr handler to the package logger and sets its level."""
    logger = logging.getLogger('survcobra')
    for old in [h for h in logger.handlers if getattr(h, '_survcobra', False)]:
        # the stream of an earlier run may be closed already
        logger.removeHandler(old)
        old.close()
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._survcobra = True
    logger.addHandler(handler)
    logger.setLevel(getattr(logging, str(level).upper(), logging.INFO))


def load_config_document(path, argument_spec):
    """
    Reads a JSON config document. Relative values of path-typed options are
    resolved against the directory of the document.
    """
    try:
        with open(path, encoding='utf-8') as handle:
            document = json.load(handle)
    except OSError as e:
        raise DataFileError("cannot read config %s: %s" % (path, e), path=path)
    except ValueError as e:
        raise ParameterError("config %s is not valid JSON: %s" % (path, e), path=path)
    if not isinstance(document, dict):
        raise ParameterError("config %s must hold a JSON object" % path, path=path)

    base = os.path.dirname(os.path.abspath(path))
    for name, spec in argument_spec.items():
        value = document.get(name)
        # raw options given as strings name a JSON file
        if spec.get('type') in ('path', 'raw') and isinstance(value, str) and not os.path.isabs(os.path.expanduser(value)):
            document[name] = os.path.join(base, value)
    return document


class SurvCobraModule(object):
    """
    Resolves the params of one subcommand and reports its outcome as a JSON
    document on stdout. Exit codes: 0 success, 1 internal failure, 2 user or
    input error.
    """

    def __init__(self, argument_spec, cli_values=None, name=None):
        self.argument_spec = argument_spec
        self.name = name
        self.warnings = []
        self.params = {}
        cli_values = dict(cli_values or {})
        try:
            document = None
            if cli_values.get('config'):
                document = load_config_document(cli_values['config'], argument_spec)
            self.params = validate_params(argument_spec, cli_values, document)
            self.document = document or {}
        except SurvCobraError as e:
            setup_logging('INFO')
            self.fail_json(msg=e.msg, rc=e.rc, **e.details)
        setup_logging(self.params.get('log_level') or 'INFO')

    def _emit(self, result):
        sys.stdout.write(json.dumps(result, sort_keys=True, default=_json_default) + '\n')
        sys.stdout.flush()

    def warn(self, msg):
        log.warning(msg)
        self.warnings.append(msg)

    def exit_json(self, **result):
        result.setdefault('changed', False)
        result['failed'] = False
        if self.warnings:
            result['warnings'] = self.warnings
        self._emit(result)
        raise SystemExit(0)

    def fail_json(self, msg, rc=1, **details):
        log.error(msg)
        result = dict(details)
        result.update(failed=True, msg=msg, rc=rc)
        if self.warnings:
            result['warnings'] = self.warnings
        self._emit(result)
        raise SystemExit(rc)


def _json_default(value):
    if hasattr(value, 'tolist'):
        return value.tolist()
    if hasattr(value, 'value'):
        return value.value
    return str(value)


def _float_repr(value):
    return repr(float(value))


def dump_json(document):
    """Deterministic JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(document, sort_keys=True, indent=2, default=_json_default) + '\n'


class ExperimentBase(object):
    """
    The base class for deriving off subcommand classes. Owns the output
    directory; every file is written atomically. params defaults to the
    module's params.
    """
    def __init__(self, module, params=None):
        self._module = module
        self._params = module.params if params is None else params
        self._out = self._params.get('out') or 'results'
        self.written = []

    def path(self, name):
        return os.path.join(self._out, name)

    def write_text(self, name, text):
        path = self.path(name)
        atomic_write(path, text)
        self.written.append(path)
        log.info("wrote %s", path)
        return path

    def write_json(self, name, document):
        return self.write_text(name, dump_json(document))

    def write_rows(self, name, rows, columns):
        """CSV with the given column order; floats keep full repr precision."""
        frame = pd.DataFrame(list(rows), columns=columns)
        buf = io.StringIO()
        frame.to_csv(buf, index=False, float_format=_float_repr, lineterminator='\n')
        return self.write_text(name, buf.getvalue())

    def run(self, func, *args, **kwargs):
        """Calls func and converts library errors into a failure document."""
        try:
            return func(*args, **kwargs)
        except SurvCobraError as e:
            self._module.fail_json(msg=e.msg, rc=e.rc, **e.details)
