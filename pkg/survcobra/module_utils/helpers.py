# -*- coding: utf-8 -*-

# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import os
import re
import tempfile

from ansible.module_utils.basic import env_fallback
from ansible.module_utils.common.arg_spec import ArgumentSpecValidator

from survcobra.module_utils.errors import ParameterError


def common_argument_spec():
    """
    Return a dictionary with the options shared by every subcommand.
    """
    return dict(
        config=dict(
            type='path',
            required=False,
        ),
        seed=dict(
            type='int',
            default=42,
            fallback=(env_fallback, ['SURVCOBRA_SEED'])
        ),
        out=dict(
            type='path',
            default='results',
            aliases=['output_dir'],
            fallback=(env_fallback, ['SURVCOBRA_OUT'])
        ),
        workers=dict(
            type='int',
            default=1,
            fallback=(env_fallback, ['SURVCOBRA_WORKERS'])
        ),
        log_level=dict(
            type='str',
            default='INFO',
            choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
            fallback=(env_fallback, ['SURVCOBRA_LOG_LEVEL'])
        ),
    )


def experiment_argument_spec():
    """
    Options describing a dataset and the experiment protocol run on it.
    Used by tune, evaluate and curves.
    """
    return dict(
        dataset=dict(type='path', required=True),
        schema=dict(type='raw', default=None),
        impute=dict(type='bool', default=False),
        grid_resolution=dict(type='int', default=100),
        train_fraction=dict(type='float', default=0.8),
        dl_fraction=dict(type='float', default=0.5),
        k_folds=dict(type='int', default=5),
        epsilon_grid_size=dict(type='int', default=20),
        scheme=dict(type='str', default='whole_dataset', choices=['whole_dataset', 'train_only']),
        variant=dict(type='str', default='both', choices=['straight', 'weighted', 'both']),
        norm=dict(type='str', default='both', choices=['frobenius', 'sup', 'both']),
        weights=dict(type='str', default='complement', choices=['complement', 'literal']),
        straight_estimator=dict(type='str', default='nelson_aalen', choices=['nelson_aalen', 'kaplan_meier']),
        repetitions=dict(type='int', default=20, aliases=['reps'],
                         fallback=(env_fallback, ['SURVCOBRA_REPS'])),
        params=dict(type='raw', default=None),
    )


def helper_cleanup_data(obj):
    """
    Removes the None values from the object and returns the object
    Args:
        obj: object to cleanup

    Returns:
       object: cleaned object
    """
    if isinstance(obj, (list, tuple, set)):
        return type(obj)(helper_cleanup_data(x) for x in obj if x is not None)
    elif isinstance(obj, dict):
        return type(obj)((helper_cleanup_data(k), helper_cleanup_data(v))
                         for k, v in obj.items() if k is not None and v is not None)
    else:
        return obj


def helper_merge_sources(argument_spec, *sources):
    """
    Picks every option from the first source that sets it, under its name or
    one of its aliases. Unknown keys are ignored.

    Parameters:
        argument_spec: dictionary of option specs
        sources: dictionaries in order of precedence

    Returns:
        dict: option name -> value, for the options set somewhere
    """
    sources = [helper_cleanup_data(dict(source or {})) for source in sources]
    merged = {}
    for name, spec in argument_spec.items():
        names = [name] + list(spec.get('aliases', []))
        for source in sources:
            found = [source[n] for n in names if n in source]
            if found:
                merged[name] = found[0]
                break
    return merged


def _failed_option(message, argument_spec):
    """The option named first in a validation message, if any."""
    hits = []
    for name in argument_spec:
        match = re.search(r"\b%s\b" % re.escape(name), message)
        if match:
            hits.append((match.start(), name))
    return min(hits)[1] if hits else None


def validate_params(argument_spec, cli_values=None, document=None):
    """
    Resolves every option of argument_spec into a flat params dict.

    Precedence: explicit command line value, then the JSON config document,
    then the environment fallback, then the declared default. Types, choices
    and required options are checked by ArgumentSpecValidator.

    Parameters:
        argument_spec: dictionary of option specs
        cli_values: values given on the command line (None means unset)
        document: parsed JSON config document

    Returns:
        dict: validated and coerced params
    """
    merged = helper_merge_sources(argument_spec, cli_values, document)
    result = ArgumentSpecValidator(argument_spec).validate(merged)
    if result.error_messages:
        message = result.error_messages[0]
        raise ParameterError(message, option=_failed_option(message, argument_spec))
    validated = result.validated_parameters
    return dict((name, validated.get(name)) for name in argument_spec)


def atomic_write(path, data, mode='w'):
    """
    Writes data to path through a temporary file in the same directory and
    renames it into place, so readers never see a truncated file.
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix='.%s.' % os.path.basename(path), dir=directory)
    try:
        encoding = None if 'b' in mode else 'utf-8'
        newline = None if 'b' in mode else ''
        with os.fdopen(fd, mode, encoding=encoding, newline=newline) as handle:
            handle.write(data)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise
