# -*- coding: utf-8 -*-

# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import os

import pytest
from ansible.module_utils.errors import AnsibleFallbackNotFound

from survcobra.module_utils.errors import ParameterError
from survcobra.module_utils.helpers import (
    atomic_write,
    common_argument_spec,
    env_fallback,
    experiment_argument_spec,
    helper_cleanup_data,
    helper_merge_sources,
    validate_params,
)


def _spec():
    spec = common_argument_spec()
    spec.update(experiment_argument_spec())
    return spec


def test_defaults():
    params = validate_params(_spec(), {'dataset': 'data.csv'})
    assert params['seed'] == 42
    assert params['out'] == 'results'
    assert params['workers'] == 1
    assert params['repetitions'] == 20
    assert params['variant'] == 'both'
    assert params['impute'] is False
    assert params['schema'] is None


def test_command_line_beats_document_beats_environment(monkeypatch):
    monkeypatch.setenv('SURVCOBRA_SEED', '3')
    spec = _spec()
    assert validate_params(spec, {'dataset': 'a'})['seed'] == 3
    assert validate_params(spec, {'dataset': 'a'}, {'seed': 9})['seed'] == 9
    assert validate_params(spec, {'dataset': 'a', 'seed': '11'}, {'seed': 9})['seed'] == 11


def test_unset_command_line_values_do_not_shadow_the_document():
    params = validate_params(_spec(), {'dataset': 'a', 'k_folds': None}, {'k_folds': 3})
    assert params['k_folds'] == 3


def test_aliases(monkeypatch):
    spec = _spec()
    assert validate_params(spec, {'dataset': 'a', 'reps': '4'})['repetitions'] == 4
    assert validate_params(spec, {'dataset': 'a'}, {'output_dir': 'elsewhere'})['out'] == 'elsewhere'
    monkeypatch.setenv('SURVCOBRA_REPS', '6')
    assert validate_params(spec, {'dataset': 'a'})['repetitions'] == 6


def test_choices_are_checked_as_given():
    assert validate_params(_spec(), {'dataset': 'a', 'norm': 'sup'})['norm'] == 'sup'
    with pytest.raises(ParameterError) as e:
        validate_params(_spec(), {'dataset': 'a', 'norm': 'SUP'})
    assert e.value.details['option'] == 'norm'


def test_invalid_choice():
    with pytest.raises(ParameterError) as e:
        validate_params(_spec(), {'dataset': 'a', 'variant': 'stacked'})
    assert e.value.details['option'] == 'variant'
    assert e.value.rc == 2


@pytest.mark.parametrize('name, value', [('seed', 'abc'), ('k_folds', 2.5), ('impute', 'maybe'),
                                         ('train_fraction', 'x')])
def test_invalid_types(name, value):
    with pytest.raises(ParameterError) as e:
        validate_params(_spec(), {'dataset': 'a', name: value})
    assert e.value.details['option'] == name


def test_coercion():
    params = validate_params(_spec(), {'dataset': '~/data.csv', 'impute': 'yes', 'k_folds': '3',
                                       'train_fraction': '0.7'})
    assert params['dataset'] == os.path.expanduser('~/data.csv')
    assert params['impute'] is True
    assert params['k_folds'] == 3
    assert params['train_fraction'] == 0.7


def test_missing_required_option():
    with pytest.raises(ParameterError) as e:
        validate_params(_spec(), {})
    assert e.value.details['option'] == 'dataset'


def test_raw_options_pass_through():
    schema = {'time_column': 't', 'event_column': 'e'}
    assert validate_params(_spec(), {'dataset': 'a'}, {'schema': schema})['schema'] == schema


def test_env_fallback(monkeypatch):
    monkeypatch.setenv('SURVCOBRA_OUT', '/tmp/x')
    assert env_fallback('SURVCOBRA_NOPE', 'SURVCOBRA_OUT') == '/tmp/x'
    with pytest.raises(AnsibleFallbackNotFound):
        env_fallback('SURVCOBRA_NOPE')


def test_helper_cleanup_data():
    assert helper_cleanup_data({'a': None, 'b': [1, None, {'c': None}]}) == {'b': [1, {}]}


def test_merge_sources_keeps_the_first_source_that_sets_an_option():
    spec = _spec()
    merged = helper_merge_sources(spec, {'reps': 3, 'seed': None}, {'repetitions': 7, 'seed': 5, 'unknown': 1})
    assert merged == {'repetitions': 3, 'seed': 5}


def test_unknown_document_keys_are_ignored():
    params = validate_params(_spec(), {'dataset': 'a'}, {'datasets': {'x': 'x.json'}})
    assert 'datasets' not in params


def test_atomic_write(tmp_path):
    path = tmp_path / 'nested' / 'out.txt'
    atomic_write(str(path), 'first\n')
    atomic_write(str(path), 'second\n')
    assert path.read_text() == 'second\n'
    assert os.listdir(str(tmp_path / 'nested')) == ['out.txt']
