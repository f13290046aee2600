#!/usr/bin/python
# -*- coding: utf-8 -*-

# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

"""Tune and evaluate every method on several datasets and tabulate the IBS.

Datasets come from ``config_dir`` (every ``*.json`` experiment config, in
file name order, named after the file) or from the ``datasets`` mapping of the
``--config`` document (name -> experiment config path). Options given here
override the per-dataset configs. ``data_dir`` replaces the directory part of
every dataset path.

Files:
    <name>/...  the evaluate outputs of every dataset
    table.md    methods x datasets, mean and sd of the IBS
    table.csv   the same table, full precision
    status.json per-dataset outcome; the run stops at the first failure
"""

import glob
import logging
import os

from survcobra.module_utils.base import ExperimentBase, SurvCobraModule, load_config_document
from survcobra.module_utils.errors import ParameterError, SurvCobraError
from survcobra.module_utils.experiment import ExperimentConfig, table_markdown, table_rows
from survcobra.module_utils.helpers import common_argument_spec, env_fallback, experiment_argument_spec, validate_params
from survcobra.modules.evaluate import Evaluator

log = logging.getLogger(__name__)

# experiment options that may be overridden for all datasets at once
OVERRIDES = ('repetitions', 'k_folds', 'epsilon_grid_size', 'grid_resolution', 'train_fraction', 'dl_fraction',
             'scheme', 'weights', 'straight_estimator', 'impute', 'seed', 'workers', 'log_level')


class Reproducer(ExperimentBase):

    def dataset_configs(self):
        """Ordered list of (name, config path)."""
        datasets = self._params.get('datasets')
        if datasets:
            base = os.path.dirname(os.path.abspath(self._params['config'] or '.'))
            return [(str(name), os.path.join(base, os.path.expanduser(path))) for name, path in sorted(datasets.items())]
        config_dir = self._params['config_dir']
        if not os.path.isdir(config_dir):
            raise ParameterError("config directory not found: %s" % config_dir, option='config_dir')
        paths = sorted(glob.glob(os.path.join(config_dir, '*.json')))
        if not paths:
            raise ParameterError("no *.json dataset configs in %s" % config_dir, option='config_dir')
        return [(os.path.splitext(os.path.basename(p))[0], p) for p in paths]

    def dataset_params(self, name, path):
        spec = common_argument_spec()
        spec.update(experiment_argument_spec())
        document = load_config_document(path, spec)
        data_dir = self._params.get('data_dir')
        if data_dir and document.get('dataset'):
            document['dataset'] = os.path.join(data_dir, os.path.basename(document['dataset']))
        overrides = dict((k, self._params.get(k)) for k in OVERRIDES)
        overrides['out'] = os.path.join(self._out, name)
        return validate_params(spec, overrides, document)

    def reproduce(self):
        configs = self.dataset_configs()
        status = [{'name': name, 'config': path, 'status': 'pending'} for name, path in configs]
        reports = []
        for entry in status:
            try:
                params = self.dataset_params(entry['name'], entry['config'])
                config = ExperimentConfig.from_params(params)
                document = Evaluator(self._module, params).evaluate(config)
            except SurvCobraError as e:
                self._abort(status, entry, e.msg, e.rc, e.details)
            except Exception as e:
                log.exception("dataset %s failed", entry['name'])
                self._abort(status, entry, "%s: %s" % (type(e).__name__, e), 1, {})
            entry['status'] = 'ok'
            entry['flags'] = document['flags']
            reports.append((entry['name'], document))

        rows, columns = table_rows(reports)
        self.write_rows('table.csv', rows, columns)
        self.write_text('table.md', table_markdown(reports))
        self.write_json('status.json', {'datasets': status, 'failed': False})
        return reports, status

    def _abort(self, status, entry, msg, rc, details):
        entry.update(status='failed', msg=msg)
        for other in status:
            if other['status'] == 'pending':
                other['status'] = 'skipped'
        self.write_json('status.json', {'datasets': status, 'failed': True})
        self._module.fail_json(msg="%s: %s" % (entry['name'], msg), rc=rc, dataset=entry['name'], status=status, **details)


def _override(option):
    """An experiment option without its default or fallback, so unset overrides leave the dataset config alone."""
    return dict((k, v) for k, v in option.items() if k not in ('default', 'fallback', 'required'))


def argument_spec():
    spec = common_argument_spec()
    experiment = experiment_argument_spec()
    for name in OVERRIDES:
        if name in experiment:
            spec[name] = _override(experiment[name])
    for name in ('seed', 'workers', 'log_level'):
        spec[name] = _override(spec[name])
    spec.update(dict(
        config_dir=dict(type='path', default='configs'),
        data_dir=dict(type='path', fallback=(env_fallback, ['SURVCOBRA_DATA_DIR'])),
        datasets=dict(type='dict'),
    ))
    return spec


def main(cli_values=None):
    module = SurvCobraModule(argument_spec(), cli_values, name='reproduce')
    reproducer = Reproducer(module)
    reports, status = reproducer.run(reproducer.reproduce)
    module.exit_json(changed=True, datasets=status, files=reproducer.written,
                     table=[dict(name=name, methods=doc['methods']) for name, doc in reports])


if __name__ == '__main__':
    main()
