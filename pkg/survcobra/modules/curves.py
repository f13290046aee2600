#!/usr/bin/python
# -*- coding: utf-8 -*-

# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

"""Predicted survival (or cumulative hazard) curves for query subjects.

The model is fitted on the split of the master seed. Query rows come from
``--query`` (a CSV with the dataset's covariate columns; time and event
columns are ignored) or, without it, from the first test-set subject.

Writes one ``curves_<variant>-<norm>.csv`` per method: first column ``time``
(the grid), then one column per query subject.
"""

from survcobra.module_utils.base import ExperimentBase, SurvCobraModule
from survcobra.module_utils.dataset import load_queries, split
from survcobra.module_utils.experiment import (
    ExperimentConfig,
    curve_rows,
    predict_curves,
    resolve_fixed_params,
    tune_methods,
)
from survcobra.module_utils.helpers import common_argument_spec, experiment_argument_spec
from survcobra.module_utils.tuning import Scheme


class CurveWriter(ExperimentBase):

    def queries(self, config, dataset):
        if self._params.get('query'):
            return load_queries(self._params['query'], dataset, config.schema)
        return split(dataset, config.split_for(0)).test.X[:1]

    def curves(self, config):
        dataset = config.load()
        X = self.queries(config, dataset)
        if config.fixed_params is not None:
            params = resolve_fixed_params(config.fixed_params, config.methods)
        else:
            data = dataset
            if config.tune.scheme is Scheme.TRAIN_ONLY:
                data = split(dataset, config.split_for(0)).train
            params, _ = tune_methods(data, config, workers=self._params['workers'])

        times, curves, diagnostics, _ = predict_curves(dataset, config, X, params, output=self._params['output'])
        for key in sorted(curves):
            if diagnostics[key]['exhausted']:
                self._module.warn("%s: %d query(ies) had no neighbours, written with the D_l Kaplan-Meier curve"
                                  % (key, diagnostics[key]['exhausted']))
            rows, columns = curve_rows(times, curves[key])
            self.write_rows('curves_%s.csv' % key, rows, columns)
        return {'queries': int(X.shape[0]), 'methods': sorted(curves), 'diagnostics': diagnostics}


def argument_spec():
    spec = common_argument_spec()
    spec.update(experiment_argument_spec())
    spec.pop('repetitions')
    spec.update(dict(
        query=dict(type='path', default=None),
        output=dict(type='str', default='survival', choices=['survival', 'cumhaz']),
    ))
    return spec


def main(cli_values=None):
    module = SurvCobraModule(argument_spec(), cli_values, name='curves')
    writer = CurveWriter(module)
    config = writer.run(ExperimentConfig.from_params, module.params)
    result = writer.run(writer.curves, config)
    module.exit_json(changed=True, files=writer.written, **result)


if __name__ == '__main__':
    main()
