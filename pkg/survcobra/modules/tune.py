#!/usr/bin/python
# -*- coding: utf-8 -*-

# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

"""Find COBRA params by k-fold cross-validated IBS.

Writes ``cv_scores.csv`` (one row per variant, epsilon, alpha and norm with
the fold mean and sd of the IBS) and ``best_params.json``. The JSON document
can be handed back to ``evaluate`` and ``curves`` with ``--params``.

Returns (stdout JSON):
    best: best params per variant
    files: written paths
"""

from survcobra.module_utils.base import ExperimentBase, SurvCobraModule
from survcobra.module_utils.dataset import split
from survcobra.module_utils.experiment import ExperimentConfig, tune_document
from survcobra.module_utils.helpers import common_argument_spec, experiment_argument_spec
from survcobra.module_utils.tuning import Scheme, cv_tune_variants

SCORE_COLUMNS = ['variant', 'epsilon', 'alpha', 'norm', 'mean_ibs', 'sd_ibs']


class Tuner(ExperimentBase):

    def tune(self, config):
        dataset = config.load()
        data = dataset
        if config.tune.scheme is Scheme.TRAIN_ONLY:
            data = split(dataset, config.split_for(0)).train
        results = cv_tune_variants(data, config.tune, config.variants, workers=self._params['workers'])

        rows = []
        for variant, result in results.items():
            rows.extend(dict(row, variant=variant.value) for row in result.to_rows())
        document = tune_document(results, config, data)
        self.write_rows('cv_scores.csv', rows, SCORE_COLUMNS)
        self.write_json('best_params.json', document)
        return document


def argument_spec():
    spec = common_argument_spec()
    spec.update(experiment_argument_spec())
    spec.pop('params')
    spec.pop('repetitions')
    return spec


def main(cli_values=None):
    module = SurvCobraModule(argument_spec(), cli_values, name='tune')
    tuner = Tuner(module)
    config = tuner.run(ExperimentConfig.from_params, module.params)
    document = tuner.run(tuner.tune, config)
    module.exit_json(changed=True, best=document['best'], methods=document['methods'], files=tuner.written)


if __name__ == '__main__':
    main()
