#!/usr/bin/python
# -*- coding: utf-8 -*-

# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

"""Repeated train/test evaluation of the COBRA variants and of every machine.

Params come from ``--params`` when given and are tuned otherwise (on the whole
dataset, or on the train part of every repetition with ``scheme=train_only``).

Files:
    report.json      mean and sd of the IBS per method and per machine, the
                     comparison checks and the ``flags`` list of failed checks
    methods.csv      the per-method summary of report.json
    repetitions.csv  one row per repetition and method
    machines.csv     one row per repetition and machine
    brier.csv        Brier score curves of the first repetition
    trees.json       the machine pool of the first repetition
    best_params.json tuned params (only when tuned on the whole dataset)
"""

from survcobra.module_utils.base import ExperimentBase, SurvCobraModule
from survcobra.module_utils.experiment import ExperimentConfig, brier_rows, evaluate, report_document, tune_document
from survcobra.module_utils.helpers import common_argument_spec, experiment_argument_spec

METHOD_COLUMNS = ['method', 'variant', 'norm', 'mean_ibs', 'sd_ibs', 'repetitions']
REPETITION_COLUMNS = ['repetition', 'seed', 'method', 'variant', 'norm', 'epsilon', 'alpha', 'ibs', 'widened', 'exhausted']
MACHINE_COLUMNS = ['repetition', 'machine', 'max_depth', 'min_leaf_size', 'ibs']


class Evaluator(ExperimentBase):

    def evaluate(self, config):
        dataset = config.load()
        report = evaluate(dataset, config, workers=self._params['workers'])

        exhausted = sum(row['exhausted'] for row in report['repetition_rows'])
        if exhausted:
            self._module.warn("%d test prediction(s) had no neighbours and were scored with the D_l Kaplan-Meier curve"
                              % exhausted)
        for name in report['flags']:
            self._module.warn("check failed: %s" % name)

        document = report_document(report, config, dataset)
        self.write_rows('methods.csv', report['summary'], METHOD_COLUMNS)
        self.write_rows('repetitions.csv', report['repetition_rows'], REPETITION_COLUMNS)
        self.write_rows('machines.csv', report['machine_rows'], MACHINE_COLUMNS)
        rows, columns = brier_rows(report['first'])
        self.write_rows('brier.csv', rows, columns)
        self.write_json('trees.json', report['first']['pool'].to_dict())
        if report['tuned'] is not None:
            self.write_json('best_params.json', tune_document(report['tuned'], config, dataset))
        self.write_json('report.json', document)
        return document


def argument_spec():
    spec = common_argument_spec()
    spec.update(experiment_argument_spec())
    return spec


def main(cli_values=None):
    module = SurvCobraModule(argument_spec(), cli_values, name='evaluate')
    evaluator = Evaluator(module)
    config = evaluator.run(ExperimentConfig.from_params, module.params)
    document = evaluator.run(evaluator.evaluate, config)
    module.exit_json(changed=True, methods=document['methods'], flags=document['flags'], files=evaluator.written)


if __name__ == '__main__':
    main()
