# -*- coding: utf-8 -*-

# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

"""Experiment protocol shared by the subcommands.

An experiment loads one dataset, finds COBRA params (fixed or tuned), then
repeats: reseeded 80/20 split, 50/50 D_k/D_l subdivision of train, pool fit on
D_k, COBRA predictions on test and IBS per method and per machine.
"""

import json
import logging
import os
from collections import namedtuple
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from survcobra.module_utils.cobra import (
    CobraOptions,
    CobraParams,
    NormKind,
    Variant,
    cumulative_hazard,
    fit_cobra,
    norm_kind,
)
from survcobra.module_utils.dataset import (
    DatasetSchema,
    SplitSpec,
    load_csv,
    load_schema,
    make_time_grid,
    split,
)
from survcobra.module_utils.errors import DataFileError, ParameterError
from survcobra.module_utils.estimators import censoring_survival
from survcobra.module_utils.metrics import brier_curve, integrated_brier_score, per_machine_ibs
from survcobra.module_utils.survival_tree import build_machine_pool
from survcobra.module_utils.tuning import NORM_ORDER, Scheme, TuneConfig, cv_tune_variants, norms_from, spread

log = logging.getLogger(__name__)

VARIANT_ORDER = (Variant.WEIGHTED, Variant.STRAIGHT)
DEFAULT_SCHEMA = {'time_column': 'time', 'event_column': 'event'}

# tolerances of the reproduced claims
NORM_GAP = 0.02
MACHINE_MARGIN = 0.01
VARIANT_MARGIN = 0.01

Method = namedtuple('Method', ['variant', 'norm'])


def method_key(method):
    return "%s-%s" % (method.variant.value, method.norm.value)


def method_label(method):
    return "%s %s" % (method.variant.value.capitalize(), method.norm.value.capitalize())


def variants_from(value):
    if str(value).lower() == 'both':
        return VARIANT_ORDER
    return (Variant(str(value).lower()),)


@dataclass(frozen=True)
class ExperimentConfig(object):
    dataset: str
    schema: DatasetSchema
    impute: bool
    split: SplitSpec
    tune: TuneConfig
    variants: Tuple[Variant, ...]
    norms: Tuple[NormKind, ...]
    options: CobraOptions
    repetitions: int
    grid_resolution: int
    seed: int
    out: str
    fixed_params: Optional[dict] = None

    @property
    def methods(self):
        return [Method(v, n) for v in self.variants for n in self.norms]

    @classmethod
    def from_params(cls, params):
        """Builds the experiment description from the flat params of a subcommand."""
        if params.get('repetitions') is not None and params['repetitions'] < 1:
            raise ParameterError("repetitions must be at least 1, got %s" % params['repetitions'], option='repetitions')
        if params.get('grid_resolution', 100) < 2:
            raise ParameterError("grid_resolution must be at least 2", option='grid_resolution')

        schema = params.get('schema') or DEFAULT_SCHEMA
        if isinstance(schema, str):
            schema = load_schema(schema)
        elif isinstance(schema, dict):
            schema = DatasetSchema.from_dict(schema)
        else:
            raise ParameterError("schema must be a JSON object or a path to one", option='schema')

        seed = int(params.get('seed') or 0)
        options = CobraOptions(weights=params.get('weights') or 'complement',
                               straight_estimator=params.get('straight_estimator') or 'nelson_aalen')
        variants = variants_from(params.get('variant') or 'both')
        norms = norms_from(params.get('norm') or 'both')
        split_spec = SplitSpec(params.get('train_fraction', 0.8), params.get('dl_fraction', 0.5), seed)
        tune = TuneConfig(
            k_folds=params.get('k_folds', 5),
            epsilon_grid_size=params.get('epsilon_grid_size', 20),
            variant=variants[0],
            norms=norms,
            seed=seed,
            scheme=Scheme(params.get('scheme') or 'whole_dataset'),
            dl_fraction=split_spec.dl_fraction,
            grid_resolution=params.get('grid_resolution', 100),
            options=options,
        )
        return cls(
            dataset=params['dataset'],
            schema=schema,
            impute=bool(params.get('impute')),
            split=split_spec,
            tune=tune,
            variants=variants,
            norms=norms,
            options=options,
            repetitions=params.get('repetitions') or 1,
            grid_resolution=params.get('grid_resolution', 100),
            seed=seed,
            out=params.get('out') or 'results',
            fixed_params=load_fixed_params(params.get('params')),
        )

    def load(self):
        return load_csv(self.dataset, self.schema, impute=self.impute)

    def split_for(self, repetition):
        return SplitSpec(self.split.train_fraction, self.split.dl_fraction, self.seed + repetition)


def load_fixed_params(value):
    """A params document given inline (dict) or as the path of a JSON file."""
    if value is None:
        return None
    if isinstance(value, str):
        try:
            with open(os.path.expanduser(value), encoding='utf-8') as handle:
                value = json.load(handle)
        except OSError as e:
            raise DataFileError("cannot read params %s: %s" % (value, e), path=value)
        except ValueError as e:
            raise ParameterError("params file is not valid JSON: %s" % e, option='params')
    if not isinstance(value, dict):
        raise ParameterError("params must be a JSON object", option='params')
    return value


def resolve_fixed_params(document, methods):
    """
    Params per method from a fixed params document. Accepts the output of the
    tune subcommand ({"methods": {"weighted-frobenius": {...}}}) or a single
    {"epsilon", "alpha"[, "norm"]} object applied to every method (only the
    methods of that norm when norm is given).
    """
    if 'methods' in document:
        out = {}
        for method in methods:
            entry = document['methods'].get(method_key(method))
            if entry is None:
                raise ParameterError("params document has no entry for %s" % method_key(method), option='params')
            out[method] = CobraParams.from_dict(dict(entry, norm=method.norm.value), variant=method.variant)
        return out
    if 'epsilon' not in document or 'alpha' not in document:
        raise ParameterError("params need epsilon and alpha", option='params')
    if document.get('norm'):
        norm = norm_kind(document['norm'])
        methods = [m for m in methods if m.norm is norm]
        if not methods:
            raise ParameterError("params are for the %s norm, which the experiment does not use" % norm.value, option='params')
    return dict((m, CobraParams.from_dict(dict(document, norm=m.norm.value), variant=m.variant)) for m in methods)


def tune_methods(dataset, config, workers=1):
    """
    Tunes every variant over every norm of the experiment.

    Returns:
        tuple: (dict Method -> CobraParams, dict Variant -> TuneResult)
    """
    results = cv_tune_variants(dataset, config.tune, config.variants, workers=workers)
    params = {}
    for method in config.methods:
        params[method] = results[method.variant].best_for(method.norm)
    return params, results


def tune_document(results, config, dataset):
    """JSON document of tuned params; evaluate and curves accept it as --params."""
    methods = {}
    best = {}
    for variant, result in results.items():
        best[variant.value] = result.to_summary()
        for norm in config.norms:
            params = result.best_for(norm)
            rows = result.cv_scores
            score = rows[(rows['norm'] == norm.value) & (rows['epsilon'] == params.epsilon)
                         & (rows['alpha'] == params.alpha)]['mean_ibs'].iloc[0]
            methods[method_key(Method(variant, norm))] = dict(params.to_dict(), mean_ibs=float(score))
    return {
        'dataset': os.path.basename(config.dataset),
        'n': dataset.n,
        'scheme': config.tune.scheme.value,
        'seed': config.seed,
        'methods': methods,
        'best': best,
    }


def run_repetition(dataset, config, repetition, params_by_method, keep_pool=False, tune_per_repetition=False):
    """
    One reseeded train/test evaluation of every method and every machine.

    Returns:
        dict: rows for repetitions.csv and machines.csv, the Brier curves and
        optionally the fitted pool
    """
    seed = config.seed + repetition
    parts = split(dataset, config.split_for(repetition))
    if tune_per_repetition:
        tune = TuneConfig(config.tune.k_folds, config.tune.epsilon_grid_size, config.tune.variant, config.norms,
                          seed, Scheme.TRAIN_ONLY, config.tune.dl_fraction, config.grid_resolution, config.options)
        params_by_method, _ = tune_methods(parts.train, _with_tune(config, tune))

    grid = make_time_grid(parts.train, config.grid_resolution)
    pool = build_machine_pool(parts.d_k, seed)
    first = next(iter(params_by_method.values()))
    model = fit_cobra(parts.d_k, parts.d_l, grid, first, config.options, seed=seed, pool=pool)
    subjects = parts.test.subjects()
    g_hat = censoring_survival(*subjects)

    method_rows, curves = [], {}
    for method, params in params_by_method.items():
        predicted, diag = model.with_params(params).predict(parts.test.X, on_exhausted='baseline')
        ibs = integrated_brier_score(predicted, subjects, g_hat, grid)
        method_rows.append({'repetition': repetition, 'seed': seed, 'method': method_key(method),
                            'variant': method.variant.value, 'norm': method.norm.value,
                            'epsilon': params.epsilon, 'alpha': params.alpha, 'ibs': ibs,
                            'widened': diag['widened'], 'exhausted': diag['exhausted']})
        curves[method_key(method)] = brier_curve(predicted, subjects, g_hat, grid)

    machine_ibs = per_machine_ibs(pool.predict(parts.test.X, grid), subjects, g_hat, grid)
    machine_rows = [{'repetition': repetition, 'machine': m, 'max_depth': tree.config.max_depth,
                     'min_leaf_size': tree.config.min_leaf_size, 'ibs': float(v)}
                    for m, (tree, v) in enumerate(zip(pool, machine_ibs))]
    log.debug("repetition %d: %s", repetition, ", ".join("%s=%.4f" % (r['method'], r['ibs']) for r in method_rows))
    return {
        'methods': method_rows,
        'machines': machine_rows,
        'grid': grid.times,
        'brier': curves,
        'pool': pool if keep_pool else None,
        'params': params_by_method,
    }


def _with_tune(config, tune):
    return ExperimentConfig(config.dataset, config.schema, config.impute, config.split, tune, config.variants,
                            config.norms, config.options, config.repetitions, config.grid_resolution, config.seed,
                            config.out, config.fixed_params)


def summarize(method_rows, machine_rows, methods):
    """Mean and sd per method and per machine across repetitions."""
    summary = []
    for method in methods:
        values = [r['ibs'] for r in method_rows if r['method'] == method_key(method)]
        summary.append({'method': method_key(method), 'variant': method.variant.value, 'norm': method.norm.value,
                        'mean_ibs': float(np.mean(values)), 'sd_ibs': spread(values), 'repetitions': len(values)})
    machines = []
    for m in sorted(set(r['machine'] for r in machine_rows)):
        values = [r['ibs'] for r in machine_rows if r['machine'] == m]
        machines.append({'machine': m, 'mean_ibs': float(np.mean(values)), 'sd_ibs': spread(values)})
    return summary, machines


def check_claims(summary, machines):
    """
    Compares the method means with each other and with the machines.

    Returns:
        tuple: (list of check dicts, list of names of failed checks)
    """
    means = dict((row['method'], row['mean_ibs']) for row in summary)
    machine_means = [row['mean_ibs'] for row in machines]
    checks = []

    for variant in VARIANT_ORDER:
        keys = [method_key(Method(variant, n)) for n in NORM_ORDER]
        if all(k in means for k in keys):
            gap = abs(means[keys[0]] - means[keys[1]])
            checks.append({'name': 'norm_equivalence:%s' % variant.value, 'value': gap, 'passed': gap <= NORM_GAP})

    if machine_means:
        average, best = float(np.mean(machine_means)), float(np.min(machine_means))
        for norm in NORM_ORDER:
            key = method_key(Method(Variant.WEIGHTED, norm))
            if key not in means:
                continue
            checks.append({'name': 'below_machine_average:%s' % key, 'value': means[key] - average,
                           'passed': means[key] <= average})
            checks.append({'name': 'near_best_machine:%s' % key, 'value': means[key] - best,
                           'passed': means[key] <= best + MACHINE_MARGIN})
            checks.append({'name': 'below_all_machines:%s' % key, 'value': means[key] - best,
                           'passed': means[key] < best})

    for norm in NORM_ORDER:
        weighted = method_key(Method(Variant.WEIGHTED, norm))
        straight = method_key(Method(Variant.STRAIGHT, norm))
        if weighted in means and straight in means:
            checks.append({'name': 'weighted_vs_straight:%s' % norm.value, 'value': means[weighted] - means[straight],
                           'passed': means[weighted] <= means[straight] + VARIANT_MARGIN})

    for check in checks:
        check['passed'] = bool(check['passed'])
        check['value'] = float(check['value'])
    return checks, [c['name'] for c in checks if not c['passed']]


def evaluate(dataset, config, params_by_method=None, workers=1):
    """
    Repeated evaluation of every method of the experiment.

    Parameters:
        params_by_method: dict Method -> CobraParams; when None the params are
            fixed (config.fixed_params) or tuned according to the scheme

    Returns:
        dict: report with per-repetition rows, summaries, claim checks and the
        first repetition's pool and Brier curves
    """
    tuned = None
    per_repetition = False
    if params_by_method is None:
        if config.fixed_params is not None:
            params_by_method = resolve_fixed_params(config.fixed_params, config.methods)
        elif config.tune.scheme is Scheme.WHOLE_DATASET:
            params_by_method, tuned = tune_methods(dataset, config, workers=workers)
        else:
            per_repetition = True

    log.info("evaluating %d method(s) over %d repetition(s)", len(config.methods), config.repetitions)
    reps = Parallel(n_jobs=workers)(
        delayed(run_repetition)(dataset, config, r, params_by_method, keep_pool=(r == 0),
                                tune_per_repetition=per_repetition)
        for r in range(config.repetitions))
    if per_repetition:
        params_by_method = reps[0]['params']

    method_rows = [row for rep in reps for row in rep['methods']]
    machine_rows = [row for rep in reps for row in rep['machines']]
    methods = [m for m in config.methods if m in params_by_method]
    summary, machines = summarize(method_rows, machine_rows, methods)
    checks, flags = check_claims(summary, machines)
    for name in flags:
        log.warning("check failed: %s", name)
    return {
        'summary': summary,
        'machines': machines,
        'checks': checks,
        'flags': flags,
        # per-repetition params are in the repetition rows when tuned on each train part
        'params': None if per_repetition else dict((method_key(m), p.to_dict()) for m, p in params_by_method.items()),
        'repetition_rows': method_rows,
        'machine_rows': machine_rows,
        'first': reps[0],
        'tuned': tuned,
    }


def report_document(report, config, dataset):
    """The JSON part of an evaluation report (no timestamps, sorted keys)."""
    return {
        'dataset': os.path.basename(config.dataset),
        'n': dataset.n,
        'd': dataset.d,
        'events': dataset.n_events,
        'seed': config.seed,
        'repetitions': config.repetitions,
        'scheme': config.tune.scheme.value,
        'weights': config.options.weights,
        'straight_estimator': config.options.straight_estimator,
        'params': report['params'],
        'methods': report['summary'],
        'machines': report['machines'],
        'checks': report['checks'],
        'flags': report['flags'],
    }


def brier_rows(first):
    keys = sorted(first['brier'])
    rows = []
    for i, t in enumerate(first['grid']):
        row = {'time': float(t)}
        row.update((k, float(first['brier'][k][i])) for k in keys)
        rows.append(row)
    return rows, ['time'] + keys


def predict_curves(dataset, config, X, params_by_method, output='survival'):
    """
    Curves of every method for the query rows, fitted on the split of the
    master seed.

    Returns:
        tuple: (grid times, dict method key -> n x T matrix, dict method key -> diagnostics, the split)
    """
    if output not in ('survival', 'cumhaz'):
        raise ParameterError("output must be survival or cumhaz, got %s" % output, option='output')
    parts = split(dataset, config.split_for(0))
    grid = make_time_grid(parts.train, config.grid_resolution)
    pool = build_machine_pool(parts.d_k, config.seed)
    first = next(iter(params_by_method.values()))
    model = fit_cobra(parts.d_k, parts.d_l, grid, first, config.options, seed=config.seed, pool=pool)
    curves, diagnostics = {}, {}
    for method, params in params_by_method.items():
        matrix, diag = model.with_params(params).predict(X, on_exhausted='baseline')
        curves[method_key(method)] = cumulative_hazard(matrix) if output == 'cumhaz' else matrix
        diagnostics[method_key(method)] = diag
    return grid.times, curves, diagnostics, parts


def curve_rows(times, matrix):
    """CSV rows: first column time, then one column per query subject."""
    columns = ['time'] + ['query_%d' % i for i in range(matrix.shape[0])]
    rows = []
    for j, t in enumerate(times):
        row = {'time': float(t)}
        row.update(('query_%d' % i, float(matrix[i, j])) for i in range(matrix.shape[0]))
        rows.append(row)
    return rows, columns


def table_rows(reports):
    """
    Rows of the reproduction table: one per method, one (mean, sd) pair of
    columns per dataset.

    Parameters:
        reports: ordered list of (dataset name, report document)
    """
    columns = ['method']
    for name, _ in reports:
        columns += ['%s_mean' % name, '%s_sd' % name]
    rows = []
    for variant in VARIANT_ORDER:
        for norm in NORM_ORDER:
            key = method_key(Method(variant, norm))
            row = {'method': method_label(Method(variant, norm))}
            for name, document in reports:
                entry = next((m for m in document['methods'] if m['method'] == key), None)
                row['%s_mean' % name] = entry['mean_ibs'] if entry else None
                row['%s_sd' % name] = entry['sd_ibs'] if entry else None
            rows.append(row)
    return rows, columns


def table_markdown(reports):
    rows, _ = table_rows(reports)
    names = [name for name, _ in reports]
    lines = ['| Method | ' + ' | '.join('%s mean | %s sd' % (n, n) for n in names) + ' |',
             '|---|' + '---:|---:|' * len(names)]
    for row in rows:
        cells = []
        for name in names:
            for suffix in ('mean', 'sd'):
                value = row['%s_%s' % (name, suffix)]
                cells.append('-' if value is None else '%.3f' % value)
        lines.append('| %s | %s |' % (row['method'], ' | '.join(cells)))
    return '\n'.join(lines) + '\n'
