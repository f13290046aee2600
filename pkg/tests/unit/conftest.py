# -*- coding: utf-8 -*-

# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import json
import os

import numpy as np
import pandas as pd
import pytest

from survcobra.module_utils.dataset import SurvivalDataset, TimeGrid


def make_dataset(n=120, d=3, seed=0, censoring=0.3):
    """Synthetic survival data whose hazard grows with the first covariate."""
    rng = np.random.RandomState(seed)
    X = rng.uniform(0.0, 1.0, size=(n, d))
    event_time = rng.exponential(1.0 / (0.5 + 2.0 * X[:, 0]))
    censor_time = rng.exponential(1.0 / censoring * np.mean(event_time), size=n)
    time = np.round(np.minimum(event_time, censor_time), 4) + 0.001
    event = event_time <= censor_time
    return SurvivalDataset(X, time, event, tuple('x%d' % j for j in range(d)))


def write_frame(path, dataset, extra=None):
    columns = dict(('x%d' % j, dataset.X[:, j]) for j in range(dataset.d))
    columns.update(extra or {})
    columns['time'] = dataset.time
    columns['event'] = dataset.event.astype(int)
    pd.DataFrame(columns).to_csv(path, index=False)
    return str(path)


@pytest.fixture
def dataset():
    return make_dataset()


@pytest.fixture
def large_dataset():
    return make_dataset(n=200, seed=3)


@pytest.fixture
def unit_grid():
    return TimeGrid(np.linspace(0.0, 1.0, 11))


@pytest.fixture
def dataset_csv(tmp_path):
    data = make_dataset(n=150, seed=5)
    levels = np.array(['a', 'b', 'c'])[np.arange(data.n) % 3]
    return write_frame(tmp_path / 'toy.csv', data, extra={'group': levels})


@pytest.fixture
def experiment_config(tmp_path, dataset_csv):
    """A small, fast experiment config document."""
    document = {
        'dataset': os.path.basename(dataset_csv),
        'schema': {'time_column': 'time', 'event_column': 'event', 'categorical_columns': ['group']},
        'grid_resolution': 20,
        'k_folds': 2,
        'epsilon_grid_size': 3,
        'repetitions': 2,
        'seed': 7,
    }
    path = tmp_path / 'toy.json'
    path.write_text(json.dumps(document))
    return str(path)


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for name in list(os.environ):
        if name.startswith('SURVCOBRA_'):
            monkeypatch.delenv(name)
