"""
The three convergence studies: number of features, network structure and network size.

Every setting is run over several seeds; the consensus-error curves are summarized per round by
their mean and a 95% Student-t confidence band.
"""

import numpy as np
import pandas as pd
from scipy import stats

from src.datagen import generate, partition
from src.sim.run import run, trace_to_frame
from src.utils_data import RunConfig
from logging_config import get_logger

log = get_logger(__name__)

STUDIES = ('features', 'topology', 'size')
FEATURE_SETTINGS = ((5, 1), (10, 2), (20, 3))
TOPOLOGIES = ('clique', 'star', 'cycle', 'ws:K=12,beta=0.25')
PATH_SIZES = (5, 10, 25, 50)


def study_settings(study, seeds, gamma, T, tol, schedule, n_agents=50, n_per_agent=None,
                   total_n=2000, max_cuts=None, workers=1):
    """
    Yield (setting label, seed, RunConfig, shards) for every run of a study.

    features:
        small-world graph (K = 12, beta = 0.25), N agents, (p, k) in (5, 1), (10, 2), (20, 3) and
        n_i = 10 p k rows per agent.
    topology:
        p = 18, k = 3, N agents on a clique, star, cycle and small-world graph, n_i = 10 p k.
    size:
        one dataset of `total_n` rows with p = 18, k = 3, split evenly over path graphs of 5, 10, 25
        and 50 agents.
    """
    if study not in STUDIES:
        raise KeyError(f'Study {study} not recognized.')
    for seed in seeds:
        if study == 'features':
            for p, k in FEATURE_SETTINGS:
                rows = n_per_agent or 10 * p * k
                cfg = RunConfig(p, k, gamma, n_agents, TOPOLOGIES[-1], T, tol, schedule, seed=seed,
                                n_per_agent=rows, max_cuts=max_cuts, workers=workers)
                data, _ = generate(p, k, cfg.n_rows, seed=seed)
                yield f'p={p}, k={k}', seed, cfg, partition(data, n_agents, seed)
        elif study == 'topology':
            p, k = 18, 3
            rows = n_per_agent or 10 * p * k
            data, _ = generate(p, k, rows * n_agents, seed=seed)
            shards = partition(data, n_agents, seed)
            for topology in TOPOLOGIES:
                cfg = RunConfig(p, k, gamma, n_agents, topology, T, tol, schedule, seed=seed,
                                n_per_agent=rows, max_cuts=max_cuts, workers=workers)
                yield topology.split(':')[0], seed, cfg, shards
        else:
            p, k = 18, 3
            data, _ = generate(p, k, total_n, seed=seed)
            for size in PATH_SIZES:
                cfg = RunConfig(p, k, gamma, size, 'path', T, tol, schedule, seed=seed,
                                total_n=total_n, max_cuts=max_cuts, workers=workers)
                yield f'path N={size}', seed, cfg, partition(data, size, seed)


def confidence_band(curves: np.ndarray, level=0.95):
    """
    Mean and Student-t confidence band over the rows of `curves` (seeds x rounds).
    """
    mean = curves.mean(axis=0)
    if curves.shape[0] < 2:
        return mean, mean.copy(), mean.copy()
    sem = curves.std(axis=0, ddof=1) / np.sqrt(curves.shape[0])
    half = stats.t.ppf(0.5 + level / 2, df=curves.shape[0] - 1) * sem
    return mean, mean - half, mean + half


def summarize(frames_by_setting, T):
    """
    Per-setting, per-round mean and 95% band of the consensus error.

    Runs that stopped early are padded with their last value up to round T.
    """
    rows = []
    for setting, frames in frames_by_setting.items():
        curves = []
        for df in frames:
            values = df['consensus_error'].to_numpy()
            curves.append(np.concatenate([values, np.full(T - len(values), values[-1])]))
        mean, lower, upper = confidence_band(np.array(curves))
        for t in range(T):
            rows.append({'setting': setting, 't': t + 1, 'mean': mean[t], 'lower': lower[t], 'upper': upper[t]})
    return pd.DataFrame(rows, columns=['setting', 't', 'mean', 'lower', 'upper'])


def run_study(study, seeds, gamma, T, tol, schedule, **kwargs):
    """
    Run every setting of a study for every seed.

    Returns
    -------
    frames:
        Dict mapping (setting, seed) to its trace dataframe.
    summary:
        Output of `summarize`.
    """
    frames = {}
    by_setting = {}
    for setting, seed, cfg, shards in study_settings(study, seeds, gamma, T, tol, schedule, **kwargs):
        log.info(f'{study} study | {setting} | seed {seed}')
        trace, _ = run(cfg, shards=shards)
        df = trace_to_frame(trace)
        frames[(setting, seed)] = df
        by_setting.setdefault(setting, []).append(df)
    summary = summarize(by_setting, T)
    return frames, summary


def slug(setting: str) -> str:
    return ''.join(ch if ch.isalnum() else '_' for ch in setting).strip('_')
