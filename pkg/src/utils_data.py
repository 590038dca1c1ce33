import os

import numpy as np
import pandas as pd

from src.datagen import Dataset, GroundTruth
from src.errors import DataFormatError, InvalidParams, SimulatorError
from src.utils import read_data, write_csv, write_json


class DataPaths:
    """
    File layout of a dataset directory.
    """

    def __init__(self, folder):
        self.folder = folder
        self.x_path = os.path.join(folder, 'X.csv')
        self.y_path = os.path.join(folder, 'y.csv')
        self.meta_path = os.path.join(folder, 'meta.json')


class RunConfig:
    def __init__(self, p, k, gamma, n_agents, topology, T, tol, schedule,
                 seed=0, n_per_agent=None, total_n=None, sigma=0.1, rho=0.1,
                 max_cuts=None, workers=1):
        """
        All parameters of one simulator run.

        Attributes
        ----------
        p, k :
            Number of features and sparsity bound.
        gamma :
            Regularization weight of the pooled problem, ridge term ||w||^2 / gamma. Each agent
            uses gamma * n_agents.
        n_agents :
            Number of agents N.
        topology :
            Topology spec string: clique, star, cycle, path or ws:K=<int>,beta=<float>.
        T :
            Maximum number of rounds.
        tol :
            The run stops once the consensus error is at most tol.
        schedule :
            StepSchedule of the multiplier update.
        seed :
            Seed for data generation, partitioning and graph drawing.
        n_per_agent, total_n :
            Rows per agent or in total, used only when the run generates its own data.
        sigma, rho :
            Noise level and feature correlation of generated data.
        max_cuts :
            Cut budget of every local outer approximation; None for the number of feasible supports.
        workers :
            Threads used for the local solves of a round (1 = serial).
        """
        if p < 1 or k < 1 or n_agents < 1 or T < 1 or workers < 1:
            raise InvalidParams('p, k, n_agents, T and workers must be positive.')
        if k > p:
            raise InvalidParams(f'Need k <= p, got k={k}, p={p}.')
        if max_cuts is not None and max_cuts < 1:
            raise InvalidParams(f'max_cuts must be positive, got {max_cuts}.')
        if not gamma > 0:
            raise InvalidParams(f'gamma must be positive, got {gamma}.')
        if not tol > 0:
            raise InvalidParams(f'tol must be positive, got {tol}.')
        self.p = p
        self.k = k
        self.gamma = gamma
        self.n_agents = n_agents
        self.topology = topology
        self.T = T
        self.tol = tol
        self.schedule = schedule
        self.seed = seed
        self.n_per_agent = n_per_agent
        self.total_n = total_n
        self.sigma = sigma
        self.rho = rho
        self.max_cuts = max_cuts
        self.workers = workers

    @property
    def n_rows(self):
        if self.total_n is not None:
            return self.total_n
        if self.n_per_agent is not None:
            return self.n_per_agent * self.n_agents
        return 10 * self.p * self.k * self.n_agents

    def describe(self):
        return (f'p={self.p} k={self.k} gamma={self.gamma:g} N={self.n_agents} topology={self.topology} '
                f'T={self.T} tol={self.tol:g} schedule={self.schedule} seed={self.seed}')


def write_dataset(folder, data: Dataset, truth: GroundTruth = None):
    """
    Write X.csv, y.csv (no header, 17 significant digits) and meta.json into `folder`.
    """
    paths = DataPaths(folder)
    os.makedirs(folder, exist_ok=True)
    write_csv(pd.DataFrame(data.x), paths.x_path, header=False)
    write_csv(pd.DataFrame(data.y), paths.y_path, header=False)
    meta = {'p': data.p, 'n': data.n}
    if truth is not None:
        meta.update({'k': truth.k,
                     'sigma': truth.sigma,
                     'rho': truth.rho,
                     'seed': truth.seed,
                     'rng_name': truth.rng_name,
                     'w_star': [float(v) for v in truth.w_star],
                     'support': list(truth.support)})
    write_json(meta, paths.meta_path)


def read_dataset(folder):
    """
    Read a dataset directory back. Returns the dataset and its ground truth (None when meta.json
    carries no generation record).
    """
    paths = DataPaths(folder)
    x = read_data(paths.x_path, header=None)
    y = read_data(paths.y_path, header=None)
    meta = read_data(paths.meta_path)
    if y.shape[1] != 1:
        raise DataFormatError(f'{paths.y_path} must hold one value per line.')
    try:
        data = Dataset(x.to_numpy(dtype=float), y.iloc[:, 0].to_numpy(dtype=float))
    except ValueError as exc:
        raise DataFormatError(f'Non-numeric entries in {folder}: {exc}') from exc
    except SimulatorError as exc:
        raise DataFormatError(f'Unusable data in {folder}: {exc}') from exc
    if meta.get('p') != data.p or meta.get('n') != data.n:
        raise DataFormatError(f'meta.json says p={meta.get("p")}, n={meta.get("n")}, '
                              f'files hold p={data.p}, n={data.n}.')
    truth = None
    if 'w_star' in meta:
        truth = GroundTruth(w_star=np.asarray(meta['w_star'], dtype=float),
                            support=tuple(meta['support']),
                            sigma=meta['sigma'],
                            rho=meta['rho'],
                            seed=meta['seed'],
                            rng_name=meta['rng_name'])
    return data, truth
