import datetime
from datetime import timedelta
import time

import click
import numpy as np
from skopt import gp_minimize, load
from skopt.callbacks import CheckpointSaver
from skopt.space import Real
from skopt.utils import use_named_args

from src.consensus import StepSchedule
from src.datagen import generate, partition
from src.sim.run import run
from src.utils import get_last_checkpoint, save_txt
from src.utils_data import RunConfig
from logging_config import get_logger, set_verbosity

log = get_logger(__name__)

FLOOR = 1e-12


class TuningProblem:
    """
    Fixed instances the step sizes are tuned on.

    Attributes
    ----------
    p, k :
        Features and sparsity bound of every instance.
    n_agents, topology :
        Network of every instance; rows per agent are 10 p k.
    T :
        Rounds of every run.
    seeds :
        One generated dataset per seed.
    gamma :
        Regularization weight of the pooled problem.
    result_filepath :
        Text file every evaluated combination is appended to.
    """

    def __init__(self, p, k, n_agents, topology, T, seeds, gamma=1., result_filepath='tuning_results.txt'):
        self.p = p
        self.k = k
        self.n_agents = n_agents
        self.topology = topology
        self.T = T
        self.seeds = seeds
        self.gamma = gamma
        self.result_filepath = result_filepath
        self.shards = {}
        for seed in seeds:
            data, _ = generate(p, k, 10 * p * k * n_agents, seed=seed)
            self.shards[seed] = partition(data, n_agents, seed)


def evaluate(problem, a0, kappa):
    """
    Mean over seeds of log10 of the consensus error after problem.T rounds with the adaptive schedule.
    """
    scores = []
    for seed in problem.seeds:
        cfg = RunConfig(problem.p, problem.k, problem.gamma, problem.n_agents, problem.topology, problem.T,
                        FLOOR, StepSchedule('adaptive', a0, kappa), seed=seed)
        trace, _ = run(cfg, shards=problem.shards[seed])
        scores.append(np.log10(max(trace[-1].consensus_error, FLOOR)))
    score = float(np.mean(scores))
    save_txt(f'a0={a0:.6g} kappa={kappa:.6g} mean log10 consensus error {score:.4f}', problem.result_filepath)
    return score


class SearchableHyperparameters:
    """
    Step-size parameters to optimize.

    Attributes
    ----------
    A0 :
        Initial step of the adaptive schedule.
    Kappa :
        Damping factor applied when every agent's local error grew.
    """
    def __init__(self):
        self.a0 = Real(low=1e-3, high=10., prior='log-uniform', name='a0')
        self.kappa = Real(low=0.3, high=0.99, prior='uniform', name='kappa')

        self.dimensions = [self.__getattribute__(attr)
                           for attr in dir(self) if '__' not in attr]
        self.default_parameters = [0.05, 0.8]


searchable_params = SearchableHyperparameters()
tuning_problem = None


@use_named_args(dimensions=searchable_params.dimensions)
def fitness(**params):
    """
    Function used by skopt: the score of evaluate, which is already a quantity to minimize.
    """
    return evaluate(tuning_problem, params['a0'], params['kappa'])


@click.command()
@click.option('--from_beginning', count=True, help='Start a new search instead of resuming the last checkpoint')
@click.option('-v', '--verbose', count=True, help='Verbosity')
@click.option('--p', 'p', default=10, help='Number of features')
@click.option('--k', 'k', default=2, help='Sparsity bound')
@click.option('--agents', default=10, help='Number of agents')
@click.option('--topology', default='ws:K=4,beta=0.25', help='Topology spec of the tuning network')
@click.option('--T', 'T', default=50, help='Rounds of every run')
@click.option('--seeds', default=3, help='Number of seeded datasets')
@click.option('--n_calls', default=30, help='Number of evaluated combinations')
@click.option('--result_file', default='tuning_results.txt', help='Text file the evaluations are appended to')
def main(from_beginning, verbose, p, k, agents, topology, T, seeds, n_calls, result_file):
    """
    Search the adaptive schedule's (a0, kappa) minimizing the consensus error after T rounds.
    """
    set_verbosity(verbose)
    global tuning_problem
    tuning_problem = TuningProblem(p, k, agents, topology, T, list(range(seeds)), result_filepath=result_file)

    checkpoint_saver = CheckpointSaver(
        f'checkpoint{str(datetime.datetime.now())[:-10]}.pkl',
        compress=9
    )
    start_time = time.time()
    if from_beginning:
        search_result = gp_minimize(
            func=fitness,
            dimensions=searchable_params.dimensions,
            n_calls=n_calls,
            acq_func='EI',
            x0=searchable_params.default_parameters,
            callback=[checkpoint_saver],
            random_state=46,
        )
    else:
        res = load(get_last_checkpoint())
        x0 = res.x_iters
        y0 = res.func_vals
        search_result = gp_minimize(
            func=fitness,
            dimensions=searchable_params.dimensions,
            n_calls=n_calls,
            n_initial_points=0,
            acq_func='EI',
            x0=x0,
            y0=y0,
            callback=[checkpoint_saver],
            random_state=46,
        )
    a0, kappa = search_result.x
    sentence = (f'Best schedule adaptive:a0={a0:.4g},kappa={kappa:.4g} | mean log10 consensus error '
                f'{search_result.fun:.4f} | search took {timedelta(seconds=time.time() - start_time)}')
    log.info(sentence)
    save_txt(sentence, result_file)


if __name__ == '__main__':
    main()
