from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from datetime import timedelta
import time

import pandas as pd

from src.consensus import init, make_solvers, run_round
from src.datagen import generate, partition
from src.metrics import oracle_gap, support_matches
from src.topology import from_spec
from src.utils import save_txt
from logging_config import get_logger

log = get_logger(__name__)

TRACE_COLUMNS = ['t', 'alpha', 'consensus_error', 'dual_value', 'mean_local_error', 'wall_ms']


def run(cfg,
        shards=None,
        truth=None,
        w_hat=None,
        result_filepath=None,
        access_log=None):
    """
    Run the distributed dual ascent until T rounds or consensus error <= tol.

    Process:
        - Data
            - If no shards are given, a dataset of cfg.n_rows rows is generated from cfg.seed and
              split evenly over the agents.
        - Rounds
            - Each round computes the agents' dual vectors, solves all local problems exactly,
              then updates the multipliers with the schedule's step size.
            - Progress is logged every 10 rounds; with result_filepath, a summary is appended there.
        - Stopping
            - After round t the run stops if the consensus error is at most cfg.tol.

    Parameters
    ----------
    cfg:
        RunConfig of the run.
    shards:
        Optional ShardedDataset, one shard per agent.
    truth:
        Optional GroundTruth; the summary then reports whether the agents recovered its support.
    w_hat:
        Optional centralized solution; each record then carries the mean distance of the agents to it.
    access_log:
        Optional list receiving (reader, owner) pairs for every neighbor read.

    Returns
    -------
    trace:
        List of IterationRecord, one per round.
    states:
        Final AgentState of every agent.
    """
    if shards is None:
        data, truth = generate(cfg.p, cfg.k, cfg.n_rows, cfg.sigma, cfg.rho, cfg.seed)
        shards = partition(data, cfg.n_agents, cfg.seed)
    topo = from_spec(cfg.topology, cfg.n_agents, cfg.seed)
    states = init(shards, topo, cfg.p)
    solvers = make_solvers(shards, cfg.gamma, cfg.k, cfg.max_cuts)
    schedule = cfg.schedule.copy()

    log.info(f'Starting run: {cfg.describe()}')
    start_time = time.time()
    trace = []
    executor = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    try:
        for t in range(1, cfg.T + 1):
            states, record = run_round(states, topo, solvers, schedule, t,
                                       executor=executor, access_log=access_log)
            if w_hat is not None:
                record = replace(record, oracle_gap=oracle_gap(states, w_hat))
            trace.append(record)
            if t % 10 == 0 or t == 1:
                log.debug('Round {:05d} | alpha {:.3e} | consensus error {:.3e} | dual value {:.6f}'.format(
                    t, record.alpha, record.consensus_error, record.dual_value))
            if record.consensus_error <= cfg.tol:
                log.info(f'Consensus error {record.consensus_error:.3e} <= {cfg.tol:g} after {t} rounds.')
                break
    finally:
        if executor is not None:
            executor.shutdown()

    elapsed = time.time() - start_time
    sentence = 'Run finished after {} rounds in {} | consensus error {:.3e} | dual value {:.6f}'.format(
        len(trace), timedelta(seconds=elapsed), trace[-1].consensus_error, trace[-1].dual_value)
    if truth is not None:
        sentence += f' | true support recovered by every agent: {support_matches(states, truth.support)}'
    log.info(sentence)
    if result_filepath is not None:
        save_txt(f'{cfg.describe()}\n{sentence}', result_filepath, mode='a')
    return trace, states


def trace_to_frame(trace) -> pd.DataFrame:
    """
    Trace as a dataframe with the CSV columns; oracle_gap is appended only when it was recorded.
    """
    rows = []
    for record in trace:
        row = {'t': record.t,
               'alpha': record.alpha,
               'consensus_error': record.consensus_error,
               'dual_value': record.dual_value,
               'mean_local_error': record.mean_local_error,
               'wall_ms': record.wall_time * 1000.}
        if record.oracle_gap is not None:
            row['oracle_gap'] = record.oracle_gap
        rows.append(row)
    columns = TRACE_COLUMNS + (['oracle_gap'] if trace and trace[0].oracle_gap is not None else [])
    return pd.DataFrame(rows, columns=columns)
