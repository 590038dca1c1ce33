"""
Command line harness of the distributed L0 regression simulator.

    python main.py gen --p 18 --k 3 --n 2000 --seed 1 --out data/
    python main.py run --data data/ --agents 50 --topology ws:K=12,beta=0.25 --k 3 --out-csv trace.csv
    python main.py solve-local --data data/ --gamma 1 --k 3 --d zero
    python main.py oracle --cases 20
    python main.py plot --csv a.csv,b.csv --logy --out fig.svg
    python main.py sweep --study features --seeds 5 --out-dir results/

Exit codes: 0 success, 1 numerical failure or failed check, 2 usage or validation error.
"""
from datetime import timedelta
import functools
import os
import time

import click
import numpy as np

import src
from src.consensus import StepSchedule
from src.datagen import generate, make_rng, partition
from src.errors import DataFormatError, InvalidParams, SimulatorError
from src.local_qip import AgentSolver, outer_approx
from src.oracle import enumerate_local, random_local_case, solve_centralized, tiny_network
from src.sim.run import run, trace_to_frame
from src.sim.studies import STUDIES, run_study, slug
from src.utils import read_data, write_csv
from src.utils_data import RunConfig, read_dataset, write_dataset
from src.utils_vizualization import plot_bands, plot_traces
from logging_config import get_logger, set_verbosity

log = get_logger(__name__)

DEFAULT_SCHEDULE = 'adaptive:a0=0.05,kappa=0.8'


def handle_errors(func):
    """
    Map package errors to click exits: validation errors exit 2, numerical errors exit 1.
    """

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except SimulatorError as exc:
            message = f'{type(exc).__name__}: {exc}'
            if exc.validation:
                raise click.UsageError(message)
            raise click.ClickException(message)
        except KeyError as exc:
            raise click.UsageError(str(exc).strip("'"))

    return wrapper


def header_lines(ctx):
    """
    Comment lines recording the full invocation and the library version.
    """
    flags = []
    for param in ctx.command.params:
        value = ctx.params.get(param.name)
        if value is None or value is False:
            continue
        flag = max(param.opts, key=len)
        flags.append(flag if value is True else f'{flag} {value}')
    return [f'invocation: main.py {ctx.info_name} {" ".join(flags)}',
            f'version: {src.__version__}']


def parse_vector(spec, p):
    """
    'zero', a comma separated list of p floats, or the path of a one-column CSV.
    """
    if spec.strip().lower() == 'zero':
        return np.zeros(p)
    if spec.endswith('.csv'):
        values = read_data(spec, header=None)
        if values.shape[1] != 1:
            raise DataFormatError(f'{spec} must hold one value per line.')
        vector = values.iloc[:, 0].to_numpy(dtype=float)
    else:
        try:
            vector = np.array([float(item) for item in spec.split(',')])
        except ValueError as exc:
            raise InvalidParams(f'Malformed vector {spec!r}.') from exc
    if len(vector) != p or not np.all(np.isfinite(vector)):
        raise InvalidParams(f'Expected {p} finite values, got {spec!r}.')
    return vector


@click.group()
@click.option('-v', '--verbose', is_flag=True, help='Log every 10 rounds and other debug details.')
def main(verbose):
    set_verbosity(verbose)


@main.command()
@click.option('--p', 'p', type=int, required=True, help='Number of features.')
@click.option('--k', 'k', type=int, required=True, help='Size of the true support.')
@click.option('--n', 'n', type=int, required=True, help='Number of rows.')
@click.option('--sigma', type=float, default=0.1, show_default=True, help='Noise standard deviation.')
@click.option('--rho', type=float, default=0.1, show_default=True, help='Feature correlation decay.')
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--out', type=click.Path(file_okay=False), required=True, help='Output directory.')
@handle_errors
def gen(p, k, n, sigma, rho, seed, out):
    """Generate a synthetic dataset: X.csv, y.csv and meta.json."""
    data, truth = generate(p, k, n, sigma, rho, seed)
    write_dataset(out, data, truth)
    log.info(f'Wrote {n} rows, p={p}, true support {list(truth.support)} to {out}')


@main.command('run')
@click.option('--data', 'data_dir', type=click.Path(exists=True, file_okay=False), required=True)
@click.option('--agents', type=int, required=True, help='Number of agents N.')
@click.option('--topology', default='path', show_default=True,
              help='clique, star, cycle, path or ws:K=<int>,beta=<float>.')
@click.option('--gamma', type=float, default=1., show_default=True,
              help='Regularization weight of the pooled problem (ridge term ||w||^2 / gamma).')
@click.option('--k', 'k', type=int, required=True, help='Sparsity bound.')
@click.option('--T', 'T', type=int, default=100, show_default=True, help='Maximum number of rounds.')
@click.option('--tol', type=float, default=1e-5, show_default=True, help='Stop once the consensus error is below.')
@click.option('--schedule', default=DEFAULT_SCHEDULE, show_default=True,
              help='harmonic:a0=<float> or adaptive:a0=<float>,kappa=<float>.')
@click.option('--seed', type=int, default=0, show_default=True, help='Seed of the row split and graph.')
@click.option('--out-csv', type=click.Path(dir_okay=False), required=True)
@click.option('--out-svg', type=click.Path(dir_okay=False), default=None)
@click.option('--max-cuts', type=int, default=None,
              help='Cut budget of each local solve (default: number of feasible supports).')
@click.option('--workers', type=int, default=1, show_default=True, help='Threads for the local solves.')
@click.option('--with-oracle', is_flag=True, help='Add the distance to the centralized solution to the trace.')
@click.option('--result-file', type=click.Path(dir_okay=False), default=None,
              help='Text file the run summary is appended to.')
@click.pass_context
@handle_errors
def run_command(ctx, data_dir, agents, topology, gamma, k, T, tol, schedule, seed, out_csv, out_svg,
                max_cuts, workers, with_oracle, result_file):
    """Run the distributed dual ascent on a dataset and write its trace."""
    data, truth = read_dataset(data_dir)
    cfg = RunConfig(data.p, k, gamma, agents, topology, T, tol, StepSchedule.parse(schedule),
                    seed=seed, total_n=data.n, max_cuts=max_cuts, workers=workers)
    shards = partition(data, agents, seed)
    w_hat = None
    if with_oracle:
        w_hat, z, s = solve_centralized(data, gamma, k)
        log.info(f'Centralized solution: support {np.flatnonzero(s).tolist()}, objective {z:.6f}')

    trace, _ = run(cfg, shards=shards, truth=truth, w_hat=w_hat, result_filepath=result_file)
    df = trace_to_frame(trace)
    write_csv(df, out_csv, comments=header_lines(ctx))
    log.info(f'Trace of {len(df)} rounds written to {out_csv}')
    if out_svg:
        plot_traces([df], [f'{topology}, N={agents}'], out_svg, title=cfg.describe())


@main.command('solve-local')
@click.option('--data', 'data_dir', type=click.Path(exists=True, file_okay=False), required=True)
@click.option('--gamma', type=float, default=1., show_default=True,
              help="The agent's regularization weight (ridge term ||w||^2 / gamma).")
@click.option('--k', 'k', type=int, required=True)
@click.option('--d', 'd_spec', default='zero', show_default=True,
              help="Dual vector D: 'zero', p comma separated floats or a one-column CSV.")
@click.option('--max-cuts', type=int, default=None, help='Cut budget (default: number of feasible supports).')
@handle_errors
def solve_local(data_dir, gamma, k, d_spec, max_cuts):
    """Solve one local problem exactly by outer approximation and print the solution."""
    data, _ = read_dataset(data_dir)
    d_dual = parse_vector(d_spec, data.p)
    if not 1 <= k <= data.p:
        raise InvalidParams(f'Need 1 <= k <= p, got k={k}, p={data.p}.')
    solution = AgentSolver(data, gamma, k, max_cuts=max_cuts).solve(d_dual)
    click.echo(f'support: {list(solution.support)}')
    click.echo('w: ' + ','.join(f'{v:.17g}' for v in solution.w))
    click.echo(f'objective: {solution.objective:.17g}')
    click.echo(f'cuts_used: {solution.cuts_used}')
    click.echo(f'master_nodes: {solution.master_nodes}')


def check_local(cases, seed):
    """
    Outer approximation against enumeration on `cases` random local problems.

    Returns the number of disagreements.
    """
    rng = make_rng(seed)
    failures = 0
    for case in range(cases):
        lp, d, k = random_local_case(rng)
        fast = outer_approx(lp, d, k)
        slow = enumerate_local(lp, d, k)
        if (case + 1) % 10 == 0:
            log.debug(f'Local case {case + 1} out of {cases}')
        same_support = fast.support == slow.support
        close = abs(fast.objective - slow.objective) <= 1e-8 * max(1., abs(slow.objective))
        if not (same_support and close):
            failures += 1
            log.warning(f'Local case {case} (p={lp.p}, k={k}, gamma={lp.gamma:g}): outer approximation '
                        f'{list(fast.support)} {fast.objective:.12g} vs enumeration '
                        f'{list(slow.support)} {slow.objective:.12g}')
    click.echo(f'local: {cases - failures}/{cases} cases agree')
    return failures


def check_network(instances, seed, rounds, alpha0, perturb_gamma, gamma=1.):
    """
    Distributed runs on tiny 3-agent path networks against the centralized oracle.

    A run agrees when its dual values never exceed the oracle objective, its last dual value is
    within 1e-3 of it, every agent ends on the oracle support and the mean regressor is within
    1e-2 of the oracle regressor. `perturb_gamma` scales the gamma of the run, not of the oracle.
    """
    failures = 0
    for instance in range(instances):
        shards, _ = tiny_network(seed + instance)
        k = 2
        w_hat, z, s_hat = solve_centralized(shards.pooled(), gamma, k)
        cfg = RunConfig(shards.p, k, gamma * perturb_gamma, len(shards), 'path', rounds, 1e-12,
                        StepSchedule('harmonic', alpha0), seed=seed + instance)
        trace, states = run(cfg, shards=shards)
        slack = 1e-3 * (1. + abs(z))
        upper_ok = all(record.dual_value <= z + 1e-8 * (1. + abs(z)) for record in trace)
        final_ok = trace[-1].dual_value >= z - slack
        support_ok = all(tuple(np.flatnonzero(state.s)) == tuple(np.flatnonzero(s_hat)) for state in states)
        w_bar = np.mean([state.w for state in states], axis=0)
        w_ok = np.linalg.norm(w_bar - w_hat) <= 1e-2
        if not (upper_ok and final_ok and support_ok and w_ok):
            failures += 1
            log.warning(f'Network instance {instance}: dual bounded {upper_ok}, final dual '
                        f'{trace[-1].dual_value:.9g} vs oracle {z:.9g}, supports agree {support_ok}, '
                        f'regressor distance {np.linalg.norm(w_bar - w_hat):.3e}')
    click.echo(f'network: {instances - failures}/{instances} instances agree')
    return failures


@main.command()
@click.option('--cases', type=int, default=20, show_default=True, help='Random local problems to check.')
@click.option('--instances', type=int, default=2, show_default=True, help='Tiny networks to check.')
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--rounds', type=int, default=5000, show_default=True, help='Rounds of every network run.')
@click.option('--alpha0', type=float, default=20., show_default=True, help='Harmonic step a0 of the network runs.')
@click.option('--perturb-gamma', type=float, default=1., show_default=True,
              help='Factor applied to gamma in the network runs only; anything but 1 must fail.')
@handle_errors
def oracle(cases, instances, seed, rounds, alpha0, perturb_gamma):
    """Certify the solvers against brute-force enumeration."""
    if cases < 1:
        raise InvalidParams(f'Need at least one case, got {cases}.')
    if instances < 0 or rounds < 1:
        raise InvalidParams('instances must be non-negative and rounds positive.')
    start_time = time.time()
    failures = check_local(cases, seed)
    if instances:
        failures += check_network(instances, seed, rounds, alpha0, perturb_gamma)
    log.info(f'Oracle checks finished in {timedelta(seconds=time.time() - start_time)}')
    if failures:
        raise click.ClickException(f'{failures} check(s) disagree with the oracle.')
    click.echo('all checks agree')


@main.command()
@click.option('--csv', 'csv_paths', required=True, help='Comma separated trace CSV files.')
@click.option('--y', 'y', default='consensus_error', show_default=True, help='Column plotted against t.')
@click.option('--logy', is_flag=True, help='Logarithmic y axis.')
@click.option('--out', type=click.Path(dir_okay=False), required=True)
@handle_errors
def plot(csv_paths, y, logy, out):
    """Plot one polyline per trace CSV."""
    paths = [path for path in csv_paths.split(',') if path]
    frames, labels = [], []
    for path in paths:
        df = read_data(path)
        if df.empty:
            raise DataFormatError(f'{path} holds no rounds.')
        if 't' not in df.columns or y not in df.columns:
            raise DataFormatError(f'{path} has no column t or {y}.')
        frames.append(df)
        labels.append(os.path.splitext(os.path.basename(path))[0])
    if not frames:
        raise InvalidParams('No CSV given.')
    plot_traces(frames, labels, out, y=y, logy=logy)
    log.info(f'Plot of {len(frames)} trace(s) written to {out}')


@main.command()
@click.option('--study', type=click.Choice(STUDIES), required=True)
@click.option('--seeds', type=int, default=5, show_default=True, help='Seeds 0..seeds-1 per setting.')
@click.option('--gamma', type=float, default=1., show_default=True)
@click.option('--T', 'T', type=int, default=100, show_default=True)
@click.option('--tol', type=float, default=1e-5, show_default=True)
@click.option('--schedule', default=DEFAULT_SCHEDULE, show_default=True)
@click.option('--agents', type=int, default=50, show_default=True,
              help='Agents of the features and topology studies.')
@click.option('--n-per-agent', type=int, default=None, help='Rows per agent; 10 p k when unset.')
@click.option('--total-n', type=int, default=2000, show_default=True, help='Rows of the size study.')
@click.option('--workers', type=int, default=1, show_default=True)
@click.option('--out-dir', type=click.Path(file_okay=False), required=True)
@click.pass_context
@handle_errors
def sweep(ctx, study, seeds, gamma, T, tol, schedule, agents, n_per_agent, total_n, workers, out_dir):
    """Run a convergence study over several seeds and plot its confidence bands."""
    if seeds < 1:
        raise InvalidParams(f'Need at least one seed, got {seeds}.')
    frames, summary = run_study(study, range(seeds), gamma, T, tol, StepSchedule.parse(schedule),
                                n_agents=agents, n_per_agent=n_per_agent, total_n=total_n, workers=workers)
    comments = header_lines(ctx)
    for (setting, seed), df in frames.items():
        write_csv(df, os.path.join(out_dir, f'{study}_{slug(setting)}_seed{seed}.csv'), comments=comments)
    write_csv(summary, os.path.join(out_dir, f'{study}_summary.csv'), comments=comments)
    plot_bands(summary, os.path.join(out_dir, f'{study}.svg'), title=f'{study} study, {seeds} seeds')
    log.info(f'{len(frames)} traces and the {study} summary written to {out_dir}')


if __name__ == '__main__':
    main()
