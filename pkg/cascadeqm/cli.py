import logging
import sys

import click
import numpy as np
import pandas as pd
from tabulate import tabulate

from .efficiency import (
    evaluate_spectrum, band_metrics, loss_sweep, loss_sensitivity,
    GRID_POINTS, GRID_HALF_WIDTH
)
from .ensemble import discretize_config, DEFAULT_TRUNCATION
from .io import (
    load_config, load_fixture, fixture_path, export_spectrum,
    export_simulation, export_optimization, spectrum_frame, ConfigError,
    FIXTURES, FORMATS
)
from .optimizer import (
    OptimizationProblem, optimize, parameter_deviation, RESIDUAL_MODES,
    SPECTRAL_SPANS
)
from .simulation import (
    PulseSpec, integrate, frequency_propagate, relative_l2, IntegrationError,
    SCHEMES
)
from .transfer import SingularityError, transfer_function
from .verification import verify_config

log = logging.getLogger(__name__)

DEFAULT_SPINS = 4001
DEFAULT_DT = 0.02
DEFAULT_PULSE_WIDTH = 8.
GAMMA_RANGE = (1e-4, 1e-2)
GAMMA_POINTS = 5
# plateau reports stop this far (in comb spacings) inside the outermost
# spin line center
BAND_MARGIN = 0.05


def config_options(f):
    f = click.option(
        '--fixture', type=click.Choice(list(FIXTURES)),
        help="Use a bundled configuration instead of --config."
    )(f)
    f = click.option(
        '-c', '--config', 'config_path', type=click.Path(dir_okay=False),
        help="YAML/JSON configuration file."
    )(f)
    return f


def _load(config_path, fixture):
    if config_path and fixture:
        raise click.UsageError("give either --config or --fixture, not both")
    if not config_path and not fixture:
        raise click.UsageError("one of --config or --fixture is required")
    try:
        if fixture:
            return load_fixture(fixture)
        return load_config(config_path)
    except ConfigError as e:
        raise click.ClickException(str(e))


def _pick(value, block, key, default):
    # command line beats the config file beats the built-in default
    if value is not None:
        return value
    return block.get(key, default)


@click.group()
@click.option('-v', '--verbose', count=True, help="Repeat for more logging.")
def cli(verbose):
    """Cascaded ring-resonator spin-ensemble quantum memory."""
    logging.basicConfig(
        level=max(logging.DEBUG, logging.WARNING - 10 * verbose),
        format='%(levelname)s %(name)s: %(message)s',
    )


@cli.command()
@config_options
@click.option('--omega-min', type=float, help="Lowest frequency.")
@click.option('--omega-max', type=float, help="Highest frequency.")
@click.option('--points', type=click.IntRange(min=2), default=GRID_POINTS,
              show_default=True)
@click.option('-o', '--out', type=click.Path(dir_okay=False),
              help="Output file; the table goes to stdout if omitted.")
@click.option('--format', 'fmt', type=click.Choice(FORMATS), default='csv',
              show_default=True)
def spectrum(config_path, fixture, omega_min, omega_max, points, out, fmt):
    """Evaluate S(w), the reflected intensity and storage efficiencies."""
    cfg = _load(config_path, fixture).system
    half = GRID_HALF_WIDTH * cfg.comb_spacing
    lo = -half if omega_min is None else omega_min
    hi = half if omega_max is None else omega_max
    if not hi > lo:
        raise click.UsageError("--omega-max must exceed --omega-min")
    grid = np.linspace(lo, hi, points)
    try:
        result = evaluate_spectrum(cfg, grid)
    except SingularityError as e:
        raise click.ClickException(str(e))

    if out is None:
        df = spectrum_frame(result)
        if fmt == 'csv':
            click.echo(df.to_csv(index=False, float_format='%.15g'), nl=False)
        else:
            click.echo(df.to_json(orient='records', double_precision=15))
        return
    export_spectrum(result, out, fmt)
    metrics = band_metrics(result, (lo, hi))
    click.echo(tabulate(
        [
            ['points', points],
            ['min eta0', metrics.min_eta0],
            ['mean eta0', metrics.mean_eta0],
            ['max eta0', metrics.max_eta0],
            ['width eta0 >= 0.99', metrics.bandwidth_at_threshold],
        ],
        tablefmt='plain', floatfmt='.6g'
    ))
    click.echo(f"written to {out}")


def plateau_band(cfg):
    d = cfg.comb_spacing
    edge = max(abs(r.spin_center) for r in cfg.resonators) - BAND_MARGIN * d
    if edge <= 0:
        edge = GRID_HALF_WIDTH * d
    return (-edge, edge)


@cli.command('optimize')
@config_options
@click.option('--restarts', type=click.IntRange(min=1),
              help="Number of starts [default: 1].")
@click.option('--tol', type=float, help="Convergence threshold [default: 1e-8].")
@click.option('--seed', type=int, help="Seed of the random starts [default: 0].")
@click.option('--processes', type=click.IntRange(min=1),
              help="Worker processes for the restarts [default: 1].")
@click.option('--free', type=click.Choice(['full', 'strict']),
              help="Free parameter preset [default: full].")
@click.option('--residual-mode', type=click.Choice(RESIDUAL_MODES))
@click.option('--spectral-span', type=click.Choice(SPECTRAL_SPANS),
              help="Span of the default spectral points [default: half].")
@click.option('--trust-region', type=click.FloatRange(min=0., min_open=True),
              help="Confine every parameter to this relative distance of "
                   "the config.")
@click.option('--random-start', is_flag=True,
              help="Start every restart at random instead of the config.")
@click.option('-o', '--out', type=click.Path(dir_okay=False),
              help="Where to write the optimized configuration.")
def optimize_command(config_path, fixture, restarts, tol, seed, processes,
                     free, residual_mode, spectral_span, trust_region,
                     random_start, out):
    """Tune the cascade so S vanishes at the spectral points."""
    config = _load(config_path, fixture)
    block = config.optimization
    try:
        problem = OptimizationProblem(
            template=config.system,
            free=_pick(free, block, 'free', 'full'),
            enforce_symmetry=block.get('enforce_symmetry', True),
            spectral_points=block.get('spectral_points'),
            center_constraint_weight=block.get('center_constraint_weight'),
            bounds={
                k: tuple(v) for k, v in (block.get('bounds') or {}).items()
            },
            residual_mode=_pick(
                residual_mode, block, 'residual_mode', 'numerator'
            ),
            spectral_span=_pick(spectral_span, block, 'spectral_span', 'half'),
            trust_region=_pick(trust_region, block, 'trust_region', None),
        )
        result = optimize(
            problem,
            seed_config=None if random_start else config.system,
            restarts=_pick(restarts, block, 'restarts', 1),
            tolerance=_pick(tol, block, 'tolerance', 1e-8),
            seed=_pick(seed, block, 'seed', 0),
            processes=_pick(processes, block, 'processes', 1),
        )
    except (ValueError, AssertionError) as e:
        raise click.ClickException(str(e))

    cfg = result.config
    band = plateau_band(cfg)
    metrics = band_metrics(
        evaluate_spectrum(cfg, np.linspace(band[0], band[1], GRID_POINTS)),
        band, threshold=0.999
    )
    click.echo(tabulate(
        [
            [r.index, r.kappa, r.cavity_detuning, r.g_collective,
             r.spin_linewidth]
            for r in cfg.resonators
        ],
        headers=['index', 'kappa', 'detuning', 'G', 'linewidth'],
        floatfmt='.6f'
    ))
    click.echo(tabulate(
        [
            ['objective', f"{result.objective:.6e}"],
            ['converged', result.converged],
            ['restart', result.restart],
            ['|S(0)|^2', f"{abs(transfer_function(cfg, 0.)) ** 2:.3e}"],
            [f'min eta0 over [{band[0]:.3g}, {band[1]:.3g}]',
             f"{metrics.min_eta0:.6f}"],
            ['max eta0', f"{metrics.max_eta0:.6f}"],
        ],
        tablefmt='plain'
    ))
    if not random_start:
        deviation, where = parameter_deviation(cfg, problem.template)
        if where is not None:
            click.echo(
                f"largest change {deviation:.2%}: {where[1]} of resonator "
                f"{where[0]}"
            )
    if out is not None:
        paths = export_optimization(result, out, problem)
        click.echo(f"written to {', '.join(paths)}")


@cli.command()
@config_options
@click.option('--spins-per-ensemble', type=click.IntRange(min=1),
              help=f"Spins per ensemble [default: {DEFAULT_SPINS}].")
@click.option('--truncation', type=float,
              help="Line truncation in linewidths [default: 1000].")
@click.option('--dt', type=float, help=f"Time step [default: {DEFAULT_DT}].")
@click.option('--t-end', type=float,
              help="End time [default: until the cavities ring down].")
@click.option('--scheme', type=click.Choice(SCHEMES))
@click.option('--pulse-width', type=float,
              help=f"Gaussian RMS width [default: {DEFAULT_PULSE_WIDTH}].")
@click.option('--pulse-frequency', type=float,
              help="Pulse carrier offset [default: 0].")
@click.option('-o', '--out', type=click.Path(dir_okay=False),
              help="Where to write the time series.")
@click.option('--format', 'fmt', type=click.Choice(FORMATS), default='csv',
              show_default=True)
def simulate(config_path, fixture, spins_per_ensemble, truncation, dt, t_end,
             scheme, pulse_width, pulse_frequency, out, fmt):
    """Integrate the cascade in the time domain and compare with S(w)."""
    config = _load(config_path, fixture)
    cfg = config.system
    block = config.simulation
    pulse_block = dict(block.get('pulse') or {})
    if pulse_width is not None:
        pulse_block['duration'] = pulse_width
    if pulse_frequency is not None:
        pulse_block['center_frequency'] = pulse_frequency
    pulse_block.setdefault('duration', DEFAULT_PULSE_WIDTH)
    try:
        pulse = PulseSpec(**pulse_block)
        ensembles = discretize_config(
            cfg,
            _pick(spins_per_ensemble, block, 'spins_per_ensemble', DEFAULT_SPINS),
            _pick(truncation, block, 'truncation', DEFAULT_TRUNCATION),
        )
        result = integrate(
            cfg, ensembles, pulse,
            dt=_pick(dt, block, 'dt', DEFAULT_DT),
            t_end=_pick(t_end, block, 't_end', None),
            scheme=_pick(scheme, block, 'scheme', 'etdrk4'),
        )
    except (ValueError, IntegrationError, SingularityError) as e:
        raise click.ClickException(str(e))

    reference = frequency_propagate(cfg, result.input_series, result.time_grid)
    distance = relative_l2(
        result.output_series, reference, result.input_series
    )
    ledger = result.ledger
    click.echo(tabulate(
        [[k, f"{v:.9e}"] for k, v in ledger.as_dict().items()]
        + [
            ['relative imbalance', f"{ledger.relative_imbalance:.3e}"],
            ['output / input', f"{ledger.output / ledger.input:.3e}"
             if ledger.input else 'n/a'],
            ['L2 distance to S(w) / |input|', f"{distance:.3e}"],
        ],
        tablefmt='plain'
    ))
    if out is not None:
        indices = [r.index for r in cfg.resonators]
        paths = export_simulation(result, out, fmt, indices)
        click.echo(f"written to {', '.join(paths)}")


@cli.command()
@config_options
@click.option('--seed', type=int, default=0, show_default=True,
              help="Seed of the random frequency sample.")
def verify(config_path, fixture, seed):
    """Run the invariant suite; exit status 1 if any check fails."""
    config = _load(config_path, fixture)
    absorption = config.reference.get('absorption')
    if absorption:
        absorption = {int(k): float(v) for k, v in absorption.items()}
    try:
        report = verify_config(config.system, absorption, seed=seed)
    except (KeyError, SingularityError) as e:
        raise click.ClickException(str(e))
    click.echo(tabulate(
        report.rows(), headers=['check', 'status', 'value', 'limit', 'detail']
    ))
    if not report.passed:
        click.echo(f"{len(report.failures)} check(s) failed", err=True)
        sys.exit(1)


@cli.command('sweep-loss')
@config_options
@click.option('--gamma-min', type=float, default=GAMMA_RANGE[0],
              show_default=True, help="Smallest gamma / kappa_1.")
@click.option('--gamma-max', type=float, default=GAMMA_RANGE[1],
              show_default=True, help="Largest gamma / kappa_1.")
@click.option('--gamma-points', type=click.IntRange(min=2),
              default=GAMMA_POINTS, show_default=True)
@click.option('--omega', type=float, default=0., show_default=True)
@click.option('-o', '--out', type=click.Path(dir_okay=False))
def sweep_loss(config_path, fixture, gamma_min, gamma_max, gamma_points,
               omega, out):
    """Tabulate the efficiency drop against intrinsic loss and fit xi."""
    cfg = _load(config_path, fixture).system
    if not 0 < gamma_min < gamma_max:
        raise click.UsageError("need 0 < --gamma-min < --gamma-max")
    ratios = np.geomspace(gamma_min, gamma_max, gamma_points)
    try:
        rows = loss_sweep(cfg, ratios, omega)
        xi = loss_sensitivity(cfg, ratios, omega)
    except (ValueError, SingularityError) as e:
        raise click.ClickException(str(e))
    headers = ['gamma/kappa_1', 'eta0', 'eta', 'drop']
    click.echo(tabulate(rows, headers=headers, floatfmt='.6e'))
    click.echo(f"xi = {xi:.4f}")
    if out is not None:
        pd.DataFrame(rows, columns=['ratio', 'eta0', 'eta', 'drop']).to_csv(
            out, index=False, float_format='%.15g'
        )
        click.echo(f"written to {out}")


@cli.command('default-config')
def default_config():
    """Print the bundled published configuration."""
    with open(fixture_path('published'), 'r') as f:
        click.echo(f.read(), nl=False)


def run_subcommand(argv):
    """
    Run one command line and return its exit status instead of exiting:
    0 on success, 1 on a failed check or bad input, 2 on a usage error.
    """
    try:
        cli.main(args=list(argv), prog_name='cascadeqm')
    except SystemExit as e:
        if e.code is None:
            return 0
        return e.code if isinstance(e.code, int) else 1

    return 0


def main():
    sys.exit(run_subcommand(sys.argv[1:]))


if __name__ == '__main__':
    main()
