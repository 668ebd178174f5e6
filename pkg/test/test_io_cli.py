import io
import json
import os

import numpy as np
import pandas as pd
import pytest
import yaml
from click.testing import CliRunner

from cascadeqm.cli import cli, run_subcommand
from cascadeqm.efficiency import evaluate_spectrum
from cascadeqm.ensemble import discretize_config
from cascadeqm.io import (
    load_config, load_fixture, parse_config, save_config, export_spectrum,
    export_simulation, ConfigError, SPECTRUM_COLUMNS
)
from cascadeqm.simulation import PulseSpec, integrate
from cascadeqm.system import (
    ResonatorSpec, SystemConfig, published_config, all_pass_config
)

SINGLE_CAVITY = """\
symmetric: false
resonators:
  - index: 1
    kappa: 1.0
    cavity_detuning: 0.0
    g_collective: 1.0
    spin_linewidth: 1.0
    spin_center: 0.0
optimization:
  enforce_symmetry: false
  spectral_points: [0.0]
simulation:
  pulse:
    duration: 3.0
  truncation: 10.0
"""


def write(tmp_path, text, name='config.yaml'):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_load_fixtures():
    config = load_fixture('published')
    assert config.system == published_config()
    assert config.reference['absorption'] == {1: 1.76, 2: 1.23}
    assert config.simulation['pulse']['duration'] == 8.
    assert load_fixture('all-pass').system == all_pass_config()
    with pytest.raises(ConfigError):
        load_fixture('nope')


def test_unknown_key_reports_line():
    text = (
        "comb_spacing: 1.0\n"
        "resonators:\n"
        "  - index: 1\n"
        "    kappa: 2.0\n"
        "    cavity_detuning: 0.0\n"
        "    kapa: 1.0\n"
    )
    with pytest.raises(ConfigError) as e:
        parse_config(text)
    assert 'resonators.0.kapa' in str(e.value)
    assert 'line 6' in str(e.value)


def test_bad_values():
    base = "resonators:\n  - index: 1\n    cavity_detuning: 0.0\n"
    with pytest.raises(ConfigError) as e:
        parse_config(base + "    kappa: -1.0\n")
    assert 'kappa' in str(e.value) and 'line 4' in str(e.value)
    with pytest.raises(ConfigError) as e:
        parse_config(base + "    kappa: fast\n")
    assert 'must be a number' in str(e.value)
    with pytest.raises(ConfigError) as e:
        parse_config(base)
    assert 'kappa' in str(e.value)
    with pytest.raises(ConfigError):
        parse_config("comb_spacing: 1.0\n")
    with pytest.raises(ConfigError):
        parse_config("resonators: [1, 2\n")
    with pytest.raises(ConfigError):
        load_config('/nonexistent/config.yaml')


def test_save_load_round_trip(tmp_path):
    cfg = published_config(gamma=0.01)
    path = str(tmp_path / 'lossy.yaml')
    save_config(cfg, path, simulation=dict(dt=0.01, t_end=np.float64(50.)))
    loaded = load_config(path)
    assert loaded.system == cfg
    assert loaded.simulation == dict(dt=0.01, t_end=50.)

    lopsided = SystemConfig(resonators=(
        ResonatorSpec(index=2, kappa=1.5, cavity_detuning=0.2, position=3.),
        ResonatorSpec(index=-1, kappa=2., cavity_detuning=-0.1),
    ))
    save_config(lopsided, path)
    assert load_config(path).system == lopsided


def test_export_spectrum(tmp_path):
    spectrum = evaluate_spectrum(published_config(gamma=1e-3))
    a = export_spectrum(spectrum, str(tmp_path / 'a.csv'))
    b = export_spectrum(spectrum, str(tmp_path / 'b.csv'))
    with open(a, 'rb') as f:
        first = f.read()
    with open(b, 'rb') as f:
        assert f.read() == first
    lines = first.decode().splitlines()
    assert lines[0] == ','.join(SPECTRUM_COLUMNS)
    assert len(lines) == len(spectrum.omega_grid) + 1

    # 15 significant digits survive an exact parse
    df = pd.read_csv(a, float_precision='round_trip')
    assert np.allclose(df['eta0'], spectrum.eta0, rtol=1e-12, atol=0)
    assert np.allclose(
        df['re_S'] + 1j * df['im_S'], spectrum.transfer.values,
        rtol=1e-12, atol=1e-300
    )

    path = export_spectrum(spectrum, str(tmp_path / 'c.json'), 'json')
    with open(path) as f:
        records = json.load(f)
    assert len(records) == len(spectrum.omega_grid)
    assert list(records[0]) == SPECTRUM_COLUMNS
    with pytest.raises(ValueError):
        export_spectrum(spectrum, str(tmp_path / 'd.txt'), 'txt')


def test_export_simulation(tmp_path):
    cfg = parse_config(SINGLE_CAVITY).system
    ensembles = discretize_config(cfg, 11, truncation_width=10.)
    result = integrate(cfg, ensembles, PulseSpec(duration=3.), 0.02, t_end=40.)
    paths = export_simulation(result, str(tmp_path / 'run.csv'), indices=[1])
    assert paths[1] == str(tmp_path / 'run.ledger.yaml')
    df = pd.read_csv(paths[0])
    assert list(df.columns) == [
        't', 're_in', 'im_in', 're_out', 'im_out', 're_b1', 'im_b1'
    ]
    assert len(df) == len(result.time_grid)
    with open(paths[1]) as f:
        report = yaml.safe_load(f)
    assert report['scheme'] == 'etdrk4'
    assert report['ledger']['input'] == pytest.approx(result.ledger.input)


def test_cli_verify():
    runner = CliRunner()
    result = runner.invoke(cli, ['verify', '--fixture', 'published'])
    assert result.exit_code == 0, result.output
    assert 'center reflection' in result.output
    assert 'absorption' in result.output

    result = runner.invoke(cli, ['verify', '--fixture', 'all-pass'])
    assert result.exit_code == 1


def test_cli_config_choice(tmp_path):
    runner = CliRunner()
    path = write(tmp_path, SINGLE_CAVITY)
    result = runner.invoke(
        cli, ['verify', '--fixture', 'published', '--config', path]
    )
    assert result.exit_code == 2
    assert runner.invoke(cli, ['verify']).exit_code == 2

    broken = write(tmp_path, "resonators:\n  - index: 1\n    kapa: 1\n", 'bad.yaml')
    result = runner.invoke(cli, ['spectrum', '--config', broken])
    assert result.exit_code == 1
    assert 'kapa' in result.output


def test_cli_spectrum(tmp_path):
    runner = CliRunner()
    result = runner.invoke(
        cli, ['spectrum', '--fixture', 'all-pass', '--points', '41']
    )
    assert result.exit_code == 0, result.output
    df = pd.read_csv(io.StringIO(result.output))
    assert list(df.columns) == SPECTRUM_COLUMNS
    assert len(df) == 41
    assert np.all(np.abs(df['eta0']) <= 1e-12)

    out = str(tmp_path / 'published.json')
    result = runner.invoke(
        cli, ['spectrum', '--fixture', 'published', '-o', out, '--format', 'json']
    )
    assert result.exit_code == 0, result.output
    assert os.path.exists(out)
    assert 'min eta0' in result.output

    result = runner.invoke(
        cli, ['spectrum', '--fixture', 'published', '--omega-min', '1',
              '--omega-max', '0']
    )
    assert result.exit_code == 2


def test_cli_default_config():
    result = CliRunner().invoke(cli, ['default-config'])
    assert result.exit_code == 0
    assert parse_config(result.output).system == published_config()


def test_cli_sweep_loss(tmp_path):
    out = str(tmp_path / 'sweep.csv')
    result = CliRunner().invoke(
        cli, ['sweep-loss', '--fixture', 'published', '-o', out]
    )
    assert result.exit_code == 0, result.output
    assert 'xi =' in result.output
    df = pd.read_csv(out)
    assert list(df.columns) == ['ratio', 'eta0', 'eta', 'drop']
    assert len(df) == 5


def test_cli_optimize(tmp_path):
    path = write(tmp_path, SINGLE_CAVITY)
    out = str(tmp_path / 'optimized.yaml')
    result = CliRunner().invoke(
        cli, ['optimize', '--config', path, '--free', 'strict', '-o', out]
    )
    assert result.exit_code == 0, result.output
    assert 'objective' in result.output
    optimized = load_config(out)
    assert optimized.optimization['enforce_symmetry'] is False
    assert os.path.exists(str(tmp_path / 'optimized.report.yaml'))

    result = CliRunner().invoke(
        cli, ['optimize', '--config', path, '--trust-region', '0.05',
              '--spectral-span', 'edge', '-o', out]
    )
    assert result.exit_code == 0, result.output
    assert 'largest change' in result.output
    kappa = load_config(out).system.resonators[0].kappa
    assert 0.95 - 1e-12 <= kappa <= 1.05 + 1e-12


def test_cli_simulate(tmp_path):
    path = write(tmp_path, SINGLE_CAVITY)
    out = str(tmp_path / 'run.csv')
    result = CliRunner().invoke(
        cli, ['simulate', '--config', path, '--spins-per-ensemble', '11',
              '--t-end', '40', '-o', out]
    )
    assert result.exit_code == 0, result.output
    assert 'relative imbalance' in result.output
    assert os.path.exists(out)
    assert os.path.exists(str(tmp_path / 'run.ledger.yaml'))

    result = CliRunner().invoke(
        cli, ['simulate', '--config', path, '--spins-per-ensemble', '11',
              '--t-end', '40', '--dt', '1.0']
    )
    assert result.exit_code == 1


def test_run_subcommand_exit_status():
    assert run_subcommand(['verify', '--fixture', 'published']) == 0
    assert run_subcommand(['verify', '--fixture', 'all-pass']) == 1
    assert run_subcommand(['verify']) == 2
    assert run_subcommand(['no-such-command']) == 2
