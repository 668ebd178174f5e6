import dataclasses
import logging
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import yaml

from .system import ResonatorSpec, SystemConfig

log = logging.getLogger(__name__)

DATA_DIR = os.path.join(os.path.dirname(__file__), 'data')
FIXTURES = {
    'published': 'published.yaml',
    'all-pass': 'all_pass.yaml',
}
FORMATS = ['csv', 'json']
FLOAT_FORMAT = '%.15g'
SPECTRUM_COLUMNS = [
    'omega', 're_S', 'im_S', 'reflected_intensity', 'eta0', 'eta_lossy'
]

# None marks a leaf, a dict a mapping with fixed keys, a one-element list a
# sequence of such mappings and ANY a mapping with free keys
ANY = 'any'
RESONATOR_KEYS = {f.name: None for f in dataclasses.fields(ResonatorSpec)}
SCHEMA = {
    'comb_spacing': None,
    'central_frequency': None,
    'propagation_speed': None,
    'symmetric': None,
    'spin_linewidth': None,
    'gamma': None,
    'resonators': [RESONATOR_KEYS],
    'optimization': {
        'free': None,
        'enforce_symmetry': None,
        'bounds': {
            'kappa': None,
            'g_collective': None,
            'linewidth': None,
            'cavity_detuning': None,
        },
        'restarts': None,
        'tolerance': None,
        'spectral_points': None,
        'center_constraint_weight': None,
        'residual_mode': None,
        'spectral_span': None,
        'trust_region': None,
        'seed': None,
        'processes': None,
    },
    'simulation': {
        'pulse': {
            'duration': None,
            'center_frequency': None,
            'amplitude': None,
            'delay': None,
            'shape': None,
        },
        'dt': None,
        't_end': None,
        'spins_per_ensemble': None,
        'truncation': None,
        'scheme': None,
    },
    'reference': {
        'absorption': ANY,
    },
}
SHARED_RESONATOR_KEYS = ['spin_linewidth', 'gamma']


class ConfigError(ValueError):
    """
    A malformed configuration file. The message names the offending key
    and, where known, its 1-based line number.
    """


@dataclass
class ConfigFile:
    system: SystemConfig
    optimization: dict = field(default_factory=dict)
    simulation: dict = field(default_factory=dict)
    reference: dict = field(default_factory=dict)
    path: str = None


def fixture_path(name):
    """
    Path of a bundled configuration, 'published' or 'all-pass'.
    """
    if name not in FIXTURES:
        raise ConfigError(
            f"unknown fixture {name!r}, expected one of {list(FIXTURES)}"
        )
    return os.path.join(DATA_DIR, FIXTURES[name])


def _where(path, line):
    key = '.'.join(str(p) for p in path) or '<root>'
    return f"{key} (line {line})" if line is not None else key


def _validate_node(node, schema, path, lines):
    """
    Walk a composed YAML node against the schema, recording the line of
    every key and rejecting unknown ones.
    """
    line = node.start_mark.line + 1
    lines[tuple(path)] = line
    if schema is None or schema == ANY:
        if schema == ANY and not isinstance(node, yaml.MappingNode):
            raise ConfigError(f"{_where(path, line)}: expected a mapping")
        if isinstance(node, yaml.MappingNode) and schema == ANY:
            for key, value in node.value:
                lines[tuple(path) + (key.value,)] = key.start_mark.line + 1
        return
    if isinstance(schema, list):
        if not isinstance(node, yaml.SequenceNode):
            raise ConfigError(f"{_where(path, line)}: expected a list")
        for i, item in enumerate(node.value):
            _validate_node(item, schema[0], path + [i], lines)
        return
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"{_where(path, line)}: expected a mapping")
    for key, value in node.value:
        name = key.value
        key_line = key.start_mark.line + 1
        if name not in schema:
            raise ConfigError(
                f"unknown key {_where(path + [name], key_line)}; expected "
                f"one of {sorted(schema)}"
            )
        _validate_node(value, schema[name], path + [name], lines)
        lines[tuple(path + [name])] = key_line


def parse_config(text, source='<string>'):
    """
    Parse configuration text into a ConfigFile with strict key checking.

    Parameters
    ----------
        text: string
            YAML (or JSON) document.
        source: string (default: '<string>')
            Name used in error messages.

    Returns
    -------
        config: ConfigFile
    """
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"{source}: not valid YAML: {e}")
    if node is None:
        raise ConfigError(f"{source}: empty configuration")

    lines = {}
    try:
        _validate_node(node, SCHEMA, [], lines)
    except ConfigError as e:
        raise ConfigError(f"{source}: {e}")

    if 'resonators' not in data or not data['resonators']:
        raise ConfigError(f"{source}: missing key resonators")

    shared = {k: data[k] for k in SHARED_RESONATOR_KEYS if k in data}
    resonators = []
    for i, entry in enumerate(data['resonators']):
        path = ('resonators', i)
        for key in ['index', 'kappa', 'cavity_detuning']:
            if key not in entry:
                raise ConfigError(
                    f"{source}: {_where(path, lines.get(path))} is missing "
                    f"key {key}"
                )
        params = dict(shared)
        params.update(entry)
        resonators.append(_build(
            ResonatorSpec, params, source, path, lines
        ))

    system_keys = [
        'comb_spacing', 'central_frequency', 'propagation_speed', 'symmetric'
    ]
    system = _build(
        SystemConfig,
        dict(
            resonators=tuple(resonators),
            **{k: data[k] for k in system_keys if k in data}
        ),
        source, (), lines
    )

    return ConfigFile(
        system=system,
        optimization=data.get('optimization') or {},
        simulation=data.get('simulation') or {},
        reference=data.get('reference') or {},
        path=source,
    )


def _build(cls, params, source, path, lines):
    for key, value in params.items():
        if key in ['resonators', 'spin_center', 'symmetric', 'index']:
            continue
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(
                f"{source}: {_where(path + (key,), lines.get(path + (key,)))} "
                f"must be a number, got {value!r}"
            )
    try:
        return cls(**params)
    except (TypeError, ValueError) as e:
        # name the offending field when the message carries it
        key = next((k for k in params if str(e).startswith(k)), None)
        where = path + (key,) if key else path
        raise ConfigError(f"{source}: {_where(where, lines.get(where))}: {e}")


def load_config(path):
    """
    Load a configuration file.

    Parameters
    ----------
        path: string
            Path to a YAML or JSON file.

    Returns
    -------
        config: ConfigFile
            The cascade plus the optional optimization, simulation and
            reference blocks as plain dicts.
    """
    try:
        with open(path, 'r') as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}")
    log.debug("loading configuration from %s", path)

    return parse_config(text, source=str(path))


def load_fixture(name):
    return load_config(fixture_path(name))


def config_to_dict(cfg):
    """
    Plain-data form of a cascade. A symmetric cascade keeps only its
    positive-index half.
    """
    resonators = cfg.half if cfg.symmetric else cfg.resonators

    return dict(
        comb_spacing=float(cfg.comb_spacing),
        central_frequency=float(cfg.central_frequency),
        propagation_speed=float(cfg.propagation_speed),
        symmetric=bool(cfg.symmetric),
        resonators=[r.as_dict() for r in resonators],
    )


def dump_config(cfg, **blocks):
    data = config_to_dict(cfg)
    for name, block in blocks.items():
        if block:
            data[name] = _plain(block)
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=False)


def save_config(cfg, path, **blocks):
    """
    Write a cascade, plus optional optimization/simulation/reference
    blocks, to a YAML file that load_config reads back unchanged.
    """
    with open(path, 'w') as f:
        f.write(dump_config(cfg, **blocks))
    log.info("configuration written to %s", path)

    return path


def _plain(value):
    # numpy values to builtins so safe_dump accepts them
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, (set, frozenset)):
        return sorted(_plain(v) for v in value)
    if isinstance(value, np.generic):
        return value.item()
    return value


def spectrum_frame(spectrum):
    s = spectrum.transfer.values
    return pd.DataFrame(
        {
            'omega': spectrum.omega_grid,
            're_S': s.real,
            'im_S': s.imag,
            'reflected_intensity': spectrum.reflected_intensity,
            'eta0': spectrum.eta0,
            'eta_lossy': spectrum.eta_lossy,
        },
        columns=SPECTRUM_COLUMNS,
    )


def _write_frame(df, path, format):
    if format not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {format!r}")
    if format == 'csv':
        df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    else:
        df.to_json(path, orient='records', double_precision=15)

    return path


def export_spectrum(spectrum, path, format='csv'):
    """
    Write a spectrum table with the columns omega, re_S, im_S,
    reflected_intensity, eta0, eta_lossy in that order.

    Parameters
    ----------
        spectrum: EfficiencySpectrum
        path: string
        format: string (default: 'csv')
            'csv' (one header line) or 'json' (list of records).
    """
    _write_frame(spectrum_frame(spectrum), path, format)
    log.info("spectrum with %d points written to %s", len(spectrum.omega_grid), path)

    return path


def _companion(path, suffix):
    root, _ = os.path.splitext(path)
    return f"{root}.{suffix}.yaml"


def simulation_frame(result, indices=None):
    if indices is None:
        indices = range(1, len(result.cavity_series) + 1)
    columns = {
        't': result.time_grid,
        're_in': result.input_series.real,
        'im_in': result.input_series.imag,
        're_out': result.output_series.real,
        'im_out': result.output_series.imag,
    }
    for index, b in zip(indices, result.cavity_series):
        columns[f're_b{index}'] = b.real
        columns[f'im_b{index}'] = b.imag

    return pd.DataFrame(columns)


def export_simulation(result, path, format='csv', indices=None):
    """
    Write the time series of a simulation and, next to it, the energy
    ledger as <path stem>.ledger.yaml.

    Returns
    -------
        paths: (2) list of strings
    """
    _write_frame(simulation_frame(result, indices), path, format)
    ledger_path = _companion(path, 'ledger')
    report = dict(
        scheme=result.scheme,
        dt=result.dt,
        t_end=float(result.time_grid[-1]),
        ledger=result.ledger.as_dict(),
    )
    with open(ledger_path, 'w') as f:
        yaml.safe_dump(_plain(report), f, sort_keys=False)
    log.info("simulation series written to %s", path)

    return [path, ledger_path]


def optimization_report(result):
    report = result.summary()
    report['spectral_points'] = result.spectral_points
    report['residual_magnitude'] = np.abs(result.residuals)
    report['reflected_intensity'] = result.reflection
    report['restart_objectives'] = list(result.objectives)

    return _plain(report)


def export_optimization(result, path, problem=None):
    """
    Write the optimized cascade to path and the optimization report to
    <path stem>.report.yaml.

    Returns
    -------
        paths: (2) list of strings
    """
    blocks = {}
    if problem is not None:
        blocks['optimization'] = dict(
            free=problem.free,
            enforce_symmetry=problem.enforce_symmetry,
            spectral_points=problem.spectral_points,
            center_constraint_weight=problem.center_constraint_weight,
            residual_mode=problem.residual_mode,
        )
    save_config(result.config, path, **blocks)
    report_path = _companion(path, 'report')
    with open(report_path, 'w') as f:
        yaml.safe_dump(optimization_report(result), f, sort_keys=False)

    return [path, report_path]
