import dataclasses
from dataclasses import dataclass

import numpy as np

from .efficiency import (
    storage_efficiency_lossless, storage_efficiency_lossy, loss_fraction
)
from .ensemble import SpinEnsembleSpec, absorption_coefficient
from .transfer import transfer_function

CENTER_REFLECTION_LIMIT = 1e-3
PASSIVITY_TOLERANCE = 1e-12
SYMMETRY_TOLERANCE = 1e-12
IDENTITY_TOLERANCE = 1e-12
ASYMPTOTIC_FREQUENCY = 1e6  # units of the comb spacing
ASYMPTOTIC_TOLERANCE = 1e-6
ABSORPTION_TOLERANCE = 1e-2
PASSIVITY_SAMPLES = 2001
SAMPLE_HALF_WIDTH = 10.  # units of the comb spacing

# reference N g^2 T2* for the positive-index half of the published cascade
PUBLISHED_ABSORPTION = {1: 1.76, 2: 1.23}


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    limit: float
    detail: str = ''


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def failures(self):
        return [c for c in self.checks if not c.passed]

    def rows(self):
        return [
            [c.name, 'ok' if c.passed else 'FAIL', f"{c.value:.3e}",
             f"{c.limit:.1e}", c.detail]
            for c in self.checks
        ]


def _check(name, value, limit, detail=''):
    value = float(value)
    return Check(
        name=name,
        passed=bool(np.isfinite(value) and value <= limit),
        value=value,
        limit=float(limit),
        detail=detail,
    )


def check_center_reflection(cfg):
    r = abs(transfer_function(cfg.lossless(), 0.)) ** 2
    return _check('center reflection |S(0)|^2', r, CENTER_REFLECTION_LIMIT)


def check_passivity(cfg, omega):
    s = np.abs(transfer_function(cfg, omega))
    i = int(np.argmax(s))
    return _check(
        'passivity max|S| - 1', s[i] - 1., PASSIVITY_TOLERANCE,
        f"worst at omega={omega[i]:.6g}"
    )


def check_energy_bound(cfg, omega):
    """
    Reflected plus intrinsically lost energy never exceeds the input.
    """
    total = np.abs(transfer_function(cfg, omega)) ** 2 + loss_fraction(cfg, omega)
    return _check(
        'energy bound max(|S|^2 + loss) - 1', np.max(total) - 1.,
        PASSIVITY_TOLERANCE
    )


def is_mirror_symmetric(cfg):
    """
    True if every resonator n has a partner -n with negated detunings and
    equal rates.
    """
    if cfg.symmetric:
        return True
    by_index = {r.index: r for r in cfg.resonators}
    for r in cfg.resonators:
        partner = by_index.get(-r.index)
        if partner is None:
            return False
        mirrored = r.mirrored()
        if mirrored.as_dict() != dataclasses.replace(
            partner, position=mirrored.position
        ).as_dict():
            return False

    return True


def check_mirror_symmetry(cfg, omega):
    if not is_mirror_symmetric(cfg):
        return Check(
            'mirror symmetry ||S(-w)| - |S(w)||', True, 0., SYMMETRY_TOLERANCE,
            'skipped: cascade is not mirror symmetric'
        )
    diff = np.abs(
        np.abs(transfer_function(cfg, -omega))
        - np.abs(transfer_function(cfg, omega))
    )
    return _check(
        'mirror symmetry ||S(-w)| - |S(w)||', np.max(diff), SYMMETRY_TOLERANCE
    )


def check_phase_irrelevance(cfg, omega):
    """
    Positions and the carrier frequency only enter a global phase.
    """
    shifted = [
        dataclasses.replace(r, position=r.position + 0.37 * k)
        for k, r in enumerate(cfg.resonators)
    ]
    other = dataclasses.replace(
        cfg.replace_resonators(shifted, symmetric=False),
        central_frequency=cfg.central_frequency + 1.234,
    )
    diff = np.abs(
        np.abs(transfer_function(cfg, omega))
        - np.abs(transfer_function(other, omega))
    )
    return _check('phase irrelevance', np.max(diff), IDENTITY_TOLERANCE)


def check_lossless_reduction(cfg, omega):
    lossless = cfg.lossless()
    diff = np.abs(
        storage_efficiency_lossy(lossless, omega)
        - storage_efficiency_lossless(cfg, omega)
    )
    return _check('lossless reduction eta = eta0', np.max(diff), IDENTITY_TOLERANCE)


def check_asymptotics(cfg):
    omega = ASYMPTOTIC_FREQUENCY * cfg.comb_spacing * np.array([-1., 1.])
    deviation = np.max(np.abs(np.abs(transfer_function(cfg, omega)) - 1.))
    return _check('far-detuned |S| -> 1', deviation, ASYMPTOTIC_TOLERANCE)


def check_absorption(cfg, reference, tolerance=ABSORPTION_TOLERANCE):
    checks = []
    for index, expected in sorted(reference.items()):
        res = cfg.resonator(index)
        computed = absorption_coefficient(
            SpinEnsembleSpec.from_resonator(res, cfg.comb_spacing)
        )
        checks.append(_check(
            f"absorption N g^2 T2* (resonator {index})",
            abs(computed - expected), tolerance,
            f"computed {computed:.4f}, expected {expected}"
        ))

    return checks


def sample_frequencies(cfg, samples=PASSIVITY_SAMPLES, seed=0):
    """
    A dense symmetric grid over +/- 10 comb spacings joined with uniformly
    drawn frequencies over the same range.
    """
    half = SAMPLE_HALF_WIDTH * cfg.comb_spacing
    rng = np.random.default_rng(seed)
    grid = np.linspace(-half, half, samples)

    return np.concatenate((grid, rng.uniform(-half, half, samples)))


def verify_config(cfg, reference_absorption=None, samples=PASSIVITY_SAMPLES,
                  seed=0):
    """
    Run the invariant suite on a cascade.

    Parameters
    ----------
        cfg: SystemConfig
        reference_absorption: dict or None (default: None)
            Expected N g^2 T2* per resonator index, checked to +/- 0.01.
        samples: int (default: 2001)
        seed: int (default: 0)
            Seed of the random frequency sample.

    Returns
    -------
        report: VerificationReport
    """
    omega = sample_frequencies(cfg, samples, seed)
    checks = [
        check_center_reflection(cfg),
        check_passivity(cfg, omega),
        check_energy_bound(cfg, omega),
        check_mirror_symmetry(cfg, omega),
        check_phase_irrelevance(cfg, omega),
        check_lossless_reduction(cfg, omega),
        check_asymptotics(cfg),
    ]
    if reference_absorption:
        checks.extend(check_absorption(cfg, reference_absorption))

    return VerificationReport(checks=tuple(checks))
