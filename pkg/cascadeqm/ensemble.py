import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .utils import check_positive, check_finite

log = logging.getLogger(__name__)

MIN_TRUNCATION = 10.
DEFAULT_TRUNCATION = 1e3


@dataclass(frozen=True)
class SpinEnsembleSpec:
    """
    An inhomogeneously broadened spin ensemble with a Lorentzian line.

    Parameters
    ----------
        center: float
            Line center D~_n.
        linewidth: float
            Lorentzian HWHM delta_n = 1 / T2*, > 0.
        g_collective: float
            Collective coupling sqrt(N_n) g_n, >= 0.
    """
    center: float
    linewidth: float
    g_collective: float

    def __post_init__(self):
        object.__setattr__(
            self, 'center', float(check_finite('center', self.center))
        )
        object.__setattr__(
            self, 'linewidth', check_positive('linewidth', self.linewidth)
        )
        object.__setattr__(
            self, 'g_collective',
            check_positive('g_collective', self.g_collective, strict=False)
        )

    @classmethod
    def from_resonator(cls, res, comb_spacing=1.):
        return cls(
            center=res.center(comb_spacing),
            linewidth=res.spin_linewidth,
            g_collective=res.g_collective,
        )

    @property
    def T2_star(self):
        return 1. / self.linewidth


@dataclass(frozen=True, eq=False)
class DiscreteEnsemble:
    """
    A finite set of spins standing in for a continuous line.

    Parameters
    ----------
        detunings: (M,) array of floats
            Spin detunings relative to the line center.
        couplings: (M,) array of floats
            Per-spin couplings g_j >= 0 with sum(g_j^2) = G^2.
    """
    detunings: np.ndarray
    couplings: np.ndarray

    def __post_init__(self):
        assert len(self.detunings) == len(self.couplings), (
            "detunings and couplings must have equal length"
        )

    @property
    def size(self):
        return len(self.detunings)

    @property
    def g_collective(self):
        return float(np.sqrt(np.sum(self.couplings ** 2)))


def lorentzian_density(delta, linewidth):
    """
    Normalized Lorentzian line shape pi^-1 w / (delta^2 + w^2).

    Parameters
    ----------
        delta: float or array of floats
            Detuning from the line center.
        linewidth: float
            HWHM w > 0.
    """
    check_positive('linewidth', linewidth)
    delta = np.asarray(delta, dtype=float)

    return linewidth / (np.pi * (delta ** 2 + linewidth ** 2))


def absorption_coefficient(spec):
    """
    The resonator absorption coefficient N g^2 T2* = G^2 / linewidth.
    """
    return spec.g_collective ** 2 / spec.linewidth


def discretize(spec, M, truncation_width=DEFAULT_TRUNCATION):
    """
    Replace a Lorentzian line by M spins at equal-probability quantiles.

    The line is truncated at +/- truncation_width * linewidth and the
    remaining mass is renormalized. Spin j sits at the midpoint quantile

        delta_j = w * tan(theta_j),
        theta_j = -A + (j + 1/2) * 2A / M,  A = arctan(truncation_width)

    and every spin gets the same coupling G / sqrt(M), so the collective
    coupling is preserved exactly.

    Parameters
    ----------
        spec: SpinEnsembleSpec
        M: int
            Number of spins, >= 1. Odd M puts a spin on the line center.
        truncation_width: float (default: 1e3)
            Truncation in units of the linewidth, >= 10.

    Returns
    -------
        ensemble: DiscreteEnsemble
    """
    if int(M) != M or M < 1:
        raise ValueError(f"M must be a positive integer, got {M!r}")
    M = int(M)
    if not truncation_width >= MIN_TRUNCATION:
        raise ValueError(
            f"truncation_width must be >= {MIN_TRUNCATION}, "
            f"got {truncation_width!r}"
        )
    if M % 2 == 0:
        warnings.warn(
            f"even spin count M={M} leaves no spin on the line center",
            stacklevel=2
        )

    half_angle = np.arctan(truncation_width)
    theta = -half_angle + (np.arange(M) + 0.5) * 2 * half_angle / M
    detunings = spec.linewidth * np.tan(theta)
    if M % 2 == 1:
        # exact symmetry about the center
        detunings = 0.5 * (detunings - detunings[::-1])
    couplings = np.full(M, spec.g_collective / np.sqrt(M))
    log.debug(
        "discretized line at %g into %d spins, max detuning %g",
        spec.center, M, np.abs(detunings).max()
    )

    return DiscreteEnsemble(detunings=detunings, couplings=couplings)


def ensemble_response(ensemble, center, omega, regularizer):
    """
    Frequency-domain susceptibility of a discrete ensemble,

        sum_j g_j^2 / (eps - i (w - center - delta_j)).

    With a regularizer eps > 0 it approaches the continuum term
    G^2 / (linewidth + eps - i (w - center)) as M and the truncation grow.
    """
    check_positive('regularizer', regularizer)
    omega = np.asarray(omega, dtype=float)
    w = omega[..., None] - center - ensemble.detunings

    return np.sum(ensemble.couplings ** 2 / (regularizer - 1j * w), axis=-1)


def continuum_response(spec, omega, regularizer=0.):
    omega = np.asarray(omega, dtype=float)
    return spec.g_collective ** 2 / (
        spec.linewidth + regularizer - 1j * (omega - spec.center)
    )


def discretize_config(cfg, M, truncation_width=DEFAULT_TRUNCATION):
    """
    Discretize the spin line of every resonator in a cascade.

    Parameters
    ----------
        cfg: SystemConfig
        M: int
            Spins per ensemble.
        truncation_width: float (default: 1e3)

    Returns
    -------
        ensembles: list of DiscreteEnsemble in cascade order
    """
    return [
        discretize(
            SpinEnsembleSpec.from_resonator(r, cfg.comb_spacing),
            M, truncation_width
        )
        for r in cfg.resonators
    ]
