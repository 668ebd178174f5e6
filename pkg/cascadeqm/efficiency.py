from dataclasses import dataclass

import numpy as np

from .transfer import transfer_function, cavity_amplitudes
from .utils import as_grid, unwrap, check_grid, check_positive

GRID_POINTS = 601
GRID_HALF_WIDTH = 2.5  # units of the comb spacing
MAX_GAMMA_RATIO = 1e-1


@dataclass(frozen=True, eq=False)
class ComplexSpectrum:
    """
    Samples of S(w) on an ascending frequency grid.
    """
    omega_grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        assert len(self.omega_grid) == len(self.values), (
            "grid and values must have equal length"
        )


@dataclass(frozen=True, eq=False)
class EfficiencySpectrum:
    """
    Storage efficiency spectra of a cascade.

    Parameters
    ----------
        omega_grid: (n,) array of floats
        eta0: (n,) array of floats
            Lossless storage efficiency 1 - |S|^2 (all gamma set to 0).
        eta_lossy: (n,) array of floats
            Storage efficiency with the configured intrinsic losses; equal
            to eta0 when every gamma is 0.
        reflected_intensity: (n,) array of floats
            |S|^2 of the configured (possibly lossy) cascade.
        transfer: ComplexSpectrum
            The complex S(w) samples behind reflected_intensity.
    """
    omega_grid: np.ndarray
    eta0: np.ndarray
    eta_lossy: np.ndarray
    reflected_intensity: np.ndarray
    transfer: ComplexSpectrum


@dataclass(frozen=True)
class BandMetrics:
    band: tuple
    min_eta0: float
    mean_eta0: float
    max_eta0: float
    threshold: float
    bandwidth_at_threshold: float


def default_grid(comb_spacing=1., points=GRID_POINTS):
    half = GRID_HALF_WIDTH * comb_spacing
    return np.linspace(-half, half, points)


def storage_efficiency_lossless(cfg, omega):
    """
    Upper limit of the storage efficiency, eta0(w) = 1 - |S(w)|^2, for the
    cascade with every intrinsic loss removed.
    """
    s = transfer_function(cfg.lossless(), omega)
    return np.clip(1. - np.abs(s) ** 2, 0., 1.)


def loss_fraction(cfg, omega):
    """
    Fraction of the input energy drained by intrinsic cavity losses,
    sum_n 2 gamma_n |T_n(w)|^2.
    """
    omega, scalar = as_grid(omega)
    gammas = np.array([r.gamma for r in cfg.resonators])
    if not np.any(gammas > 0):
        return unwrap(np.zeros_like(omega), scalar)
    amplitudes = cavity_amplitudes(cfg, omega)
    drained = np.tensordot(2 * gammas, np.abs(amplitudes) ** 2, axes=1)

    return unwrap(drained, scalar)


def storage_efficiency_lossy(cfg, omega):
    """
    Storage efficiency with intrinsic losses,

        eta(w) = 1 - |S(w)|^2 - sum_n 2 gamma_n |T_n(w)|^2

    where T_n are the cascade amplitudes of cavity_amplitudes. The loss
    term is the energy drained at rate 2 gamma_n from cavity n, so a bare
    lossy cavity stores nothing. Reduces to storage_efficiency_lossless
    when all gamma_n are 0.
    """
    s = transfer_function(cfg, omega)
    eta = 1. - np.abs(s) ** 2 - loss_fraction(cfg, omega)

    return np.clip(eta, 0., 1.)


def total_efficiency(eta_stor, T, T2):
    """
    Total memory efficiency after write, storage for a time T and
    time-reversed readout, exp(-2T/T2) * eta_stor^2.

    Parameters
    ----------
        eta_stor: float or array of floats in [0, 1]
        T: float
            Storage time, >= 0.
        T2: float
            Spin coherence time, > 0.
    """
    check_positive('T2', T2)
    check_positive('T', T, strict=False)
    eta_stor = np.asarray(eta_stor, dtype=float)
    if np.any((eta_stor < 0) | (eta_stor > 1)):
        raise ValueError("eta_stor must lie in [0, 1]")

    return unwrap(np.exp(-2 * T / T2) * eta_stor ** 2, eta_stor.ndim == 0)


def complex_spectrum(cfg, grid):
    grid = check_grid(grid)
    return ComplexSpectrum(omega_grid=grid, values=transfer_function(cfg, grid))


def evaluate_spectrum(cfg, grid=None):
    """
    Sample S(w), |S|^2, eta0 and the lossy efficiency on a grid.

    Parameters
    ----------
        cfg: SystemConfig
        grid: array of floats or None (default: None)
            Strictly ascending frequencies. If None, 601 points over
            [-2.5, 2.5] comb spacings.

    Returns
    -------
        spectrum: EfficiencySpectrum
    """
    if grid is None:
        grid = default_grid(cfg.comb_spacing)
    transfer = complex_spectrum(cfg, grid)
    grid = transfer.omega_grid

    return EfficiencySpectrum(
        omega_grid=grid,
        eta0=storage_efficiency_lossless(cfg, grid),
        eta_lossy=storage_efficiency_lossy(cfg, grid),
        reflected_intensity=np.clip(np.abs(transfer.values) ** 2, 0., 1.),
        transfer=transfer,
    )


def total_efficiency_spectrum(spectrum, T, T2, lossy=True):
    eta = spectrum.eta_lossy if lossy else spectrum.eta0
    return total_efficiency(eta, T, T2)


def band_metrics(spectrum, band, threshold=0.99):
    """
    Summarize eta0 inside a frequency band.

    Parameters
    ----------
        spectrum: EfficiencySpectrum
        band: (2) list of floats
            [w_lo, w_hi] band edges, inclusive.
        threshold: float (default: 0.99)
            Efficiency level for the bandwidth measure.

    Returns
    -------
        metrics: BandMetrics
            bandwidth_at_threshold is the width of the largest contiguous
            run of grid points inside the band with eta0 >= threshold.
    """
    lo, hi = band
    assert hi >= lo, "band must be [lo, hi] with hi >= lo"
    grid = spectrum.omega_grid
    # tolerate round-off on grid points that sit on a band edge
    eps = 1e-9 * max(1., abs(lo), abs(hi))
    mask = (grid >= lo - eps) & (grid <= hi + eps)
    if not np.any(mask):
        raise ValueError(f"no grid points inside band {band}")
    omega = grid[mask]
    eta0 = spectrum.eta0[mask]

    return BandMetrics(
        band=(float(lo), float(hi)),
        min_eta0=float(eta0.min()),
        mean_eta0=float(np.clip(eta0.mean(), eta0.min(), eta0.max())),
        max_eta0=float(eta0.max()),
        threshold=float(threshold),
        bandwidth_at_threshold=_longest_run(omega, eta0 >= threshold),
    )


def _longest_run(omega, above):
    best, start = 0., None
    for i, flag in enumerate(above):
        if flag and start is None:
            start = i
        if start is not None and (not flag or i == len(above) - 1):
            stop = i if flag else i - 1
            best = max(best, omega[stop] - omega[start])
            start = None

    return float(best)


def loss_sweep(cfg, gamma_ratios, omega=0.):
    """
    Drop of the storage efficiency at omega for uniform intrinsic losses
    gamma = ratio * kappa_1.

    Returns
    -------
        rows: list of (ratio, eta0, eta, drop) tuples
    """
    ratios = np.asarray(gamma_ratios, dtype=float).reshape(-1)
    if np.any(ratios <= 0) or np.any(ratios > MAX_GAMMA_RATIO):
        raise ValueError(
            f"gamma ratios must lie in (0, {MAX_GAMMA_RATIO}], got {ratios}"
        )
    eta0 = float(storage_efficiency_lossless(cfg, omega))
    rows = []
    for ratio in ratios:
        lossy = cfg.with_params(gamma=ratio * cfg.kappa_1)
        eta = float(storage_efficiency_lossy(lossy, omega))
        rows.append((float(ratio), eta0, eta, eta0 - eta))

    return rows


def loss_sensitivity(cfg, gamma_ratios, omega=0.):
    """
    Estimate xi in eta ~ eta0 - xi * gamma / kappa_1 as the least-squares
    slope of the efficiency drop at omega against gamma / kappa_1.
    """
    if len(np.atleast_1d(gamma_ratios)) < 2:
        raise ValueError("loss sensitivity fit needs at least 2 gamma ratios")
    rows = loss_sweep(cfg, gamma_ratios, omega)
    ratios = np.array([r[0] for r in rows])
    drops = np.array([r[3] for r in rows])
    if np.ptp(ratios) == 0:
        raise ValueError("loss sensitivity fit needs distinct gamma ratios")
    slope, _ = np.polyfit(ratios, drops, 1)

    return float(slope)
