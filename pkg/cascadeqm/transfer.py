import numpy as np

from .utils import as_grid, unwrap

# |denominator| below this (relative to kappa) is treated as a pole on the
# real frequency axis
SINGULAR_LIMIT = 1e-14


class SingularityError(ArithmeticError):
    """
    Raised when a cascade denominator vanishes on the real frequency axis,
    which only happens for unphysical parameters.
    """


def spin_loading(res, omega, comb_spacing=1.):
    """
    The spin-ensemble term G^2 / (delta - i (w - D~)) of one resonator.
    """
    return res.g_collective ** 2 / (
        res.spin_linewidth - 1j * (omega - res.center(comb_spacing))
    )


def _loading(res, omega, comb_spacing):
    # -i (w - D') with D' = D - i gamma, plus the spin term
    return (
        -1j * (omega - res.cavity_detuning) + res.gamma
        + spin_loading(res, omega, comb_spacing)
    )


def single_factor(res, omega, comb_spacing=1.):
    """
    One factor of the cascade transfer function,

        [-k/2 - i(w - D') + G^2/(d - i(w - D~))]
        / [k/2 - i(w - D') + G^2/(d - i(w - D~))]

    with D' = D - i gamma.

    Parameters
    ----------
        res: ResonatorSpec
        omega: float or array of floats
            Frequency (or frequencies) relative to the carrier.
        comb_spacing: float (default: 1.)
            Only used when res.spin_center is None.

    Returns
    -------
        factor: complex or array of complex, |factor| <= 1.
    """
    omega, scalar = as_grid(omega)
    loading = _loading(res, omega, comb_spacing)
    denominator = res.kappa / 2 + loading
    _check_denominator(denominator, res, omega)

    return unwrap((-res.kappa / 2 + loading) / denominator, scalar)


def numerator_factor(res, omega, comb_spacing=1.):
    omega, scalar = as_grid(omega)
    return unwrap(
        -res.kappa / 2 + _loading(res, omega, comb_spacing), scalar
    )


def _check_denominator(denominator, res, omega):
    bad = np.abs(denominator) < SINGULAR_LIMIT * res.kappa
    if np.any(bad):
        w = np.atleast_1d(omega)[np.atleast_1d(bad)][0]
        raise SingularityError(
            f"vanishing denominator for resonator {res.index} at omega={w!r}"
        )


def propagation_phase(cfg, omega):
    """
    The phase Phi(w) = (w + w0)(z_N - z_1)/c of the full cascade.
    """
    length = cfg.resonators[-1].position - cfg.resonators[0].position
    return (omega + cfg.central_frequency) * length / cfg.propagation_speed


def transfer_function(cfg, omega):
    """
    The cascade transfer function S(w) = a_out,N(w) / a_in,1(w).

    Parameters
    ----------
        cfg: SystemConfig
        omega: float or array of floats

    Returns
    -------
        S: complex or array of complex
    """
    omega, scalar = as_grid(omega)
    if not cfg.resonators:
        raise ValueError("a cascade needs at least one resonator")
    s = np.exp(1j * propagation_phase(cfg, omega))
    for res in cfg.resonators:
        s = s * single_factor(res, omega, cfg.comb_spacing)

    return unwrap(s, scalar)


def numerator_product(cfg, omega):
    """
    numer(S): the product of the factor numerators, the quantity driven to
    zero at the spectral points during optimization.
    """
    omega, scalar = as_grid(omega)
    s = np.ones_like(omega, dtype=complex)
    for res in cfg.resonators:
        s = s * numerator_factor(res, omega, cfg.comb_spacing)

    return unwrap(s, scalar)


def cavity_amplitudes(cfg, omega):
    """
    Solve the cascade sequentially for the intracavity amplitudes
    T_n(w) = b_n(w) / a_in,1(w).

    Each resonator sees the (phase shifted) output of the previous one:

        b_n = sqrt(k_n) a_in,n / [k_n/2 - i(w - D_n') + G^2/(d_n - i(w - D~_n))]
        a_out,n = a_in,n - sqrt(k_n) b_n
        a_in,n+1 = exp(i (w + w0)(z_n+1 - z_n)/c) a_out,n

    Parameters
    ----------
        cfg: SystemConfig
        omega: float or array of floats

    Returns
    -------
        amplitudes: (n_resonators,) complex array for a scalar omega,
            otherwise an (n_resonators, len(omega)) array in cascade order.
    """
    omega, scalar = as_grid(omega)
    a_in = np.ones_like(omega, dtype=complex)
    amplitudes = []
    for i, res in enumerate(cfg.resonators):
        denominator = res.kappa / 2 + _loading(res, omega, cfg.comb_spacing)
        _check_denominator(denominator, res, omega)
        b = np.sqrt(res.kappa) * a_in / denominator
        amplitudes.append(b)
        a_out = a_in - np.sqrt(res.kappa) * b
        if i + 1 < len(cfg.resonators):
            dz = cfg.resonators[i + 1].position - res.position
            a_in = a_out * np.exp(
                1j * (omega + cfg.central_frequency) * dz
                / cfg.propagation_speed
            )

    return np.array(amplitudes)
