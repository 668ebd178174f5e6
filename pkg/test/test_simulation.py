import inspect
import sys

import numpy as np
import pytest

from cascadeqm.efficiency import storage_efficiency_lossless
from cascadeqm.ensemble import discretize, discretize_config, SpinEnsembleSpec
from cascadeqm.simulation import (
    PulseSpec, gaussian_pulse, integrate, frequency_propagate, energy_ledger,
    relative_l2, default_time_grid, etdrk4_coefficients,
    check_pulse_resolution, check_ledger, EnergyLedger, IntegrationError
)
from cascadeqm.system import ResonatorSpec, SystemConfig, published_config

"""
Time-domain integration of the cascade checked against conservation,
linearity and the frequency-domain transfer function.
"""

CONSERVATION_TOLERANCE = 1e-6


def cavity(kappa=2., detuning=0., g=1., linewidth=0.2, gamma=0.):
    return SystemConfig(resonators=(ResonatorSpec(
        index=1, kappa=kappa, cavity_detuning=detuning, gamma=gamma,
        g_collective=g, spin_linewidth=linewidth, spin_center=0.
    ),))


def small_run(dt, scheme, gamma=0., amplitude=1.):
    cfg = cavity(gamma=gamma)
    ensembles = discretize_config(cfg, 21, truncation_width=10.)
    pulse = PulseSpec(duration=4., amplitude=amplitude)
    return integrate(cfg, ensembles, pulse, dt, t_end=60., scheme=scheme)


def test_pulse_spec():
    pulse = PulseSpec(duration=2.)
    assert pulse.delay == 12.
    assert pulse.end == 24.
    t = default_time_grid(pulse, 0.01, 60.)
    assert len(t) == 6001 and t[-1] == pytest.approx(60.)
    a = gaussian_pulse(pulse, t)
    assert abs(a[1200]) == pytest.approx(1.)
    energy = np.sum(np.abs(a) ** 2) * 0.01
    assert energy == pytest.approx(pulse.energy(), rel=1e-9)
    with pytest.raises(ValueError):
        PulseSpec(duration=0.)


def test_etdrk4_coefficients_limit():
    # with no linear part the scheme reduces to classic RK4 weights
    h = 0.1
    E, E2, Q, f1, f2, f3 = etdrk4_coefficients(np.zeros(1), h)
    assert E[0] == pytest.approx(1.)
    assert E2[0] == pytest.approx(1.)
    assert Q[0] == pytest.approx(h / 2, rel=1e-12)
    assert f1[0] == pytest.approx(h / 6, rel=1e-12)
    assert f2[0] == pytest.approx(h / 6, rel=1e-12)
    assert f3[0] == pytest.approx(h / 6, rel=1e-12)


def test_etdrk4_coefficients_complex():
    # away from the origin the contour means match the closed forms
    h = 0.1
    L = np.array([-5., -1. + 10j, -3. - 20j, 40j])
    E, E2, Q, f1, f2, f3 = etdrk4_coefficients(L, h)
    z = h * L
    ez = np.exp(z)
    assert np.allclose(E, ez, rtol=1e-12, atol=0)
    assert np.allclose(E2, np.exp(z / 2), rtol=1e-12, atol=0)
    assert np.allclose(Q, h * (np.exp(z / 2) - 1) / z, rtol=1e-10, atol=0)
    assert np.allclose(
        f1, h * (-4 - z + ez * (4 - 3 * z + z ** 2)) / z ** 3,
        rtol=1e-10, atol=0
    )
    assert np.allclose(
        f2, h * (2 + z + ez * (z - 2)) / z ** 3, rtol=1e-10, atol=0
    )
    assert np.allclose(
        f3, h * (-4 - 3 * z - z ** 2 + ez * (4 - z)) / z ** 3,
        rtol=1e-10, atol=0
    )


def test_zero_input():
    cfg = cavity()
    ensembles = discretize_config(cfg, 11, truncation_width=10.)
    result = integrate(
        cfg, ensembles, PulseSpec(duration=3., amplitude=0.), 0.02, t_end=30.
    )
    assert np.all(result.output_series == 0)
    assert np.all(result.cavity_series == 0)
    ledger = energy_ledger(result)
    assert ledger.as_dict() == dict(
        input=0., output=0., cavity=0., spins=0., loss=0., imbalance=0.
    )


@pytest.mark.parametrize('scheme', ['etdrk4', 'rk4'])
def test_conservation(scheme):
    coarse = small_run(0.04, scheme).ledger
    fine = small_run(0.02, scheme).ledger
    assert fine.relative_imbalance <= CONSERVATION_TOLERANCE
    assert coarse.relative_imbalance >= 8 * fine.relative_imbalance
    assert fine.spins > 0 and fine.output > 0


def test_conservation_with_losses():
    ledger = small_run(0.02, 'etdrk4', gamma=0.1).ledger
    assert ledger.loss > 0
    assert ledger.relative_imbalance <= CONSERVATION_TOLERANCE


def test_linearity():
    one = small_run(0.04, 'etdrk4')
    two = small_run(0.04, 'etdrk4', amplitude=2.)
    assert np.max(np.abs(two.output_series - 2 * one.output_series)) <= (
        1e-14 * np.max(np.abs(one.output_series))
    )
    assert two.ledger.input == pytest.approx(4 * one.ledger.input, rel=1e-12)


def test_bare_cavity_passes_pulse():
    cfg = cavity(g=0., detuning=0.5)
    ensembles = discretize_config(cfg, 1, truncation_width=10.)
    pulse = PulseSpec(duration=10., center_frequency=0.5)
    result = integrate(cfg, ensembles, pulse, 0.02)
    ledger = result.ledger
    assert abs(ledger.output / ledger.input - 1.) <= 1e-4
    assert ledger.spins == 0


def test_time_step_limit():
    cfg = cavity(kappa=2.)
    ensembles = discretize_config(cfg, 11, truncation_width=10.)
    pulse = PulseSpec(duration=4.)
    with pytest.raises(ValueError):
        integrate(cfg, ensembles, pulse, 0.1, t_end=10.)
    # the explicit scheme also has to resolve the spin detunings
    wide = discretize_config(cfg, 1001, truncation_width=1e3)
    integrate(cfg, wide, pulse, 0.04, t_end=1.)
    with pytest.raises(ValueError):
        integrate(cfg, wide, pulse, 0.04, t_end=1., scheme='rk4')
    with pytest.raises(ValueError):
        integrate(cfg, ensembles[:0], pulse, 0.01, t_end=10.)


def test_pulse_resolution_warning():
    with pytest.warns(UserWarning):
        check_pulse_resolution(PulseSpec(duration=0.5, center_frequency=150.), 0.02)


def test_ledger_divergence():
    with pytest.raises(IntegrationError):
        check_ledger(
            EnergyLedger(input=1., output=0.5, cavity=0., spins=0., loss=0.), 1.
        )
    check_ledger(
        EnergyLedger(input=1., output=0.5, cavity=0.2, spins=0.3, loss=0.), 1.
    )


def test_frequency_propagate_all_pass():
    cfg = cavity(g=0.)
    pulse = PulseSpec(duration=6.)
    t = default_time_grid(pulse, 0.05, 200.)
    x = gaussian_pulse(pulse, t)
    y = frequency_propagate(cfg, x, t)
    assert abs(np.sum(np.abs(y) ** 2) / np.sum(np.abs(x) ** 2) - 1.) <= 1e-10
    # the cavity delays the pulse, so it is not returned unchanged
    assert relative_l2(y, x) > 1e-3


def test_frequency_propagate_matched_cavity():
    cfg = cavity(g=1., linewidth=1.)
    pulse = PulseSpec(duration=10.)
    t = default_time_grid(pulse, 0.05, 300.)
    x = gaussian_pulse(pulse, t)
    y = frequency_propagate(cfg, x, t)
    assert np.sum(np.abs(y) ** 2) / np.sum(np.abs(x) ** 2) <= 1e-4


def test_frequency_propagate_leakage_warning():
    cfg = cavity()
    t = np.arange(200) * 0.05
    with pytest.warns(UserWarning):
        frequency_propagate(cfg, np.ones(200, dtype=complex), t)
    with pytest.raises(ValueError):
        frequency_propagate(cfg, np.ones(3), np.array([0., 1., 3.]))


def test_oracle_single_cavity():
    cfg = cavity(g=1., linewidth=0.5)
    spec = SpinEnsembleSpec.from_resonator(cfg.resonators[0])
    ensembles = [discretize(spec, 2001, truncation_width=1e3)]
    pulse = PulseSpec(duration=6., center_frequency=1.)
    result = integrate(cfg, ensembles, pulse, 0.02, t_end=120.)
    reference = frequency_propagate(cfg, result.input_series, result.time_grid)
    error = relative_l2(result.output_series, reference, result.input_series)
    assert error <= 1e-3, f"oracle distance {error}"


def test_oracle_published_config():
    cfg = published_config()
    ensembles = discretize_config(cfg, 4001, truncation_width=1e3)
    pulse = PulseSpec(duration=8.)
    result = integrate(cfg, ensembles, pulse, 0.02, t_end=160.)
    ledger = result.ledger
    assert ledger.output / ledger.input <= 1e-3
    reference = frequency_propagate(cfg, result.input_series, result.time_grid)
    error = relative_l2(result.output_series, reference, result.input_series)
    assert error <= 1e-3, f"oracle distance {error}"

    # the stored fraction is eta0 averaged over the pulse spectrum
    n = len(result.time_grid)
    dt = result.time_grid[1] - result.time_grid[0]
    weight = np.abs(np.fft.fft(result.input_series)) ** 2
    omega = -2 * np.pi * np.fft.fftfreq(n, dt)
    eta0 = storage_efficiency_lossless(cfg, omega)
    stored = np.sum(weight * eta0) / np.sum(weight)
    assert ledger.spins / ledger.input >= 0.999
    assert abs(ledger.spins / ledger.input - stored) <= 1e-3


def one_function_to_run_them_all():
    test_functions = [
        obj for name, obj in inspect.getmembers(sys.modules[__name__])
        if (inspect.isfunction(obj)
            and name.startswith('test')
            and name != 'all'
            and name != 'test_conservation')
    ]

    [f() for f in test_functions]
    for scheme in ['etdrk4', 'rk4']:
        test_conservation(scheme)


if __name__ == '__main__':
    one_function_to_run_them_all()
