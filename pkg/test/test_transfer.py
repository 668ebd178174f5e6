import dataclasses
import inspect
import json
import os
import sys

import numpy as np
import pytest

from cascadeqm.efficiency import (
    storage_efficiency_lossless, storage_efficiency_lossy, loss_fraction,
    loss_sweep
)
from cascadeqm.system import (
    ResonatorSpec, SystemConfig, from_half, published_config, all_pass_config
)
from cascadeqm.transfer import (
    single_factor, transfer_function, numerator_product, cavity_amplitudes,
    propagation_phase
)

"""
Test the cascade transfer function against the published configuration,
exact identities and a randomized passivity suite.
"""

TOLERANCE = 1e-12
PASSIVITY_TRIALS = 10000
TARGETS = os.path.join(
    os.path.dirname(__file__), 'test_data', 'published_targets.json'
)


def load_targets():
    with open(TARGETS) as f:
        return json.load(f)


def matched_cavity(**kwargs):
    params = dict(
        index=1, kappa=2., cavity_detuning=0., g_collective=1.,
        spin_linewidth=1., spin_center=0.
    )
    params.update(kwargs)
    return SystemConfig(resonators=(ResonatorSpec(**params),))


def random_config(rng, symmetric=False):
    n = rng.integers(1, 3) if symmetric else rng.integers(1, 5)
    resonators = []
    for i in range(1, n + 1):
        resonators.append(ResonatorSpec(
            index=int(i),
            kappa=rng.uniform(0.05, 5.),
            cavity_detuning=rng.uniform(-3., 3.),
            gamma=rng.choice([0., rng.uniform(0., 0.5)]),
            g_collective=rng.uniform(0., 3.),
            spin_linewidth=rng.uniform(0.05, 3.),
            spin_center=rng.uniform(-3., 3.),
            position=rng.uniform(0., 10.),
        ))
    return SystemConfig(
        resonators=tuple(resonators),
        central_frequency=rng.uniform(-10., 10.),
        symmetric=symmetric,
    )


def test_published_config_layout():
    cfg = published_config()
    assert cfg.indices == [-2, -1, 1, 2]
    assert cfg.resonator(-1).cavity_detuning == -0.48
    assert cfg.resonator(-2).spin_center == -1.5
    assert cfg.resonator(1).spin_center == 0.5
    assert cfg.resonator(-2).kappa == 2.03
    assert [r.index for r in cfg.half] == [1, 2]


def test_published_center_reflection():
    targets = load_targets()
    cfg = from_half(targets['half'], targets['linewidth'])
    r = abs(transfer_function(cfg, 0.)) ** 2
    assert r <= targets['center_reflection_limit'], (
        f"|S(0)|^2 = {r}"
    )


def test_all_pass_unit_modulus():
    omega = np.linspace(-5., 5., 1001)
    s = transfer_function(all_pass_config(), omega)
    assert np.all(np.abs(np.abs(s) - 1.) <= TOLERANCE)


def test_matched_cavity_absorbs_center():
    cfg = matched_cavity()
    assert abs(transfer_function(cfg, 0.)) <= 1e-10
    assert numerator_product(cfg, 0.) == 0


def test_lossy_critical_coupling():
    # a bare cavity with gamma = kappa / 2 reflects nothing on resonance
    cfg = matched_cavity(g_collective=0., gamma=1.)
    assert abs(transfer_function(cfg, 0.)) <= TOLERANCE


def test_vectorized_matches_scalar():
    cfg = published_config(gamma=0.01)
    omega = np.linspace(-3., 3., 13)
    s = transfer_function(cfg, omega)
    for w, v in zip(omega, s):
        assert abs(transfer_function(cfg, w) - v) <= TOLERANCE
    assert np.ndim(transfer_function(cfg, 0.5)) == 0


def test_python_float_frequencies():
    cfg = published_config(gamma=0.01)
    res = cfg.resonators[0]
    grid = np.array([0., 0.3, 1.])
    for i, omega in enumerate([0., 0.3, 1]):
        for f, arg in [(single_factor, res), (transfer_function, cfg),
                       (numerator_product, cfg)]:
            value = f(arg, omega)
            assert np.ndim(value) == 0
            assert abs(value - f(arg, grid)[i]) <= TOLERANCE
        assert np.allclose(
            cavity_amplitudes(cfg, omega), cavity_amplitudes(cfg, grid)[:, i],
            rtol=0, atol=TOLERANCE
        )
        for f in [storage_efficiency_lossless, storage_efficiency_lossy,
                  loss_fraction]:
            value = f(cfg, omega)
            assert np.ndim(value) == 0
            assert abs(float(value) - f(cfg, grid)[i]) <= TOLERANCE
    assert float(loss_fraction(cfg.lossless(), 0.)) == 0.
    rows = loss_sweep(published_config(), [1e-3], omega=0.)
    assert rows[0][3] > 0


def test_factor_bounded():
    rng = np.random.default_rng(3)
    cfg = random_config(rng)
    omega = rng.uniform(-20., 20., 500)
    for res in cfg.resonators:
        f = single_factor(res, omega, cfg.comb_spacing)
        assert np.all(np.abs(f) <= 1. + TOLERANCE)


def test_passivity_random_configs():
    rng = np.random.default_rng(12345)
    worst = 0.
    for _ in range(PASSIVITY_TRIALS):
        cfg = random_config(rng)
        omega = rng.uniform(-10., 10., 4)
        worst = max(worst, np.max(np.abs(transfer_function(cfg, omega))))
    assert worst <= 1. + TOLERANCE, f"max |S| = {worst}"


def test_mirror_symmetry_random_configs():
    rng = np.random.default_rng(54321)
    for _ in range(PASSIVITY_TRIALS):
        cfg = random_config(rng, symmetric=True)
        omega = rng.uniform(-10., 10., 4)
        diff = np.abs(
            np.abs(transfer_function(cfg, omega))
            - np.abs(transfer_function(cfg, -omega))
        )
        assert np.all(diff <= TOLERANCE)


def test_phase_irrelevance():
    cfg = published_config()
    moved = cfg.replace_resonators(
        [dataclasses.replace(r, position=3. * r.index) for r in cfg.resonators],
        symmetric=False
    )
    moved = dataclasses.replace(moved, central_frequency=7.)
    omega = np.linspace(-2., 2., 101)
    assert np.allclose(
        np.abs(transfer_function(cfg, omega)),
        np.abs(transfer_function(moved, omega)),
        rtol=0, atol=TOLERANCE
    )
    assert np.all(propagation_phase(cfg, omega) == 0)


def test_cavity_amplitudes_account_for_losses():
    # without spins every photon is reflected or drained by gamma
    cfg = published_config(gamma=0.05).with_params(g_collective=0.)
    omega = np.linspace(-3., 3., 61)
    s = transfer_function(cfg, omega)
    t = cavity_amplitudes(cfg, omega)
    assert t.shape == (4, 61)
    drained = np.sum(2 * 0.05 * np.abs(t) ** 2, axis=0)
    assert np.allclose(np.abs(s) ** 2 + drained, 1., rtol=0, atol=TOLERANCE)


def test_rescaled_magnitudes():
    cfg = published_config(gamma=0.01)
    scaled = cfg.rescaled(2. * np.pi * 5e6)
    omega = np.linspace(-2., 2., 41)
    assert np.allclose(
        np.abs(transfer_function(cfg, omega)),
        np.abs(transfer_function(scaled, omega * 2. * np.pi * 5e6)),
        rtol=0, atol=1e-10
    )
    factor = 2. * np.pi * 5e6
    for r in scaled.resonators:
        r0 = cfg.resonator(r.index)
        assert r.kappa == pytest.approx(r0.kappa * factor, rel=1e-15)
        assert r.spin_center == pytest.approx(r0.spin_center * factor, rel=1e-15)
        assert r.gamma == pytest.approx(r0.gamma * factor, rel=1e-15)
        assert r.position == r0.position
    assert scaled.symmetric and scaled.comb_spacing == factor


def test_invalid_resonators():
    with pytest.raises(ValueError):
        ResonatorSpec(index=0, kappa=1., cavity_detuning=0.)
    with pytest.raises(ValueError):
        ResonatorSpec(index=1, kappa=-1., cavity_detuning=0.)
    with pytest.raises(ValueError):
        ResonatorSpec(index=1, kappa=1., cavity_detuning=0., gamma=-0.1)
    with pytest.raises(ValueError):
        ResonatorSpec(index=1, kappa=1., cavity_detuning=np.nan)
    r = ResonatorSpec(index=1, kappa=1., cavity_detuning=0.)
    with pytest.raises(ValueError):
        SystemConfig(resonators=(r, r))
    with pytest.raises(ValueError):
        SystemConfig(resonators=())


def test_symmetric_requires_mirror_partner():
    a = ResonatorSpec(index=1, kappa=1., cavity_detuning=0.5)
    b = ResonatorSpec(index=-1, kappa=1., cavity_detuning=0.3)
    with pytest.raises(ValueError):
        SystemConfig(resonators=(a, b), symmetric=True)
    c = ResonatorSpec(index=-2, kappa=1., cavity_detuning=0.3)
    with pytest.raises(ValueError):
        SystemConfig(resonators=(a, c), symmetric=True)


def test_with_params_keeps_symmetry():
    cfg = published_config().with_params(gamma=0.02)
    assert cfg.symmetric
    assert all(r.gamma == 0.02 for r in cfg.resonators)
    assert cfg.lossless() == published_config()


def one_function_to_run_them_all():
    test_functions = [
        obj for name, obj in inspect.getmembers(sys.modules[__name__])
        if (inspect.isfunction(obj)
            and name.startswith('test')
            and name != 'all')
    ]

    [f() for f in test_functions]


if __name__ == '__main__':
    one_function_to_run_them_all()
