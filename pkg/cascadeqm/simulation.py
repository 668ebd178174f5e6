import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .transfer import transfer_function
from .utils import check_positive, check_finite

log = logging.getLogger(__name__)

SCHEMES = ['etdrk4', 'rk4']
MAX_STEP_SCALE = 0.1
MIN_PULSE_RESOLUTION = 4.
DELAY_WIDTHS = 6.
RING_DOWN_LEVEL = 1e-10
MAX_DURATION = 1e4
DIVERGENCE_LIMIT = 1e-2
LEDGER_CHECK_INTERVAL = 100
LEAKAGE_LEVEL = 1e-6
CONTOUR_POINTS = 32


class IntegrationError(RuntimeError):
    """
    Raised when the energy ledger of a running simulation diverges.
    """


@dataclass(frozen=True)
class PulseSpec:
    """
    An input pulse a_in,1(t) = A exp(-(t - t0)^2 / (2 sigma^2)) exp(-i w_c t).

    Parameters
    ----------
        duration: float
            RMS width sigma of the amplitude envelope, > 0.
        center_frequency: float (default: 0.)
            Carrier offset w_c of the pulse.
        amplitude: float (default: 1.)
            Peak amplitude A.
        delay: float or None (default: None)
            Peak time t0. If None, 6 sigma so the pulse starts from ~0.
        shape: string (default: 'gaussian')
    """
    duration: float
    center_frequency: float = 0.
    amplitude: float = 1.
    delay: float = None
    shape: str = 'gaussian'

    def __post_init__(self):
        assert self.shape in ['gaussian'], f"unsupported pulse shape {self.shape!r}"
        object.__setattr__(
            self, 'duration', check_positive('duration', self.duration)
        )
        check_finite('center_frequency', self.center_frequency)
        check_finite('amplitude', self.amplitude)
        if self.delay is None:
            object.__setattr__(self, 'delay', DELAY_WIDTHS * self.duration)
        check_finite('delay', self.delay)

    @property
    def end(self):
        # beyond this the envelope is below exp(-18)
        return self.delay + DELAY_WIDTHS * self.duration

    def energy(self):
        """
        Analytic input energy A^2 sigma sqrt(pi).
        """
        return self.amplitude ** 2 * self.duration * np.sqrt(np.pi)


def gaussian_pulse(spec, t):
    t = np.asarray(t, dtype=float)
    envelope = np.exp(-(t - spec.delay) ** 2 / (2 * spec.duration ** 2))

    return spec.amplitude * envelope * np.exp(-1j * spec.center_frequency * t)


def default_time_grid(pulse, dt, t_end=None):
    check_positive('dt', dt)
    if t_end is None:
        t_end = pulse.end
    n = int(round(check_positive('t_end', t_end) / dt))

    return np.arange(n + 1) * dt


@dataclass(frozen=True)
class EnergyLedger:
    """
    Energy bookkeeping of a simulation. Conservation reads

        input - output = cavity + spins + loss
    """
    input: float
    output: float
    cavity: float
    spins: float
    loss: float

    @property
    def imbalance(self):
        return self.input - self.output - self.cavity - self.spins - self.loss

    @property
    def relative_imbalance(self):
        if self.input == 0:
            return abs(self.imbalance)
        return abs(self.imbalance) / self.input

    def as_dict(self):
        return dict(
            input=self.input,
            output=self.output,
            cavity=self.cavity,
            spins=self.spins,
            loss=self.loss,
            imbalance=self.imbalance,
        )


@dataclass(frozen=True, eq=False)
class SimulationResult:
    """
    Parameters
    ----------
        time_grid: (n,) array of floats
        input_series: (n,) complex array
            a_in,1(t).
        output_series: (n,) complex array
            a_out,N(t).
        cavity_series: (R, n) complex array
            b_n(t) in cascade order.
        final_spins: list of complex arrays
            s_n,j(t_end) per resonator.
        integrals: (3,) array of floats
            Integrated input, output and intrinsic-loss energies.
        dt: float
        scheme: string
    """
    time_grid: np.ndarray
    input_series: np.ndarray
    output_series: np.ndarray
    cavity_series: np.ndarray
    final_spins: list
    integrals: np.ndarray
    dt: float
    scheme: str

    @property
    def ledger(self):
        return energy_ledger(self)


class _Cascade:
    """
    Right-hand side of the cascade equations split into a diagonal linear
    part L and the couplings N, on one flat state vector

        [b_1 .. b_R, s_1,1 .. s_R,Mmax, E_in, E_out, E_loss]

    with the spin ensembles zero-padded to a common size.
    """

    def __init__(self, cfg, ensembles, pulse):
        if len(ensembles) != cfg.n_resonators:
            raise ValueError(
                f"expected {cfg.n_resonators} ensembles, got {len(ensembles)}"
            )
        self.pulse = pulse
        self.R = cfg.n_resonators
        self.M = max(e.size for e in ensembles)
        res = cfg.resonators
        self.sqrt_kappa = np.sqrt([r.kappa for r in res])
        self.gamma = np.array([r.gamma for r in res])
        self.couplings = np.zeros((self.R, self.M))
        detunings = np.zeros((self.R, self.M))
        for n, (r, e) in enumerate(zip(res, ensembles)):
            self.couplings[n, :e.size] = e.couplings
            detunings[n, :e.size] = r.center(cfg.comb_spacing) + e.detunings
            # padding spins are uncoupled and never excited
            detunings[n, e.size:] = r.center(cfg.comb_spacing)
        self.spin_frequencies = detunings
        positions = np.array([r.position for r in res])
        self.phases = np.exp(
            1j * cfg.central_frequency * np.diff(positions)
            / cfg.propagation_speed
        )
        self.L = np.concatenate((
            -(1j * np.array([r.cavity_detuning for r in res])
              + self.gamma + np.array([r.kappa for r in res]) / 2),
            (-1j * detunings).ravel(),
            np.zeros(3),
        ))

    @property
    def size(self):
        return self.R + self.R * self.M + 3

    def unpack(self, u):
        b = u[:self.R]
        s = u[self.R:self.R + self.R * self.M].reshape(self.R, self.M)
        return b, s, u[-3:].real

    def ports(self, a, b):
        """
        Input amplitudes of every resonator and the cascade output.
        """
        a_in = np.empty(self.R, dtype=complex)
        current = a
        for n in range(self.R):
            a_in[n] = current
            current = current - self.sqrt_kappa[n] * b[n]
            if n + 1 < self.R:
                current = current * self.phases[n]

        return a_in, current

    def N(self, u, t):
        b, s, _ = self.unpack(u)
        a = gaussian_pulse(self.pulse, t)[()]
        a_in, a_out = self.ports(a, b)
        db = -1j * np.sum(self.couplings * s, axis=1) + self.sqrt_kappa * a_in
        ds = -1j * self.couplings * b[:, None]
        dE = [
            abs(a) ** 2,
            abs(a_out) ** 2,
            np.sum(2 * self.gamma * np.abs(b) ** 2),
        ]

        return np.concatenate((db, ds.ravel(), dE))

    def f(self, u, t):
        return self.L * u + self.N(u, t)

    def ledger(self, u):
        b, s, integrals = self.unpack(u)
        return EnergyLedger(
            input=float(integrals[0]),
            output=float(integrals[1]),
            cavity=float(np.sum(np.abs(b) ** 2)),
            spins=float(np.sum(np.abs(s) ** 2)),
            loss=float(integrals[2]),
        )


def etdrk4_coefficients(L, h, points=CONTOUR_POINTS):
    """
    Exponential time differencing RK4 coefficients for a diagonal linear
    part, evaluated as contour means on unit circles around h L so that
    small |h L| does not cancel catastrophically.

    Returns
    -------
        E, E2, Q, f1, f2, f3: arrays shaped like L
    """
    z = h * np.asarray(L, dtype=complex)
    r = np.exp(2j * np.pi * (np.arange(1, points + 1) - 0.5) / points)
    LR = z[:, None] + r[None, :]
    LR3 = LR ** 3
    eLR = np.exp(LR)

    Q = h * np.mean((np.exp(LR / 2) - 1) / LR, axis=1)
    f1 = h * np.mean((-4 - LR + eLR * (4 - 3 * LR + LR ** 2)) / LR3, axis=1)
    f2 = h * np.mean((2 + LR + eLR * (LR - 2)) / LR3, axis=1)
    f3 = h * np.mean((-4 - 3 * LR - LR ** 2 + eLR * (4 - LR)) / LR3, axis=1)

    return np.exp(z), np.exp(z / 2), Q, f1, f2, f3


def _etdrk4_stepper(system, h):
    E, E2, Q, f1, f2, f3 = etdrk4_coefficients(system.L, h)

    def step(u, t):
        Nu = system.N(u, t)
        a = E2 * u + Q * Nu
        Na = system.N(a, t + h / 2)
        b = E2 * u + Q * Na
        Nb = system.N(b, t + h / 2)
        c = E2 * a + Q * (2 * Nb - Nu)
        Nc = system.N(c, t + h)
        return E * u + f1 * Nu + 2 * f2 * (Na + Nb) + f3 * Nc

    return step


def _rk4_stepper(system, h):
    def step(u, t):
        k1 = system.f(u, t)
        k2 = system.f(u + 0.5 * h * k1, t + h / 2)
        k3 = system.f(u + 0.5 * h * k2, t + h / 2)
        k4 = system.f(u + h * k3, t + h)
        return u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    return step


def _check_step(cfg, system, dt, scheme):
    rates = [r.kappa for r in cfg.resonators]
    rates += [abs(r.cavity_detuning) for r in cfg.resonators]
    rates += [abs(r.center(cfg.comb_spacing)) for r in cfg.resonators]
    rates += [r.g_collective for r in cfg.resonators]
    if scheme == 'rk4':
        rates.append(np.max(np.abs(system.spin_frequencies)))
    fastest = max(rates)
    if dt * fastest > MAX_STEP_SCALE:
        raise ValueError(
            f"dt={dt!r} does not resolve the fastest rate {fastest:.4g} "
            f"of scheme {scheme}: need dt <= {MAX_STEP_SCALE / fastest:.4g}"
        )


def check_pulse_resolution(pulse, dt):
    nyquist = np.pi / dt
    resolution = pulse.duration * (nyquist - abs(pulse.center_frequency))
    if resolution < MIN_PULSE_RESOLUTION:
        warnings.warn(
            f"pulse spectrum is not resolved by dt={dt!r}: sigma * "
            f"(pi/dt - |w_c|) = {resolution:.3g} < {MIN_PULSE_RESOLUTION}",
            stacklevel=3
        )


def integrate(cfg, ensembles, pulse, dt, t_end=None, scheme='etdrk4'):
    """
    Integrate the cascade equations with discrete spin ensembles in the
    time domain, the brute-force reference for the transfer function.

        ds_n,j/dt = -i (D~_n + delta_n,j) s_n,j - i g_n,j b_n
        db_n/dt = -(i D_n + gamma_n + k_n/2) b_n - i sum_j g_n,j s_n,j
                  + sqrt(k_n) a_in,n
        a_out,n = a_in,n - sqrt(k_n) b_n
        a_in,n+1 = exp(i phi_n) a_out,n

    Resonators are driven without retardation; only the carrier phases
    phi_n = w0 (z_n+1 - z_n) / c are kept.

    Parameters
    ----------
        cfg: SystemConfig
        ensembles: list of DiscreteEnsemble
            One per resonator, in cascade order.
        pulse: PulseSpec
        dt: float
            Fixed step, dt * max(kappa, |D|, |D~|, G) <= 0.1.
        t_end: float or None (default: None)
            If None, run past the pulse until the cavities have rung down
            (sum |b|^2 < 1e-10 * input energy), at most 1e4 time units.
        scheme: string (default: 'etdrk4')
            'etdrk4' integrates the diagonal part exactly, 'rk4' is the
            classic explicit scheme and has to resolve every spin detuning.

    Returns
    -------
        result: SimulationResult
    """
    assert scheme in SCHEMES, f"scheme must be one of {SCHEMES}"
    check_positive('dt', dt)
    if t_end is not None:
        check_positive('t_end', t_end)
    system = _Cascade(cfg, ensembles, pulse)
    _check_step(cfg, system, dt, scheme)
    check_pulse_resolution(pulse, dt)
    if len({r.position for r in cfg.resonators}) > 1:
        log.warning(
            "resonator positions differ; retardation between resonators is "
            "neglected in the time domain"
        )

    step = (
        _etdrk4_stepper(system, dt) if scheme == 'etdrk4'
        else _rk4_stepper(system, dt)
    )
    if t_end is None:
        n_max = int(np.ceil(MAX_DURATION / dt))
        n_min = int(np.ceil(pulse.end / dt))
    else:
        n_max = n_min = int(round(t_end / dt))

    u = np.zeros(system.size, dtype=complex)
    times, cavities, outputs, inputs = [0.], [u[:system.R].copy()], [], []
    a = gaussian_pulse(pulse, 0.)[()]
    inputs.append(a)
    outputs.append(system.ports(a, u[:system.R])[1])

    log.debug(
        "integrating %d resonators x %d spins with %s, dt=%g",
        system.R, system.M, scheme, dt
    )
    for i in range(n_max):
        t = i * dt
        u = step(u, t)
        t = (i + 1) * dt
        b = u[:system.R]
        a = gaussian_pulse(pulse, t)[()]
        times.append(t)
        cavities.append(b.copy())
        inputs.append(a)
        outputs.append(system.ports(a, b)[1])

        if (i + 1) % LEDGER_CHECK_INTERVAL == 0 or i + 1 == n_max:
            check_ledger(system.ledger(u), t)
        if i + 1 >= n_min:
            if t_end is not None:
                break
            ledger = system.ledger(u)
            if ledger.cavity <= RING_DOWN_LEVEL * ledger.input:
                log.debug("cavities rung down at t=%g", t)
                break
    else:
        if t_end is None:
            log.warning(
                "cavities did not ring down within %g time units", MAX_DURATION
            )

    ledger = system.ledger(u)
    check_ledger(ledger, times[-1])
    _, spins, integrals = system.unpack(u)

    return SimulationResult(
        time_grid=np.array(times),
        input_series=np.array(inputs),
        output_series=np.array(outputs),
        cavity_series=np.array(cavities).T,
        final_spins=[
            spins[n, :e.size].copy() for n, e in enumerate(ensembles)
        ],
        integrals=np.array(integrals, dtype=float),
        dt=float(dt),
        scheme=scheme,
    )


def check_ledger(ledger, t):
    if ledger.input == 0:
        return
    if not np.isfinite(ledger.imbalance) or (
        ledger.relative_imbalance > DIVERGENCE_LIMIT
    ):
        raise IntegrationError(
            f"energy ledger diverged at t={t:.6g}: relative imbalance "
            f"{ledger.relative_imbalance:.3e} (input {ledger.input:.6g}, "
            f"output {ledger.output:.6g}, cavity {ledger.cavity:.6g}, "
            f"spins {ledger.spins:.6g}, loss {ledger.loss:.6g})"
        )


def energy_ledger(result):
    """
    Energy ledger of a finished simulation: integrated input, output and
    intrinsic-loss energies, the energy left in the cavities and the energy
    stored in the spins at t_end.
    """
    return EnergyLedger(
        input=float(result.integrals[0]),
        output=float(result.integrals[1]),
        cavity=float(np.sum(np.abs(result.cavity_series[:, -1]) ** 2)),
        spins=float(sum(np.sum(np.abs(s) ** 2) for s in result.final_spins)),
        loss=float(result.integrals[2]),
    )


def frequency_propagate(cfg, input_series, time_grid, padding=2):
    """
    Linear-response propagation of an input series through the cascade:
    the output is the inverse transform of S(w) times the transform of the
    input, with the Fourier kernel exp(-i w t).

    Parameters
    ----------
        cfg: SystemConfig
        input_series: (n,) complex array
            Should decay to ~0 at both ends of the grid.
        time_grid: (n,) array of floats
            Uniformly spaced.
        padding: int (default: 2)
            The series is zero-padded to padding * n samples.

    Returns
    -------
        output_series: (n,) complex array
    """
    x = np.asarray(input_series, dtype=complex)
    t = np.asarray(time_grid, dtype=float)
    assert x.shape == t.shape and x.ndim == 1, (
        "input series and time grid must be 1D with equal length"
    )
    if len(t) < 2:
        raise ValueError("time grid needs at least 2 points")
    dt = t[1] - t[0]
    if dt <= 0 or not np.allclose(np.diff(t), dt, rtol=1e-9, atol=0):
        raise ValueError("time grid must be uniformly ascending")

    peak = np.max(np.abs(x))
    if peak > 0 and max(abs(x[0]), abs(x[-1])) > LEAKAGE_LEVEL * peak:
        warnings.warn(
            "input does not decay at the grid edges; expect spectral leakage",
            stacklevel=2
        )

    n = padding * len(x)
    spectrum = np.fft.fft(x, n)
    # numpy's forward kernel is exp(-2 pi i f t), i.e. w = -2 pi f
    omega = -2 * np.pi * np.fft.fftfreq(n, dt)

    return np.fft.ifft(transfer_function(cfg, omega) * spectrum)[:len(x)]


def relative_l2(a, b, reference=None):
    """
    ||a - b|| / ||reference||, with reference defaulting to b.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    norm = np.linalg.norm(b if reference is None else reference)
    if norm == 0:
        return float(np.linalg.norm(a - b))
    return float(np.linalg.norm(a - b) / norm)
