import dataclasses
from dataclasses import dataclass, field

from .utils import sgn, check_finite, check_positive

# published four-resonator optimum, positive-index half, units of the comb
# spacing
PUBLISHED_LINEWIDTH = 1.8
PUBLISHED_HALF = [
    dict(index=1, kappa=3.27, cavity_detuning=0.48, g_collective=1.78),
    dict(index=2, kappa=2.03, cavity_detuning=1.13, g_collective=1.49),
]

SYMMETRY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class ResonatorSpec:
    """
    Spectroscopic parameters of one ring resonator and the spin ensemble it
    holds. All rates are dimensionless frequencies in units of the comb
    spacing.

    Parameters
    ----------
        index: int
            Signed label n of the resonator, n != 0.
        kappa: float
            Coupling rate to the common waveguide, > 0.
        cavity_detuning: float
            Detuning of the cavity mode from the carrier.
        gamma: float (default: 0.)
            Intrinsic (non-waveguide) amplitude decay rate, >= 0.
        g_collective: float (default: 0.)
            Collective spin-field coupling sqrt(N_n) * g_n, >= 0.
        spin_linewidth: float (default: 1.)
            Lorentzian HWHM of the inhomogeneous broadening, > 0.
        spin_center: float or None (default: None)
            Center of the spin line. If None, it is assigned from the comb
            spacing D as D * (n - sgn(n) / 2) by SystemConfig.
        position: float (default: 0.)
            Coordinate along the waveguide, only affects phases.
    """
    index: int
    kappa: float
    cavity_detuning: float
    gamma: float = 0.
    g_collective: float = 0.
    spin_linewidth: float = 1.
    spin_center: float = None
    position: float = 0.

    def __post_init__(self):
        if int(self.index) != self.index or self.index == 0:
            raise ValueError(
                f"resonator index must be a nonzero integer, got {self.index!r}"
            )
        object.__setattr__(self, 'index', int(self.index))
        object.__setattr__(self, 'kappa', check_positive('kappa', self.kappa))
        object.__setattr__(
            self, 'gamma', check_positive('gamma', self.gamma, strict=False)
        )
        object.__setattr__(
            self, 'g_collective',
            check_positive('g_collective', self.g_collective, strict=False)
        )
        object.__setattr__(
            self, 'spin_linewidth',
            check_positive('spin_linewidth', self.spin_linewidth)
        )
        object.__setattr__(
            self, 'cavity_detuning',
            float(check_finite('cavity_detuning', self.cavity_detuning))
        )
        object.__setattr__(
            self, 'position', float(check_finite('position', self.position))
        )
        if self.spin_center is not None:
            object.__setattr__(
                self, 'spin_center',
                float(check_finite('spin_center', self.spin_center))
            )

    def center(self, comb_spacing=1.):
        """
        The spin line center, falling back to the comb default.
        """
        if self.spin_center is not None:
            return self.spin_center
        return default_spin_center(self.index, comb_spacing)

    def mirrored(self):
        """
        The partner resonator -n with detunings negated and all rates
        copied.
        """
        return dataclasses.replace(
            self,
            index=-self.index,
            cavity_detuning=-self.cavity_detuning,
            spin_center=(
                None if self.spin_center is None else -self.spin_center
            ),
        )

    def as_dict(self):
        return dataclasses.asdict(self)


def default_spin_center(index, comb_spacing=1.):
    return comb_spacing * (index - sgn(index) / 2)


@dataclass(frozen=True)
class SystemConfig:
    """
    An ordered cascade of resonators along one waveguide.

    Parameters
    ----------
        resonators: list of ResonatorSpec
            Cascade order along the waveguide. If symmetric is set, either
            the positive-index half or an already mirror-consistent full set
            may be given; the negative half is generated by mirroring and
            the cascade is ordered by index.
        comb_spacing: float (default: 1.)
            The frequency unit D > 0.
        central_frequency: float (default: 0.)
            Carrier frequency w0, only enters phases.
        symmetric: bool (default: False)
            Generate the cascade by mirroring the positive-index half.
        propagation_speed: float (default: 1.)
            Waveguide speed c used in the propagation phase, > 0.
    """
    resonators: tuple
    comb_spacing: float = 1.
    central_frequency: float = 0.
    symmetric: bool = False
    propagation_speed: float = 1.
    _half: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        resonators = tuple(self.resonators)
        if len(resonators) == 0:
            raise ValueError("a cascade needs at least one resonator")
        for r in resonators:
            assert isinstance(r, ResonatorSpec), "resonators must be ResonatorSpec"

        object.__setattr__(
            self, 'comb_spacing',
            check_positive('comb_spacing', self.comb_spacing)
        )
        object.__setattr__(
            self, 'propagation_speed',
            check_positive('propagation_speed', self.propagation_speed)
        )
        object.__setattr__(
            self, 'central_frequency',
            float(check_finite('central_frequency', self.central_frequency))
        )
        object.__setattr__(self, 'symmetric', bool(self.symmetric))

        # resolve default spin line centers against the comb spacing
        resonators = tuple(
            r if r.spin_center is not None
            else dataclasses.replace(r, spin_center=r.center(self.comb_spacing))
            for r in resonators
        )

        if self.symmetric:
            resonators = self._mirror(resonators)

        indices = [r.index for r in resonators]
        if len(set(indices)) != len(indices):
            raise ValueError(f"resonator indices must be distinct, got {indices}")

        object.__setattr__(self, 'resonators', resonators)

    def _mirror(self, resonators):
        positive = sorted(
            (r for r in resonators if r.index > 0), key=lambda r: r.index
        )
        negative = {r.index: r for r in resonators if r.index < 0}
        if len({r.index for r in positive}) != len(positive):
            raise ValueError("resonator indices must be distinct")
        for index, r in negative.items():
            partner = [p for p in positive if p.index == -index]
            if not partner:
                raise ValueError(
                    f"symmetric cascade: index {index} has no partner {-index}"
                )
            if not _mirror_consistent(partner[0].mirrored(), r):
                raise ValueError(
                    f"symmetric cascade: resonator {index} is not the mirror "
                    f"image of resonator {-index}"
                )
        object.__setattr__(self, '_half', tuple(positive))
        full = [p.mirrored() for p in positive] + positive

        return tuple(sorted(full, key=lambda r: r.index))

    @property
    def half(self):
        """
        The independent positive-index resonators of a symmetric cascade.
        """
        return self._half if self.symmetric else self.resonators

    @property
    def n_resonators(self):
        return len(self.resonators)

    @property
    def indices(self):
        return [r.index for r in self.resonators]

    def resonator(self, index):
        for r in self.resonators:
            if r.index == index:
                return r
        raise KeyError(f"no resonator with index {index}")

    @property
    def kappa_1(self):
        """
        Coupling rate of resonator 1, or of the first one in the cascade if
        there is no index 1. Loss ratios are quoted against it.
        """
        try:
            return self.resonator(1).kappa
        except KeyError:
            return self.resonators[0].kappa

    def replace_resonators(self, resonators, symmetric=None):
        return SystemConfig(
            resonators=tuple(resonators),
            comb_spacing=self.comb_spacing,
            central_frequency=self.central_frequency,
            symmetric=self.symmetric if symmetric is None else symmetric,
            propagation_speed=self.propagation_speed,
        )

    def with_params(self, **kwargs):
        """
        Copy of the config with the given parameter applied to every
        resonator, e.g. with_params(gamma=0.).
        """
        resonators = self.half if self.symmetric else self.resonators

        return self.replace_resonators(
            [dataclasses.replace(r, **kwargs) for r in resonators]
        )

    def lossless(self):
        return self.with_params(gamma=0.)

    def rescaled(self, factor):
        """
        Express every rate and detuning in a new frequency unit, e.g. to go
        from units of the comb spacing to physical units multiply by the
        comb spacing in rad/s.
        """
        check_positive('factor', factor)
        resonators = self.half if self.symmetric else self.resonators
        scaled = [
            dataclasses.replace(
                r,
                kappa=r.kappa * factor,
                cavity_detuning=r.cavity_detuning * factor,
                gamma=r.gamma * factor,
                g_collective=r.g_collective * factor,
                spin_linewidth=r.spin_linewidth * factor,
                spin_center=r.spin_center * factor,
            )
            for r in resonators
        ]

        return SystemConfig(
            resonators=tuple(scaled),
            comb_spacing=self.comb_spacing * factor,
            central_frequency=self.central_frequency * factor,
            symmetric=self.symmetric,
            propagation_speed=self.propagation_speed,
        )


def _mirror_consistent(a, b):
    fields = [
        'kappa', 'cavity_detuning', 'gamma', 'g_collective',
        'spin_linewidth', 'spin_center'
    ]
    return all(
        abs(getattr(a, f) - getattr(b, f)) <= SYMMETRY_TOLERANCE
        * max(1., abs(getattr(a, f)))
        for f in fields
    )


def from_half(half, linewidth, comb_spacing=1., gamma=0., **kwargs):
    """
    Build a symmetric cascade from a list of positive-index parameter
    dicts sharing one spin linewidth.

    Parameters
    ----------
        half: list of dicts
            Each with keys index, kappa, cavity_detuning, g_collective and
            optionally any other ResonatorSpec field.
        linewidth: float
            The shared spin linewidth.
        comb_spacing: float (default: 1.)
        gamma: float (default: 0.)
            Intrinsic decay applied to every resonator unless a dict sets
            its own.

    Returns
    -------
        config: SystemConfig
    """
    resonators = []
    for h in half:
        params = dict(gamma=gamma, spin_linewidth=linewidth)
        params.update(h)
        resonators.append(ResonatorSpec(**params))

    return SystemConfig(
        resonators=tuple(resonators),
        comb_spacing=comb_spacing,
        symmetric=True,
        **kwargs
    )


def published_config(gamma=0.):
    """
    The published four-resonator configuration with antisymmetric cavity
    detunings (D_{-n} = -D_n), in units of the comb spacing.
    """
    return from_half(PUBLISHED_HALF, PUBLISHED_LINEWIDTH, gamma=gamma)


def all_pass_config():
    """
    The published cascade with the spins removed: every factor is a bare
    lossless cavity and |S| = 1 everywhere.
    """
    return published_config().with_params(g_collective=0.)
