import dataclasses
import logging
from dataclasses import dataclass, field
from multiprocessing import Pool

import numpy as np
from scipy.optimize import least_squares

from .system import SystemConfig, ResonatorSpec
from .transfer import transfer_function, numerator_product, SingularityError
from .utils import check_positive

log = logging.getLogger(__name__)

PER_RESONATOR = ['g_collective', 'cavity_detuning', 'kappa']
SHARED = ['linewidth']
FREE_FULL = frozenset(SHARED + PER_RESONATOR)
# kappa held at its template value
FREE_STRICT = frozenset(['linewidth', 'g_collective', 'cavity_detuning'])
FREE_PRESETS = {'full': FREE_FULL, 'strict': FREE_STRICT}

RESIDUAL_MODES = ['numerator', 'reflection']
CENTER_WEIGHT_FACTOR = 1e3
POSITIVE_FLOOR = 1e-6
SPECTRAL_SPANS = ['half', 'edge']


def default_spectral_points(N_half, comb_spacing=1., span='half'):
    """
    Spectral points {0} U {m * step, m = 1..N_opt} with N_opt = 2 N_half - 1
    and D~_edge = D (N_half - 1/2) the outermost spin line center.

    With span 'half' the step is D~_edge / (2 N_opt), so the points cover
    the inner half of the band; with 'edge' it is D~_edge / N_opt and the
    last point sits on the band edge.

    Parameters
    ----------
        N_half: int
            Number of resonators on each side of the carrier, >= 1.
        comb_spacing: float (default: 1.)
        span: string (default: 'half')
            One of 'half' or 'edge'.

    Returns
    -------
        points: (N_opt + 1,) array of floats
    """
    if int(N_half) != N_half or N_half < 1:
        raise ValueError(f"N_half must be a positive integer, got {N_half!r}")
    if span not in SPECTRAL_SPANS:
        raise ValueError(f"span must be one of {SPECTRAL_SPANS}, got {span!r}")
    n_opt = 2 * int(N_half) - 1
    edge = comb_spacing * (N_half - 0.5)
    step = edge / n_opt if span == 'edge' else edge / (2 * n_opt)

    return np.concatenate(([0.], np.arange(1, n_opt + 1) * step))


def default_bounds(cfg):
    """
    kappa, G in (0, 10 D], linewidth in (0, 5 D], cavity detunings in
    [-N D, N D] with N the number of resonators.
    """
    d = cfg.comb_spacing
    n = cfg.n_resonators

    return {
        'kappa': (POSITIVE_FLOOR * d, 10. * d),
        'g_collective': (POSITIVE_FLOOR * d, 10. * d),
        'linewidth': (POSITIVE_FLOOR * d, 5. * d),
        'cavity_detuning': (-n * d, n * d),
    }


@dataclass(frozen=True, eq=False)
class OptimizationProblem:
    """
    Spectral-point optimization of a cascade template.

    Parameters
    ----------
        template: SystemConfig
            Supplies the fixed parameters and the resonator layout.
        free: set of strings or 'full'/'strict' (default: 'full')
            Which of linewidth (shared), g_collective, cavity_detuning and
            kappa (per resonator) are optimized.
        enforce_symmetry: bool (default: True)
            Optimize only the positive-index half and mirror it.
        spectral_points: array of floats or None (default: None)
            If None, default_spectral_points for the template size.
        spectral_span: string (default: 'half')
            Span of the default spectral points, 'half' or 'edge'.
        center_constraint_weight: float or None (default: None)
            Weight w0 of the S(0) term, default 1e3 * N_opt.
        bounds: dict or None (default: None)
            Per-parameter (lo, hi) overriding default_bounds.
        residual_mode: string (default: 'numerator')
            'numerator' drives numer(S) to zero, 'reflection' S itself.
        trust_region: float or None (default: None)
            If given, every free parameter x0 of the template is further
            confined to x0 +- trust_region |x0| (+- trust_region D when x0
            is zero), which turns the optimization into a local refinement
            of the template.
    """
    template: SystemConfig
    free: frozenset = FREE_FULL
    enforce_symmetry: bool = True
    spectral_points: np.ndarray = None
    center_constraint_weight: float = None
    bounds: dict = None
    residual_mode: str = 'numerator'
    spectral_span: str = 'half'
    trust_region: float = None
    layout: tuple = field(default=(), repr=False)
    lower: np.ndarray = field(default=None, init=False, repr=False)
    upper: np.ndarray = field(default=None, init=False, repr=False)

    def __post_init__(self):
        free = self.free
        if isinstance(free, str):
            assert free in FREE_PRESETS, f"unknown free preset {free!r}"
            free = FREE_PRESETS[free]
        free = frozenset(free)
        unknown = free - FREE_FULL
        if unknown:
            raise ValueError(f"unknown free parameters {sorted(unknown)}")
        if not free:
            raise ValueError("at least one free parameter is required")
        object.__setattr__(self, 'free', free)

        assert self.residual_mode in RESIDUAL_MODES, (
            f"residual_mode must be one of {RESIDUAL_MODES}"
        )
        if self.spectral_span not in SPECTRAL_SPANS:
            raise ValueError(
                f"spectral_span must be one of {SPECTRAL_SPANS}, "
                f"got {self.spectral_span!r}"
            )

        template = self.template
        if self.enforce_symmetry and not template.symmetric:
            template = symmetrize(template)
            object.__setattr__(self, 'template', template)

        points = self.spectral_points
        if points is None:
            n_half = max(1, (template.n_resonators + 1) // 2)
            points = default_spectral_points(
                n_half, template.comb_spacing, self.spectral_span
            )
        points = np.asarray(points, dtype=float).reshape(-1)
        if len(np.unique(points)) != len(points):
            raise ValueError("spectral points must be distinct")
        object.__setattr__(self, 'spectral_points', points)

        weight = self.center_constraint_weight
        if weight is None:
            weight = CENTER_WEIGHT_FACTOR * max(1, len(self.edge_points))
        object.__setattr__(
            self, 'center_constraint_weight', check_positive('weight', weight)
        )

        bounds = default_bounds(template)
        bounds.update(self.bounds or {})
        for name in ['kappa', 'g_collective', 'linewidth']:
            lo, hi = bounds[name]
            if not 0 < lo < hi:
                raise ValueError(
                    f"bounds for {name} must satisfy 0 < lo < hi, got {(lo, hi)}"
                )
        object.__setattr__(self, 'bounds', bounds)
        object.__setattr__(self, 'layout', self._layout())
        self._set_limits()

    @property
    def edge_points(self):
        return self.spectral_points[self.spectral_points != 0]

    @property
    def independent(self):
        if self.enforce_symmetry:
            return self.template.half
        return self.template.resonators

    def _layout(self):
        layout = []
        if 'linewidth' in self.free:
            layout.append(('linewidth', None))
        for res in self.independent:
            for name in PER_RESONATOR:
                if name in self.free:
                    layout.append((name, res.index))

        return tuple(layout)

    def _set_limits(self):
        lower = np.array([self.bounds[name][0] for name, _ in self.layout])
        upper = np.array([self.bounds[name][1] for name, _ in self.layout])
        if self.trust_region is not None:
            r = check_positive('trust_region', self.trust_region)
            x = self.encode(self.template)
            span = np.where(x != 0, r * np.abs(x), r * self.template.comb_spacing)
            lower = np.maximum(lower, x - span)
            upper = np.minimum(upper, x + span)
            if np.any(lower >= upper):
                i = int(np.argmax(lower >= upper))
                raise ValueError(
                    f"template parameter {self.layout[i]} = {x[i]!r} lies "
                    f"outside its bounds"
                )
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)

    def encode(self, cfg):
        """
        Parameter vector of a config laid out like this problem.
        """
        params = []
        for name, index in self.layout:
            if name == 'linewidth':
                params.append(cfg.resonators[0].spin_linewidth)
            else:
                params.append(getattr(cfg.resonator(index), name))

        return np.array(params, dtype=float)

    def decode(self, params):
        """
        The config described by a parameter vector.
        """
        params = np.asarray(params, dtype=float)
        if len(params) != len(self.layout):
            raise ValueError(
                f"expected {len(self.layout)} parameters, got {len(params)}"
            )
        updates = {r.index: {} for r in self.independent}
        shared = {}
        for (name, index), value in zip(self.layout, params):
            if name == 'linewidth':
                shared['spin_linewidth'] = value
            else:
                updates[index][name] = value
        resonators = [
            dataclasses.replace(r, **shared, **updates[r.index])
            for r in self.independent
        ]

        return self.template.replace_resonators(
            resonators, symmetric=self.enforce_symmetry
        )

    def check_bounds(self, params):
        params = np.asarray(params, dtype=float)
        outside = (params < self.lower) | (params > self.upper)
        if np.any(outside):
            i = int(np.argmax(outside))
            name, index = self.layout[i]
            raise ValueError(
                f"parameter {name} (resonator {index}) = {params[i]!r} outside "
                f"bounds {(self.lower[i], self.upper[i])}"
            )

    def random_start(self, rng):
        return rng.uniform(self.lower, self.upper)


def residuals(params, problem):
    """
    Real residual vector whose squared norm is the objective:
    sqrt(w0) [Re, Im] r(0) followed by [Re, Im] r(w_m) for every nonzero
    spectral point, with r = numer(S) or S depending on the residual mode.
    """
    cfg = problem.decode(params)
    evaluate = (
        numerator_product if problem.residual_mode == 'numerator'
        else transfer_function
    )
    center = evaluate(cfg, 0.) * np.sqrt(problem.center_constraint_weight)
    edge = evaluate(cfg, problem.edge_points)

    return np.concatenate((
        [center.real, center.imag], edge.real, edge.imag
    ))


def objective(params, problem):
    """
    w0 |r(0)|^2 + sum_m |r(w_m)|^2, where r is numer(S) in the default
    mode. Nonnegative; zero only if r vanishes at every spectral point.
    """
    problem.check_bounds(params)
    return float(np.sum(residuals(params, problem) ** 2))


@dataclass(frozen=True, eq=False)
class OptimizationResult:
    config: SystemConfig
    objective: float
    residuals: np.ndarray
    reflection: np.ndarray
    restart: int
    iterations: int
    converged: bool
    seed: int
    spectral_points: np.ndarray = None
    objectives: tuple = ()

    def summary(self):
        return dict(
            objective=self.objective,
            restart=self.restart,
            iterations=self.iterations,
            converged=self.converged,
            seed=self.seed,
        )


def symmetrize(cfg):
    """
    Copy the parameters of every +n resonator onto -n, negating the cavity
    detuning and the spin line center. Missing -n partners are generated.

    Parameters
    ----------
        cfg: SystemConfig

    Returns
    -------
        cfg: SystemConfig
            A mirror-symmetric cascade.
    """
    positive = {r.index for r in cfg.resonators if r.index > 0}
    for r in cfg.resonators:
        if r.index < 0 and -r.index not in positive:
            raise ValueError(
                f"cannot symmetrize: index {r.index} has no partner {-r.index}"
            )
    half = [r for r in cfg.resonators if r.index > 0]

    return cfg.replace_resonators(half, symmetric=True)


def perturb(cfg, scale, rng, problem):
    """
    Multiply every free parameter by (1 + u), u uniform in [-scale, scale],
    clipped back into the problem bounds.
    """
    params = problem.encode(cfg)
    params = params * (1 + rng.uniform(-scale, scale, size=params.shape))

    return problem.decode(np.clip(params, problem.lower, problem.upper))


def parameter_deviation(cfg, reference):
    """
    Largest relative deviation of kappa, cavity detuning, G and linewidth
    of any resonator of cfg from the resonator with the same index in
    reference.

    Returns
    -------
        deviation: float
        where: (index, name) of the largest deviation
    """
    worst, where = 0., None
    for ref in reference.resonators:
        res = cfg.resonator(ref.index)
        for name in ['kappa', 'cavity_detuning', 'g_collective', 'spin_linewidth']:
            x0 = getattr(ref, name)
            if x0 == 0:
                continue
            d = abs(getattr(res, name) - x0) / abs(x0)
            if d > worst:
                worst, where = d, (ref.index, name)

    return worst, where


def _solve(job):
    problem, x0, restart, max_nfev = job
    x0 = np.clip(x0, problem.lower, problem.upper)
    try:
        fit = least_squares(
            residuals, x0, args=(problem,),
            bounds=(problem.lower, problem.upper),
            method='trf', x_scale='jac',
            xtol=1e-15, ftol=1e-15, gtol=1e-15,
            max_nfev=max_nfev,
        )
        x, nfev = fit.x, fit.nfev
    except SingularityError as e:
        log.warning("restart %d hit a singular configuration: %s", restart, e)
        x, nfev = x0, 0
    try:
        value = objective(x, problem)
    except SingularityError:
        value = np.inf
    log.debug("restart %d: objective %.3e after %d evaluations", restart, value, nfev)

    return restart, x, value, nfev


def optimize(
    problem,
    seed_config=None,
    restarts=1,
    tolerance=1e-8,
    seed=0,
    max_nfev=2000,
    processes=1,
):
    """
    Multi-start bounded least-squares minimization of the spectral-point
    objective.

    Parameters
    ----------
        problem: OptimizationProblem
        seed_config: SystemConfig or None (default: None)
            Start of restart 0. If None every restart starts from a point
            drawn uniformly inside the bounds.
        restarts: int (default: 1)
            Number of starts, >= 1.
        tolerance: float (default: 1e-8)
            The result is flagged converged when its objective is below.
        seed: int (default: 0)
            Seed of the random starts; identical seeds give identical
            results whatever the number of processes.
        max_nfev: int (default: 2000)
            Maximum residual evaluations per restart.
        processes: int (default: 1)
            Run restarts in a process pool when > 1.

    Returns
    -------
        result: OptimizationResult
            The lowest objective over all restarts, ties going to the
            lowest restart index. Never raises on non-convergence.
    """
    if int(restarts) != restarts or restarts < 1:
        raise ValueError(f"restarts must be a positive integer, got {restarts!r}")
    check_positive('tolerance', tolerance)

    streams = np.random.SeedSequence(seed).spawn(int(restarts))
    jobs = []
    for i, stream in enumerate(streams):
        if i == 0 and seed_config is not None:
            if problem.enforce_symmetry:
                seed_config = symmetrize(seed_config)
            x0 = problem.encode(seed_config)
        else:
            x0 = problem.random_start(np.random.default_rng(stream))
        jobs.append((problem, x0, i, max_nfev))

    if processes > 1 and len(jobs) > 1:
        with Pool(processes) as pool:
            outcomes = pool.map(_solve, jobs)
    else:
        outcomes = [_solve(job) for job in jobs]

    # stable: lowest objective, then lowest restart index
    restart, x, value, nfev = min(outcomes, key=lambda o: (o[2], o[0]))
    cfg = problem.decode(x)
    evaluate = (
        numerator_product if problem.residual_mode == 'numerator'
        else transfer_function
    )
    log.info(
        "best of %d restarts: restart %d, objective %.3e", restarts, restart, value
    )

    return OptimizationResult(
        config=cfg,
        objective=value,
        residuals=evaluate(cfg, problem.spectral_points),
        reflection=np.abs(transfer_function(cfg, problem.spectral_points)) ** 2,
        restart=restart,
        iterations=nfev,
        converged=bool(value < tolerance),
        seed=seed,
        spectral_points=problem.spectral_points,
        objectives=tuple(o[2] for o in sorted(outcomes, key=lambda o: o[0])),
    )
