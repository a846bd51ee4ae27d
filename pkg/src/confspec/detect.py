"""Conformal-class decisions from the bounded sign operator.

The decision logic runs two independent evidence channels and only issues
a verdict when they agree:

1. Difference-symbol channel: K = sign(D_B) - U sign(D_A) U* has vanishing
   principal symbol exactly when the two sign operators agree modulo a
   compact (finite-grid: uniformly probe-small) perturbation.
2. Cometric channel: the anticommutator of probed sign symbols recovers
   the normalized cometric, a conformal invariant; the two operators must
   produce matching pairings at every probe point.

The module also recovers conformal factors from the linear frequency
growth of conjugated first-order operators, evaluates the spectral
distance by constrained optimization over band-limited functions, and
extracts multiplication operators from their sample-basis diagonal.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .geometry import Grid, _as_tuple
from .operators import (OperatorMatrix, _lift_scalar, _site_dft,
                        commutator_norm, multiplication_operator)
from .calculus import sign_of
from .probes import (INCONCLUSIVE, NON_VANISHING, VANISHING, SymbolEstimate,
                     TestReport, _probe_responses, probe_symbol,
                     standard_probe, vanishing_symbol_test)

CONFORMAL = "conformal"
NOT_CONFORMAL = "not_conformal"

_TORUS_RAYS = ((1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, -1), (-1, 2),
               (3, 1), (1, 3), (3, -1), (-1, 3), (3, 2), (2, 3), (3, -2), (-2, 3))
_COMETRIC_DIRECTIONS_2D = ((1, 0), (0, 1), (1, 1), (1, -1))


class ProbeConvergenceError(RuntimeError):
    """A required probe failed to converge; carries the failing estimates."""

    def __init__(self, message: str, estimates=()):
        super().__init__(message)
        self.estimates = tuple(estimates)


class GrowthFitError(RuntimeError):
    """Conjugated-operator norms did not follow the fitted growth law."""

    def __init__(self, message: str, fit_residual: float, values=()):
        super().__init__(message)
        self.fit_residual = fit_residual
        self.values = tuple(values)


@dataclass(frozen=True, eq=False)
class CometricEstimate:
    """Normalized cometric pairings recovered at one base point.

    ``matrix[i, j]`` estimates g(d_i, d_j) / (|d_i| |d_j|) for the probed
    directions; the diagonal is normalized to exactly 1.
    """

    point: tuple[float, ...]
    directions: tuple[tuple[int, ...], ...]
    matrix: np.ndarray
    estimates: tuple[SymbolEstimate, ...]
    off_scalar_residual: float

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        self.matrix.flags.writeable = False
        if not np.allclose(m, m.T):
            raise ValueError("pairing matrix must be symmetric")


def recover_normalized_cometric(sign_op: OperatorMatrix, x, directions,
                                band: int | None = None, schedule=None,
                                tolerance: float = 0.05) -> CometricEstimate:
    """Recover normalized cometric pairings from sign-symbol anticommutators.

    Probes the sign operator at each lattice direction, then pairs the
    fitted fiber matrices: the scalar part of (s_i s_j + s_j s_i)/2 is the
    normalized pairing of the two covectors, because squares of sign
    symbols are the identity and cross terms contract against the metric.
    The result is symmetrized and scaled so the diagonal is exactly 1; the
    non-scalar remainder of the anticommutator is reported as a residual.

    Raises ProbeConvergenceError when any direction fails to converge, so
    callers never consume pairings backed by drifting residual sequences.
    """
    x = _as_tuple(x)
    directions = tuple(tuple(int(c) for c in (d if not np.isscalar(d) else (d,)))
                       for d in directions)
    if band is None:
        band = 1
    estimates = []
    for d in directions:
        spec = standard_probe(sign_op.grid.shape, x, d, band=band,
                              schedule=schedule, tolerance=tolerance)
        estimates.append(probe_symbol(sign_op, spec))
    bad = [e for e in estimates if not e.converged]
    if bad:
        worst = max(e.residuals[-1] for e in bad)
        raise ProbeConvergenceError(
            f"{len(bad)} of {len(directions)} direction probes did not converge "
            f"(worst top residual {worst:.3e})", estimates)
    r = sign_op.rank
    d = len(directions)
    raw = np.empty((d, d))
    off_scalar = 0.0
    for i in range(d):
        for j in range(i, d):
            anti = 0.5 * (estimates[i].sigma @ estimates[j].sigma
                          + estimates[j].sigma @ estimates[i].sigma)
            scalar = np.trace(anti) / r
            raw[i, j] = raw[j, i] = scalar.real
            off_scalar = max(off_scalar, float(
                np.linalg.norm(anti - scalar * np.eye(r), 2)))
    if np.mean(np.diag(raw)) < 0:
        raw = -raw
    diag = np.diag(raw)
    if np.any(diag <= 0.5):
        raise ProbeConvergenceError(
            "sign-symbol squares are far from the identity; pairings are "
            f"unreliable (diagonal {diag})", estimates)
    matrix = raw / np.sqrt(np.outer(diag, diag))
    return CometricEstimate(point=x, directions=directions, matrix=matrix,
                            estimates=tuple(estimates), off_scalar_residual=off_scalar)


def recover_conformal_factor(dirac: OperatorMatrix, x, direction=None,
                             schedule=None, band: int | None = None,
                             fit_tolerance: float = 1e-6) -> float:
    """Estimate the conformal factor v(x) from probe-response growth.

    Conjugating a first-order operator by a character of frequency m adds
    m times the symbol slope, so the squared response norm is exactly
    quadratic in m.  The leading coefficient is e^{-2v(x)} times the flat
    squared covector length, which inverts to v(x).

    The quadratic fit residual is checked: on clean inputs it sits at
    rounding level, and anything above ``fit_tolerance`` means the growth
    law failed (wrapped modes, non-metric operator) and raises.
    """
    if dirac.metric is None:
        raise ValueError("factor recovery needs a Dirac operator carrying its metric")
    grid = dirac.grid
    if direction is None:
        direction = (1,) + (0,) * (grid.dim - 1)
    spec = standard_probe(grid.shape, x, direction, band=band, schedule=schedule)
    if len(spec.schedule) < 3:
        raise ValueError("need at least 3 schedule frequencies for a quadratic fit")
    _, responses, _ = _probe_responses(dirac, spec)
    r = dirac.rank
    y = np.array([sum(np.linalg.norm(responses[m][s]) ** 2 for s in range(r)) / r
                  for m in spec.schedule])
    ms = np.array(spec.schedule, dtype=float)
    vander = np.stack([np.ones_like(ms), ms, ms ** 2], axis=1)
    beta, *_ = np.linalg.lstsq(vander, y, rcond=None)
    fit_residual = float(np.linalg.norm(vander @ beta - y) / np.linalg.norm(y))
    if fit_residual > fit_tolerance:
        raise GrowthFitError(
            f"response norms are not quadratic in frequency "
            f"(relative fit residual {fit_residual:.3e})", fit_residual, y)
    alpha = float(beta[2])
    scales = dirac.metric.background.axis_scales()
    flat_sq = sum((s * d) ** 2 for s, d in zip(scales, spec.direction))
    if alpha <= 0:
        raise GrowthFitError("quadratic growth coefficient is not positive",
                             fit_residual, y)
    return float(-0.5 * np.log(alpha / flat_sq))


@dataclass(frozen=True)
class DistanceConfig:
    """Optimizer knobs for the spectral distance."""

    restarts: int = 8
    seed: int = 0
    power_schedule: tuple[int, ...] = (2, 4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048)
    max_iterations: int = 200
    perturbation: float = 0.3

    def __post_init__(self):
        if self.restarts < 8:
            raise ValueError("at least 8 optimizer restarts are required")


@dataclass(frozen=True, eq=False)
class DistanceEstimate:
    """Spectral distance value with its maximizing band-limited function.

    ``coefficients`` holds the cosine block then the sine block for modes
    1..B of the maximizer, already scaled to unit commutator norm.
    """

    value: float
    coefficients: np.ndarray
    constraint_slack: float
    stable: bool
    restart_values: tuple[float, ...]
    x: float
    y: float

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("distances are nonnegative")
        if self.constraint_slack > 1 + 1e-6:
            raise ValueError(
                f"maximizer violates the unit commutator bound: {self.constraint_slack}")
        c = np.asarray(self.coefficients, dtype=float)
        object.__setattr__(self, "coefficients", c)
        self.coefficients.flags.writeable = False


def _smoothed_max(weights_g, u, p):
    """p-norm relaxation of max_j |(W u)_j| and its gradient."""
    wu = weights_g @ u
    z = np.abs(wu)
    mx = z.max()
    if mx == 0.0:
        return 0.0, np.zeros_like(u)
    ratio = z / mx
    total = np.sum(ratio ** p)
    value = mx * total ** (1.0 / p)
    coef = (ratio ** (p - 1)) * np.sign(wu)
    grad = (weights_g.T @ coef) * total ** (1.0 / p - 1.0)
    return value, grad


def connes_distance(dirac: OperatorMatrix, x: float, y: float,
                    band: int | None = None,
                    config: DistanceConfig | None = None) -> DistanceEstimate:
    """Spectral distance sup{a(x) - a(y) : ||[D, M_a]|| <= 1} on a circle.

    The supremum is restricted to real trigonometric polynomials of degree
    at most ``band``, which can only under-shoot the true distance.  For a
    conformally flat circle the commutator norm of M_a is the largest
    weighted derivative sample, so the feasible region is a convex body
    and the search is reparametrized on the slice a(x) - a(y) = 1:
    minimizing the norm there and inverting gives the distance.  The max
    is annealed through increasing p-norms with projected descent, from a
    least-squares start plus seeded random restarts, and the winner is
    rescaled by its exactly evaluated commutator norm so the reported
    maximizer is always feasible.
    """
    if config is None:
        config = DistanceConfig()
    metric = dirac.metric
    if metric is None:
        raise ValueError("the spectral distance needs a Dirac operator with its metric")
    if dirac.grid.dim != 1:
        raise ValueError("the distance optimizer handles circles only")
    n = dirac.grid.shape[0]
    period = dirac.grid.periods[0]
    if band is None:
        band = max(1, n // 8)
    if band > n // 4:
        raise ValueError(f"band {band} exceeds N/4 = {n // 4}")
    x = float(x) if np.isscalar(x) else float(_as_tuple(x)[0])
    y = float(y) if np.isscalar(y) else float(_as_tuple(y)[0])
    if abs((x - y) % period) < 1e-12 or abs((y - x) % period) < 1e-12:
        raise ValueError("distance endpoints must be distinct points")

    theta = dirac.grid.axis_points(0)
    scale = metric.background.axis_scales()[0]
    weights = scale * np.exp(-metric.factor.samples)
    ks = np.arange(1, band + 1, dtype=float)
    basis_deriv = np.concatenate([-ks * np.sin(np.outer(theta, ks)),
                                  ks * np.cos(np.outer(theta, ks))], axis=1)
    weighted = weights[:, None] * basis_deriv
    slice_vec = np.concatenate([np.cos(ks * x) - np.cos(ks * y),
                                np.sin(ks * x) - np.sin(ks * y)])
    slice_sq = float(slice_vec @ slice_vec)
    if slice_sq < 1e-20:
        raise ValueError("endpoints are indistinguishable to the band-limited basis")

    gram = weighted.T @ weighted + 1e-12 * np.eye(2 * band)
    start = np.linalg.solve(gram, slice_vec)
    start /= slice_vec @ start

    rng = np.random.default_rng(config.seed)
    finals = []
    best_value, best_u = -np.inf, start
    for restart in range(config.restarts):
        if restart == 0:
            u = start.copy()
        else:
            u = start + config.perturbation * rng.standard_normal(2 * band) / np.sqrt(slice_sq)
            u /= slice_vec @ u
        for p in config.power_schedule:
            step = 1.0
            for _ in range(config.max_iterations):
                value, grad = _smoothed_max(weighted, u, p)
                grad = grad - (grad @ slice_vec) / slice_sq * slice_vec
                if np.linalg.norm(grad) < 1e-13 * max(value, 1e-30):
                    break
                improved = False
                while step > 1e-14:
                    candidate = u - step * grad
                    cand_value, _ = _smoothed_max(weighted, candidate, p)
                    if cand_value < value:
                        u = candidate
                        improved = True
                        step *= 1.5
                        break
                    step *= 0.5
                if not improved:
                    break
        final = 1.0 / float(np.max(np.abs(weighted @ u)))
        finals.append(final)
        if final > best_value:
            best_value, best_u = final, u

    maximizer = best_u / float(np.max(np.abs(weighted @ best_u)))
    samples = np.concatenate([np.cos(np.outer(theta, ks)),
                              np.sin(np.outer(theta, ks))], axis=1) @ maximizer
    true_norm = commutator_norm(dirac, samples)
    maximizer = maximizer / true_norm
    gap = float(slice_vec @ maximizer)
    slack = commutator_norm(dirac, samples / true_norm)
    spread = (max(finals) - min(finals)) / max(max(finals), 1e-30)
    return DistanceEstimate(value=abs(gap), coefficients=maximizer,
                            constraint_slack=slack, stable=spread <= 0.05,
                            restart_values=tuple(finals), x=x, y=y)


@dataclass(frozen=True, eq=False)
class MultiplierExtract:
    """Sample-basis block diagonal of an operator, read as a multiplier.

    ``psi[j]`` is the fiber matrix at grid site j.  ``residual`` is the
    largest commutator norm of the operator against the test multipliers;
    small residual certifies that the block diagonal reassembles the
    operator.
    """

    grid: Grid
    rank: int
    psi: np.ndarray
    residual: float

    def __post_init__(self):
        p = np.asarray(self.psi, dtype=complex)
        if p.shape != (self.grid.sites, self.rank, self.rank):
            raise ValueError("psi must hold one rank x rank block per grid site")
        object.__setattr__(self, "psi", p)
        self.psi.flags.writeable = False

    def reassemble(self) -> OperatorMatrix:
        """Multiplication operator built back from the extracted blocks."""
        s, r = self.grid.sites, self.rank
        sample_block = np.zeros((s * r, s * r), dtype=complex)
        for j in range(s):
            sample_block[j * r:(j + 1) * r, j * r:(j + 1) * r] = self.psi[j]
        dft = _lift_scalar(_site_dft(self.grid), r)
        return OperatorMatrix(matrix=dft.conj().T @ sample_block @ dft,
                              grid=self.grid, rank=r)


def _default_test_characters(grid: Grid):
    """16 low-frequency lattice characters, sampled on the grid."""
    if grid.dim == 1:
        freqs = [(k,) for a in range(1, 9) for k in (a, -a)]
    else:
        lattice = [(k1, k2) for k1 in range(-2, 3) for k2 in range(-2, 3)
                   if (k1, k2) != (0, 0)]
        lattice.sort(key=lambda k: (max(abs(k[0]), abs(k[1])),
                                    abs(k[0]) + abs(k[1]), k))
        freqs = lattice[:16]
    points = grid.points()
    rates = np.array([[2 * np.pi * k / p for k, p in zip(f, grid.periods)]
                      for f in freqs])
    return [np.exp(1j * points @ rate) for rate in rates]


def extract_multiplier(op: OperatorMatrix, test_functions=None) -> MultiplierExtract:
    """Read an operator as a multiplication operator, with a commutation
    certificate.

    Any bounded operator commuting with every multiplication is itself a
    multiplication by a fiberwise matrix function; its sample-basis matrix
    is block diagonal and the blocks are that function.  This extracts the
    block diagonal unconditionally and reports how badly the operator
    fails to commute with a family of test multipliers (16 low-frequency
    characters by default).  A large residual means the extracted blocks
    describe the operator poorly, which is the caller's signal that it is
    not a multiplier.
    """
    grid, r = op.grid, op.rank
    dft = _lift_scalar(_site_dft(grid), r)
    sample_matrix = dft @ op.matrix @ dft.conj().T
    psi = np.empty((grid.sites, r, r), dtype=complex)
    for j in range(grid.sites):
        psi[j] = sample_matrix[j * r:(j + 1) * r, j * r:(j + 1) * r]
    if test_functions is None:
        test_functions = _default_test_characters(grid)
    residual = 0.0
    for a in test_functions:
        mult = multiplication_operator(np.asarray(a).reshape(-1), grid, rank=r)
        bracket = op.matrix @ mult.matrix - mult.matrix @ op.matrix
        residual = max(residual, float(np.linalg.norm(bracket, 2)))
    return MultiplierExtract(grid=grid, rank=r, psi=psi, residual=residual)


@dataclass(frozen=True)
class DetectConfig:
    """Coverage and threshold knobs for conformal detection."""

    points: int = 8
    rays: int = 8
    band: int | None = None
    cometric_band: int | None = None
    schedule: tuple[int, ...] | None = None
    theta_vanish: float = 0.05
    theta_present: float = 0.25
    probe_tolerance: float = 0.05
    cometric_agree: float = 0.05
    cometric_distinct: float = 0.10
    threads: int = 1
    tau: float | None = None

    def __post_init__(self):
        if self.points < 8:
            raise ValueError("detection needs at least 8 base points")
        if not self.theta_vanish < self.theta_present:
            raise ValueError("need theta_vanish < theta_present")
        if not self.cometric_agree <= self.cometric_distinct:
            raise ValueError("need cometric_agree <= cometric_distinct")


@dataclass(frozen=True, eq=False)
class Verdict:
    """Two-channel conformal decision with its evidence."""

    decision: str
    report: TestReport
    max_anticommutator_deviation: float
    symbol_channel: str
    cometric_channel: str
    points: tuple[tuple[float, ...], ...]
    cometric_directions: tuple[tuple[int, ...], ...]
    cometric_deviations: np.ndarray | None
    elapsed_seconds: float

    def __post_init__(self):
        if self.cometric_deviations is not None:
            d = np.asarray(self.cometric_deviations, dtype=float)
            object.__setattr__(self, "cometric_deviations", d)
            self.cometric_deviations.flags.writeable = False

    def pair_deviation(self, xi, eta) -> float:
        """Largest cometric deviation between two probed directions."""
        if self.cometric_deviations is None:
            raise ValueError("cometric channel produced no deviations")
        xi = tuple(int(c) for c in (xi if not np.isscalar(xi) else (xi,)))
        eta = tuple(int(c) for c in (eta if not np.isscalar(eta) else (eta,)))
        i = self.cometric_directions.index(xi)
        j = self.cometric_directions.index(eta)
        return float(np.max(self.cometric_deviations[:, i, j]))


def _base_points(grid: Grid, count: int):
    """Distinct grid sites spread over the manifold, as coordinate tuples."""
    if grid.dim == 1:
        axis = grid.axis_points(0)
        n = grid.shape[0]
        if count > n:
            raise ValueError("more base points requested than grid sites")
        return tuple((float(axis[(i * n) // count]),) for i in range(count))
    a0, a1 = grid.axis_points(0), grid.axis_points(1)
    n0, n1 = grid.shape
    cols = 4
    pts = []
    for i in range(count):
        j0 = ((i % cols) * n0) // cols
        j1 = ((i // cols) * n1) // cols
        pts.append((float(a0[j0 % n0]), float(a1[j1 % n1])))
    if len(set(pts)) != count:
        raise ValueError("could not place that many distinct base points")
    return tuple(pts)


def _detection_directions(dim: int, rays: int):
    if dim == 1:
        return ((1,), (-1,))
    if rays < 4:
        raise ValueError("torus detection needs at least 4 rays")
    if rays > len(_TORUS_RAYS):
        raise ValueError(f"at most {len(_TORUS_RAYS)} rays are available")
    return _TORUS_RAYS[:rays]


def _check_unitary(u: OperatorMatrix, size: int) -> None:
    if u.size != size:
        raise ValueError("intertwiner size does not match the operators")
    gram = u.matrix.conj().T @ u.matrix
    drift = float(np.max(np.abs(gram - np.eye(size))))
    if drift > 1e-10:
        raise ValueError(f"intertwiner is not unitary: |U*U - I| = {drift:.3e}")


def detect_conformal(dirac_a: OperatorMatrix, dirac_b: OperatorMatrix,
                     intertwiner: OperatorMatrix | None = None,
                     config: DetectConfig | None = None) -> Verdict:
    """Decide whether two Dirac-type operators present one conformal class.

    Channel 1 probes K = sign(D_B) - U sign(D_A) U* for a vanishing
    principal symbol.  Channel 2 recovers normalized cometric pairings
    from both sign operators at every base point and compares them.  The
    verdict is issued only when the channels agree; anything else is
    inconclusive, including non-converged cometric probes.
    """
    started = time.perf_counter()
    if config is None:
        config = DetectConfig()
    if dirac_a.grid != dirac_b.grid or dirac_a.rank != dirac_b.rank:
        raise ValueError("operators live on different bundles")
    if not (dirac_a.hermitian and dirac_b.hermitian):
        raise ValueError("conformal detection expects Hermitian operators")
    grid = dirac_a.grid
    sign_a = sign_of(dirac_a, tol=config.tau)
    sign_b = sign_of(dirac_b, tol=config.tau)
    if intertwiner is not None:
        _check_unitary(intertwiner, sign_a.size)
        # Conjugating by U adds two dense products on top of sign(D_A).
        # In working precision their rounding sits above the floor left by
        # the eigensolver, which would make the U-run residuals look worse
        # than the identity run for reasons that have nothing to do with
        # the operators.  Extended precision keeps the conjugation error
        # below that floor; on large systems the slow long-double path is
        # not worth it and the plain product is used instead.
        if sign_a.size <= 512:
            um = intertwiner.matrix.astype(np.clongdouble)
            sm = sign_a.matrix.astype(np.clongdouble)
            conjugated = (um @ sm @ um.conj().T).astype(np.complex128)
        else:
            conjugated = intertwiner.matrix @ sign_a.matrix @ intertwiner.matrix.conj().T
        conjugated = 0.5 * (conjugated + conjugated.conj().T)
    else:
        conjugated = sign_a.matrix
    difference = OperatorMatrix(matrix=sign_b.matrix - conjugated, grid=grid,
                                rank=dirac_a.rank, hermitian=True)

    points = _base_points(grid, config.points)
    directions = _detection_directions(grid.dim, config.rays)
    probes = [standard_probe(grid.shape, pt, d, band=config.band,
                             schedule=config.schedule, tolerance=config.probe_tolerance)
              for pt in points for d in directions]
    report = vanishing_symbol_test(difference, probes,
                                   theta_vanish=config.theta_vanish,
                                   theta_present=config.theta_present,
                                   threads=config.threads)
    symbol_channel = {VANISHING: CONFORMAL, NON_VANISHING: NOT_CONFORMAL,
                      INCONCLUSIVE: INCONCLUSIVE}[report.decision]

    pair_directions = (((1,),) if grid.dim == 1 else _COMETRIC_DIRECTIONS_2D)
    conj_op = (OperatorMatrix(matrix=conjugated, grid=grid, rank=dirac_a.rank,
                              hermitian=True) if intertwiner is not None else sign_a)
    deviations = None
    try:
        devs = []
        for pt in points:
            est_a = recover_normalized_cometric(
                conj_op, pt, pair_directions, band=config.cometric_band,
                schedule=config.schedule, tolerance=config.probe_tolerance)
            est_b = recover_normalized_cometric(
                sign_b, pt, pair_directions, band=config.cometric_band,
                schedule=config.schedule, tolerance=config.probe_tolerance)
            devs.append(np.abs(est_a.matrix - est_b.matrix))
        deviations = np.stack(devs)
        max_deviation = float(np.max(deviations))
        if max_deviation < config.cometric_agree:
            cometric_channel = CONFORMAL
        elif max_deviation > config.cometric_distinct:
            cometric_channel = NOT_CONFORMAL
        else:
            cometric_channel = INCONCLUSIVE
    except ProbeConvergenceError:
        cometric_channel = INCONCLUSIVE
        max_deviation = float("nan")

    decision = symbol_channel if symbol_channel == cometric_channel else INCONCLUSIVE
    return Verdict(decision=decision, report=report,
                   max_anticommutator_deviation=max_deviation,
                   symbol_channel=symbol_channel, cometric_channel=cometric_channel,
                   points=points, cometric_directions=pair_directions,
                   cometric_deviations=deviations,
                   elapsed_seconds=time.perf_counter() - started)
