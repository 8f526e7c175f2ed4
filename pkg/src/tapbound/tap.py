"""TAP energy functionals and their maximizers.

For a magnetization m the energy is

    beta * (H + f)(m) + I(m) + (beta^2 / 2) * N * On(||m||^2),

with I the Ising entropy -sum_i J(m_i) on (-1,1)^N, the spherical entropy
(N/2) log(1 - ||m||^2) on the open ball, or the half-space log-mass surrogate
for a general reference measure on the closed ball. All terms are extensive
(order N); per-spin values are reported alongside, never mixed in.

Maximization is multi-start projected gradient ascent with backtracking line
search; the best value found is a lower bound on the true supremum and is
used as the sup surrogate by the bound experiments (cross-checked against an
exhaustive grid oracle at tiny N).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import product
from typing import Optional

import numpy as np

from .entropy import (
    ReferenceMeasure,
    binary_entropy,
    general_entropy_upper,
    ising_entropy,
    spherical_entropy,
)
from .errors import DomainError, ResourceBudgetError, UnsupportedOperationError
from .geometry import norm
from .hamiltonian import (
    DisorderSample,
    energy,
    energy_many,
    field_value,
    gradient,
)

FLAVORS = ("ising", "spherical", "general")

MAX_ITERATIONS = 500
INITIAL_STEP = 0.1
BACKTRACK_FACTOR = 0.5
GRAD_TOLERANCE = 1e-8
DOMAIN_MARGIN = 1e-9
START_SHRINK = 0.9


@dataclass(frozen=True)
class TapProblem:
    model: object  # MixedModel
    disorder: DisorderSample
    flavor: str
    measure: Optional[ReferenceMeasure] = None
    delta: Optional[float] = None

    def __post_init__(self):
        if self.flavor not in FLAVORS:
            raise DomainError(f"unknown flavor {self.flavor!r}")
        if self.flavor == "general" and (self.measure is None or self.delta is None):
            raise DomainError("general flavor needs a measure and a delta")

    @property
    def n(self) -> int:
        return self.model.n


def _check_domain(p: TapProblem, m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (p.n,):
        raise DomainError(f"expected magnetization of length {p.n}")
    if p.flavor == "ising":
        if np.abs(m).max() >= 1.0:
            raise DomainError("ising magnetization must lie in (-1, 1)^N")
    elif p.flavor == "spherical":
        if norm(m) >= 1.0:
            raise DomainError("spherical magnetization must lie in the open ball")
    else:
        if norm(m) > 1.0 + 1e-12:
            raise DomainError("general magnetization must lie in the closed ball")
    return m


def _entropy_term(p: TapProblem, m: np.ndarray) -> float:
    if p.flavor == "ising":
        return ising_entropy(m)
    if p.flavor == "spherical":
        return spherical_entropy(m)
    return general_entropy_upper(p.measure, m, p.delta,
                                 extra_directions=p.model.field.basis)


def tap_energy(p: TapProblem, m: np.ndarray) -> float:
    m = _check_domain(p, m)
    beta = p.model.beta
    q = min(1.0, float(m @ m) / p.n)
    value = beta * (energy(p.disorder, m) + field_value(p.model.field, m))
    value += _entropy_term(p, m)
    value += 0.5 * beta ** 2 * p.n * p.model.series.onsager(q)
    return float(value)


def tap_energy_per_spin(p: TapProblem, m: np.ndarray) -> float:
    return tap_energy(p, m) / p.n


def _tap_energy_batch(p: TapProblem, M: np.ndarray) -> np.ndarray:
    """Vectorized extensive energy over magnetization rows (grid oracle path)."""
    beta = p.model.beta
    n = p.n
    vals = beta * (energy_many(p.disorder, M) + p.model.field.value_many(M))
    q = np.minimum(1.0, (M ** 2).sum(axis=1) / n)
    vals += 0.5 * beta ** 2 * n * p.model.series.onsager_many(q)
    if p.flavor == "ising":
        vals -= binary_entropy(M).sum(axis=1)
    elif p.flavor == "spherical":
        with np.errstate(divide="ignore"):
            vals += 0.5 * n * np.log1p(-np.minimum(q, 1.0))
    else:
        raise UnsupportedOperationError("batch evaluation needs a gradient flavor")
    return vals


def tap_gradient(p: TapProblem, m: np.ndarray) -> np.ndarray:
    """Analytic gradient for the ising and spherical flavors.

    d/dm_i of the Onsager term is beta^2 On'(q) m_i with On'(q) = -(1-q) xi''(q);
    the entropy gradients are -atanh(m_i) and -m_i / (1 - q). Custom fields
    without a gradient callback fall back to central differences.
    """
    if p.flavor == "general":
        raise UnsupportedOperationError("general flavor exposes no gradient")
    m = _check_domain(p, m)
    beta = p.model.beta
    q = min(1.0, float(m @ m) / p.n)
    g = beta * (gradient(p.disorder, m) + p.model.field.gradient(m))
    g += beta ** 2 * p.model.series.onsager_derivative(q) * m
    if p.flavor == "ising":
        g -= np.arctanh(m)
    else:
        g -= m / (1.0 - q)
    return g


def _project(p: TapProblem, m: np.ndarray) -> np.ndarray:
    if p.flavor == "ising":
        return np.clip(m, -1.0 + DOMAIN_MARGIN, 1.0 - DOMAIN_MARGIN)
    r = norm(m)
    limit = 1.0 - DOMAIN_MARGIN
    return m * (limit / r) if r > limit else m


def _draw_start(p: TapProblem, rng: np.random.Generator) -> np.ndarray:
    if p.flavor == "ising":
        return rng.uniform(-START_SHRINK, START_SHRINK, size=p.n)
    z = rng.standard_normal(p.n)
    radius = START_SHRINK * rng.uniform() ** (1.0 / p.n)
    return z * (radius / norm(z))


@dataclass
class TraceRow:
    start: int
    iteration: int
    value: float
    grad_norm: float
    step: float


@dataclass
class MaximizeResult:
    m_star: np.ndarray
    value: float
    trace: list
    best_start: int
    converged: bool


def maximize_tap(p: TapProblem, starts: int, rng_seed: int) -> MaximizeResult:
    """Best magnetization over multi-start projected gradient ascent.

    Each start runs up to 500 backtracking line-search iterations (Armijo on
    the ascent direction, step doubling after accepted moves) and stops when
    the normalized gradient norm drops below 1e-8. Ties between starts break
    toward the lowest start index. The returned value is a lower bound of the
    true supremum.
    """
    if starts < 1:
        raise DomainError("starts must be >= 1")
    if p.flavor == "general":
        return _maximize_general(p, starts, rng_seed)
    best_val = -np.inf
    best_m = None
    best_start = -1
    converged_any = False
    trace: list[TraceRow] = []
    for s in range(starts):
        rng = np.random.default_rng(np.random.SeedSequence(rng_seed, spawn_key=(s,)))
        m = _project(p, _draw_start(p, rng))
        val = tap_energy(p, m)
        step = INITIAL_STEP
        converged = False
        for it in range(MAX_ITERATIONS):
            g = tap_gradient(p, m)
            gn = norm(g)
            trace.append(TraceRow(s, it, val, gn, step))
            if gn < GRAD_TOLERANCE:
                converged = True
                break
            accepted = False
            trial_step = step if it == 0 else step * 2.0
            while trial_step > 1e-14:
                cand = _project(p, m + trial_step * g)
                cand_val = tap_energy(p, cand)
                if cand_val > val + 1e-4 * trial_step * gn ** 2:
                    m, val, step = cand, cand_val, trial_step
                    accepted = True
                    break
                trial_step *= BACKTRACK_FACTOR
            if not accepted:
                converged = gn < 1e-6
                break
        converged_any = converged_any or converged
        if val > best_val:
            best_val, best_m, best_start = val, m, s
    return MaximizeResult(best_m, float(best_val), trace, best_start, converged_any)


def _maximize_general(p: TapProblem, starts: int, rng_seed: int) -> MaximizeResult:
    """Gradient-free coordinate search for the general flavor."""
    best_val = -np.inf
    best_m = None
    best_start = -1
    trace: list[TraceRow] = []
    for s in range(starts):
        rng = np.random.default_rng(np.random.SeedSequence(rng_seed, spawn_key=(s,)))
        m = _draw_start(p, rng)
        val = tap_energy(p, m)
        step = 0.2
        it = 0
        while step > 1e-4 and it < MAX_ITERATIONS:
            improved = False
            for i in range(p.n):
                for sign in (1.0, -1.0):
                    cand = m.copy()
                    cand[i] += sign * step * math.sqrt(p.n)
                    r = norm(cand)
                    if r > 1.0:
                        cand /= r
                    cand_val = tap_energy(p, cand)
                    it += 1
                    if cand_val > val + 1e-12:
                        m, val, improved = cand, cand_val, True
            trace.append(TraceRow(s, it, val, np.nan, step))
            if not improved:
                step *= 0.5
        if val > best_val:
            best_val, best_m, best_start = val, m, s
    return MaximizeResult(best_m, float(best_val), trace, best_start, True)


def export_trace_csv(result: MaximizeResult, path) -> None:
    """Write the winning start's iterations as (iteration, value, gradient norm, step)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "value", "gradient_norm", "step"])
        for row in result.trace:
            if row.start == result.best_start:
                writer.writerow([row.iteration, repr(row.value),
                                 repr(row.grad_norm), repr(row.step)])


@dataclass(frozen=True)
class BruteForceResult:
    m_star: np.ndarray
    value: float
    points_evaluated: int


def brute_force_tap_max(p: TapProblem, grid_step: float,
                        budget: int = 2_000_000,
                        direction_count: int = 256,
                        rng_seed: int = 0) -> BruteForceResult:
    """Exhaustive grid evaluation (oracle for the ascent maximizer).

    Ising: a symmetric product grid containing 0 over (-1, 1)^N, with the
    grid_size^N budget enforced. Spherical: radial shells crossed with a
    seeded set of random directions.
    """
    if grid_step <= 0:
        raise DomainError("grid_step must be positive")
    n = p.n
    if p.flavor == "ising":
        t_max = int(math.floor((1.0 - DOMAIN_MARGIN) / grid_step))
        axis = grid_step * np.arange(-t_max, t_max + 1)
        total = len(axis) ** n
        if total > budget:
            raise ResourceBudgetError(
                f"{len(axis)}^{n} = {total} grid points exceed budget {budget}",
                required=total, budget=budget)
        best_val = -np.inf
        best_m = None
        count = 0
        chunk = []
        for combo in product(axis, repeat=n):
            chunk.append(combo)
            if len(chunk) == 8192:
                best_val, best_m = _scan_chunk(p, chunk, best_val, best_m)
                count += len(chunk)
                chunk = []
        if chunk:
            best_val, best_m = _scan_chunk(p, chunk, best_val, best_m)
            count += len(chunk)
        return BruteForceResult(best_m, float(best_val), count)
    if p.flavor == "spherical":
        rng = np.random.default_rng(np.random.SeedSequence(rng_seed, spawn_key=(7,)))
        z = rng.standard_normal((direction_count, n))
        dirs = z / np.sqrt((z ** 2).sum(axis=1) / n)[:, None]
        radii = np.arange(0.0, 1.0 - DOMAIN_MARGIN, grid_step)
        pts = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, n)
        vals = _tap_energy_batch(p, pts)
        idx = int(np.argmax(vals))
        return BruteForceResult(pts[idx], float(vals[idx]), len(pts))
    raise UnsupportedOperationError("grid oracle covers ising and spherical only")


def _scan_chunk(p, chunk, best_val, best_m):
    M = np.asarray(chunk, dtype=np.float64)
    vals = _tap_energy_batch(p, M)
    i = int(np.argmax(vals))
    if vals[i] > best_val:
        return float(vals[i]), M[i].copy()
    return best_val, best_m
