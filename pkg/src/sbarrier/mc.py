"""Monte Carlo ground truth: stopped-process simulation of the SDE.

Paths follow the Euler-Maruyama scheme

    x <- x + F(x) dt + sigma(x) sqrt(dt) xi,   xi ~ N(0, I_m),

with F = f + g u.  A path fails at the first step boundary where the state
satisfies every unsafe-set constraint; it freezes (and can no longer fail) at
the first step boundary where it has left the state space.  Failure detection
at step boundaries misses intra-step excursions and therefore biases the
estimate slightly down; the dt/2 consistency check in the test suite guards
against a material bias.

Noise streams are counter-based: path i draws from a generator seeded by
(seed, i), so estimates are identical however paths are batched or
distributed.  Failure counts get Wilson score intervals, which stay sensible
at zero observed failures.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import SafetyProblem, StochasticSystem, generator
from .poly import ParametricPolynomial

_Z95 = 1.96
_PATH_BLOCK = 1024


@dataclass(frozen=True)
class SimulationConfig:
    dt: float
    T: float
    draws: int
    seed: int
    scheme: str = "euler_maruyama"

    def __post_init__(self):
        if self.dt <= 0 or self.dt > self.T:
            raise ValueError("need 0 < dt <= T")
        if self.draws < 1:
            raise ValueError("need at least one draw")
        if self.scheme != "euler_maruyama":
            raise ValueError(f"unsupported scheme {self.scheme!r}")

    def step_sizes(self) -> list[float]:
        full = int(math.floor(self.T / self.dt + 1e-9))
        steps = [self.dt] * full
        rem = self.T - full * self.dt
        if rem > 1e-12:
            steps.append(rem)
        return steps


@dataclass(frozen=True)
class TauStats:
    """Summary of recorded first-event times (failure or freeze)."""

    count: int
    mean: float | None
    min: float | None
    max: float | None

    def to_dict(self) -> dict:
        return {"count": self.count, "mean": self.mean, "min": self.min, "max": self.max}


@dataclass(frozen=True)
class McEstimate:
    p_hat: float
    ci_low: float
    ci_high: float
    failures: int
    draws: int
    tau_stats: TauStats

    def to_dict(self) -> dict:
        return {
            "p_hat": self.p_hat,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "failures": self.failures,
            "draws": self.draws,
            "tau_stats": self.tau_stats.to_dict(),
        }


def wilson_interval(failures: int, draws: int, z: float = _Z95) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if draws < 1:
        raise ValueError("draws must be >= 1")
    p = failures / draws
    z2 = z * z
    denom = 1.0 + z2 / draws
    center = (p + z2 / (2.0 * draws)) / denom
    half = z * math.sqrt(p * (1.0 - p) / draws + z2 / (4.0 * draws * draws)) / denom
    return max(0.0, center - half), min(1.0, center + half)


class _PolyVector:
    """Batch evaluator for a fixed vector of concrete polynomials."""

    def __init__(self, polys: Sequence[ParametricPolynomial]):
        self.polys = list(polys)

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        out = np.empty((pts.shape[0], len(self.polys)))
        for i, p in enumerate(self.polys):
            out[:, i] = p.evaluate_batch(pts)
        return out


def _path_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def _simulate_block(
    system: StochasticSystem,
    u: Sequence[ParametricPolynomial] | None,
    problem: SafetyProblem,
    x0: np.ndarray,
    cfg: SimulationConfig,
    path_indices: range,
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate a block of paths; returns (failed mask, tau array with NaN)."""
    steps = cfg.step_sizes()
    count = len(path_indices)
    noise = np.empty((count, len(steps), system.m))
    for row, path in enumerate(path_indices):
        noise[row] = _path_rng(cfg.seed, path).standard_normal((len(steps), system.m))

    drift = _PolyVector(system.drift_with_control(u))
    sigma_rows = [_PolyVector(row) for row in system.sigma]

    state = np.tile(x0, (count, 1))
    failed = np.zeros(count, dtype=bool)
    tau = np.full(count, np.nan)
    active = np.ones(count, dtype=bool)

    def classify(pts: np.ndarray, when: float, global_idx: np.ndarray) -> None:
        in_u = problem.Xu.contains_batch(pts)
        in_x = problem.X.contains_batch(pts)
        fail_here = in_u
        freeze_here = ~in_u & ~in_x
        failed[global_idx[fail_here]] = True
        tau[global_idx[fail_here]] = when
        tau[global_idx[freeze_here]] = when
        active[global_idx[fail_here | freeze_here]] = False

    with np.errstate(over="ignore", invalid="ignore"):
        classify(state, 0.0, np.arange(count))
        t = 0.0
        for step_idx, h in enumerate(steps):
            if not active.any():
                break
            idx = np.flatnonzero(active)
            x = state[idx]
            xi = noise[idx, step_idx, :]
            move = drift(x) * h
            for i in range(system.n):
                row = sigma_rows[i](x)  # (N, m)
                move[:, i] += math.sqrt(h) * np.einsum("nm,nm->n", row, xi)
            x_new = x + move
            state[idx] = x_new
            t += h
            classify(x_new, t, idx)
    return failed, tau


def simulate_path(
    system: StochasticSystem,
    u: Sequence[ParametricPolynomial] | None,
    x0: Sequence[float],
    cfg: SimulationConfig,
    problem: SafetyProblem,
    path_index: int = 0,
) -> tuple[bool, float | None]:
    """One stopped-process path; returns (failed, first event time or None)."""
    failed, tau = _simulate_block(
        system, u, problem, np.asarray(x0, dtype=float), cfg,
        range(path_index, path_index + 1),
    )
    t = float(tau[0])
    return bool(failed[0]), None if math.isnan(t) else t


def estimate_failure_probability(
    system: StochasticSystem,
    u: Sequence[ParametricPolynomial] | None,
    x0: Sequence[float],
    cfg: SimulationConfig,
    problem: SafetyProblem,
) -> McEstimate:
    """Empirical failure probability over cfg.draws independent paths."""
    x0_arr = np.asarray(x0, dtype=float)
    failures = 0
    taus: list[np.ndarray] = []
    for start in range(0, cfg.draws, _PATH_BLOCK):
        block = range(start, min(start + _PATH_BLOCK, cfg.draws))
        failed, tau = _simulate_block(system, u, problem, x0_arr, cfg, block)
        failures += int(np.count_nonzero(failed))
        taus.append(tau[~np.isnan(tau)])
    all_tau = np.concatenate(taus) if taus else np.empty(0)
    stats = TauStats(
        count=int(all_tau.size),
        mean=float(np.mean(all_tau)) if all_tau.size else None,
        min=float(np.min(all_tau)) if all_tau.size else None,
        max=float(np.max(all_tau)) if all_tau.size else None,
    )
    low, high = wilson_interval(failures, cfg.draws)
    return McEstimate(
        p_hat=failures / cfg.draws,
        ci_low=low,
        ci_high=high,
        failures=failures,
        draws=cfg.draws,
        tau_stats=stats,
    )


@dataclass(frozen=True)
class GeneratorCheck:
    estimate: float
    generator_value: float
    residual: float
    stderr: float
    paths: int
    delta: float

    def within(self, n_sigma: float = 3.0) -> bool:
        return abs(self.residual) <= n_sigma * self.stderr


def generator_check(
    B: ParametricPolynomial,
    system: StochasticSystem,
    u: Sequence[ParametricPolynomial] | None,
    x: Sequence[float],
    seed: int,
    paths: int = 100_000,
    delta: float = 1e-4,
) -> GeneratorCheck:
    """Compare (E[B(x_delta)] - B(x)) / delta against the symbolic generator.

    Uses a single Euler-Maruyama step of size delta; the scheme's O(delta)
    weak bias is far below the reported Monte Carlo standard error at the
    default settings.
    """
    if not B.is_concrete():
        raise ValueError("generator check needs a concrete polynomial")
    x_arr = np.asarray(x, dtype=float)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    xi = rng.standard_normal((paths, system.m))

    pts = np.tile(x_arr, (paths, 1))
    drift = _PolyVector(system.drift_with_control(u))(pts[:1])[0]
    sigma_at_x = np.array(
        [[entry.evaluate(x_arr) for entry in row] for row in system.sigma]
    )
    stepped = pts + drift * delta + math.sqrt(delta) * xi @ sigma_at_x.T

    b0 = B.evaluate(x_arr)
    bvals = B.evaluate_batch(stepped)
    est = (float(np.mean(bvals)) - b0) / delta
    stderr = float(np.std(bvals, ddof=1)) / math.sqrt(paths) / delta
    gen_val = generator(B, system, u).evaluate(x_arr)
    return GeneratorCheck(
        estimate=est,
        generator_value=gen_val,
        residual=est - gen_val,
        stderr=stderr,
        paths=paths,
        delta=delta,
    )


def write_sweep_csv(path: str, rows: list[dict], fieldnames: list[str]) -> None:
    """Plot-ready CSV; floats use repr so files are bit-stable across runs."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow(
                [
                    ""
                    if row.get(name) is None
                    else (repr(row[name]) if isinstance(row[name], float) else row[name])
                    for name in fieldnames
                ]
            )
