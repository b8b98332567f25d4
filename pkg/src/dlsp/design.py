"""Automated morphology design by population-based incremental learning.

The design variable is a per-pixel Bernoulli probability grid P.  Each
iteration samples a population, scores it with a fitness function (the
trained surrogate, the oracle, or a test stand-in), and relaxes P toward
the elite mean:

    P <- clamp(P * (1 - l_r) + P_b * l_r)

A small probability-drift mutation and hard clamp bounds keep P from
collapsing early.  The best sample ever seen is retained, so best fitness
is non-decreasing by construction.

Randomness is drawn from a fresh stream per iteration, seeded by
(seed, iteration), so a run is bitwise reproducible and resuming from a
saved state replays identically.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .morpho import BinaryMorphology, Morphology
from .nn.model import CnnModel, predict_proba
from .oracle import OracleParams, evaluate

GRID_SIZE = 101  # default design grid, matching the network input


@dataclass(frozen=True)
class PbilParams:
    n: int = 100
    n_b: int = 10
    l_r: float = 0.1
    mutation_prob: float = 0.02
    mutation_shift: float = 0.05
    p_clamp: tuple = (0.01, 0.99)
    smoothing_radius: int = 1
    max_iters: int = 200
    improvement_tol: float = 1e-3
    improvement_window: int = 20
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "p_clamp", tuple(self.p_clamp))
        lo, hi = self.p_clamp
        if not 0 < self.n_b < self.n:
            raise ValueError(f"need 0 < n_b < n, got n_b={self.n_b}, n={self.n}")
        if not 0.0 < self.l_r <= 1.0:
            raise ValueError(f"l_r must lie in (0, 1], got {self.l_r}")
        if not (0.0 < lo < hi < 1.0):
            raise ValueError(f"clamp bounds must satisfy 0 < lo < hi < 1, got {self.p_clamp}")
        if not 0.0 <= self.mutation_prob <= 1.0 or not 0.0 <= self.mutation_shift <= 1.0:
            raise ValueError("mutation_prob and mutation_shift must lie in [0, 1]")
        if self.smoothing_radius < 0 or self.max_iters < 0:
            raise ValueError("smoothing_radius and max_iters must be non-negative")
        if self.improvement_tol < 0.0 or self.improvement_window < 1:
            raise ValueError("improvement_tol must be >= 0, improvement_window >= 1")


@dataclass(frozen=True)
class PbilState:
    P: np.ndarray
    iteration: int
    best_sample: BinaryMorphology
    best_fitness: float
    fitness_history: tuple = ()  # rows (iteration, best_fitness, elite_mean)

    def __post_init__(self):
        p = np.array(self.P, dtype=np.float64)
        p.setflags(write=False)
        object.__setattr__(self, "P", p)
        object.__setattr__(self, "fitness_history", tuple(self.fitness_history))


def _iter_rng(seed: int, iteration: int) -> np.random.Generator:
    return np.random.default_rng([seed, iteration])


def box_threshold(bits: np.ndarray, radius: int) -> np.ndarray:
    """Majority filter: box-blur the 0/1 field and re-threshold at 0.5.

    Ties go to donor.  Lateral neighbors wrap; top/bottom are clipped, so
    edge rows vote over a smaller window.
    """
    if radius <= 0:
        return bits.astype(bool)
    h = bits.shape[0]
    work = bits.astype(np.int64)
    acc = np.zeros_like(work)
    cnt = np.zeros_like(work)
    for dv in range(-radius, radius + 1):
        vals = np.zeros_like(work)
        ones = np.zeros_like(work)
        if dv >= 0:
            vals[dv:, :] = work[: h - dv, :]
            ones[dv:, :] = 1
        else:
            vals[: h + dv, :] = work[-dv:, :]
            ones[: h + dv, :] = 1
        for dh in range(-radius, radius + 1):
            acc += np.roll(vals, dh, axis=1)
            cnt += np.roll(ones, dh, axis=1)
    return 2 * acc >= cnt


def pbil_sample(P: np.ndarray, rng: np.random.Generator, smoothing_radius: int = 1) -> BinaryMorphology:
    bits = rng.random(P.shape) < P
    return BinaryMorphology(box_threshold(bits, smoothing_radius))


def _as_probability_grid(init, delta: float, clamp: tuple) -> np.ndarray:
    if isinstance(init, str):
        if init != "uniform":
            raise ValueError(f"unknown init {init!r}")
        return np.full((GRID_SIZE, GRID_SIZE), 0.5)
    if isinstance(init, BinaryMorphology):
        values = init.donor_mask.astype(np.float64)
    elif isinstance(init, Morphology):
        values = init.values
    else:
        values = np.asarray(init, dtype=np.float64)
    return np.clip(values * (1.0 - 2.0 * delta) + delta, *clamp)


def pbil_init(init, params: PbilParams, f, delta: float = 0.1) -> PbilState:
    """Probability grid from a morphology (or ``"uniform"``), best sample drawn.

    ``delta`` softens a hard morphology: P = clamp(m * (1 - 2 delta) + delta).
    """
    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 0.5), got {delta}")
    p = _as_probability_grid(init, delta, params.p_clamp)
    sample = pbil_sample(p, _iter_rng(params.seed, 0), params.smoothing_radius)
    return PbilState(
        P=p,
        iteration=0,
        best_sample=sample,
        best_fitness=float(f(sample)),
        fitness_history=(),
    )


def _evaluate_population(f, samples, iteration: int):
    batch = getattr(f, "batch", None)
    if batch is not None:
        try:
            return [float(v) for v in batch(samples)]
        except Exception:
            pass  # deterministic fitness: redo serially to name the sample
    out = []
    for idx, sample in enumerate(samples):
        try:
            out.append(float(f(sample)))
        except Exception as exc:
            raise RuntimeError(f"fitness failed on sample {idx} of iteration {iteration}") from exc
    return out


def pbil_iterate(state: PbilState, params: PbilParams, f) -> PbilState:
    """One generation: sample, select elite, relax P, mutate, keep the best."""
    iteration = state.iteration + 1
    rng = _iter_rng(params.seed, iteration)
    samples = [pbil_sample(state.P, rng, params.smoothing_radius) for _ in range(params.n)]
    fits = _evaluate_population(f, samples, iteration)

    order = np.argsort([-v for v in fits], kind="stable")[: params.n_b]  # ties keep sample index
    elite_mean_grid = np.mean([samples[i].donor_mask for i in order], axis=0)
    p = np.clip(state.P * (1.0 - params.l_r) + elite_mean_grid * params.l_r, *params.p_clamp)

    if params.mutation_prob > 0.0:
        hit = rng.random(p.shape) < params.mutation_prob
        coin = rng.integers(0, 2, size=p.shape).astype(np.float64)
        drifted = np.clip(p * (1.0 - params.mutation_shift) + coin * params.mutation_shift, *params.p_clamp)
        p = np.where(hit, drifted, p)

    best_idx = int(order[0])
    best_sample, best_fitness = state.best_sample, state.best_fitness
    if fits[best_idx] > best_fitness:
        best_sample, best_fitness = samples[best_idx], fits[best_idx]

    row = (iteration, best_fitness, float(np.mean([fits[i] for i in order])))
    return PbilState(
        P=p,
        iteration=iteration,
        best_sample=best_sample,
        best_fitness=best_fitness,
        fitness_history=state.fitness_history + (row,),
    )


def pbil_run(init, params: PbilParams, f, delta: float = 0.1, on_iteration=None):
    """Iterate until max_iters or the trailing-window improvement stalls.

    ``init`` may be a prepared PbilState or anything pbil_init accepts.
    Returns (final state, history rows).
    """
    state = init if isinstance(init, PbilState) else pbil_init(init, params, f, delta)
    while state.iteration < params.max_iters:
        state = pbil_iterate(state, params, f)
        if on_iteration is not None:
            on_iteration(state, state.fitness_history[-1])
        hist = state.fitness_history
        if len(hist) >= params.improvement_window + 1:
            gain = hist[-1][1] - hist[-(params.improvement_window + 1)][1]
            if gain < params.improvement_tol:
                break
    return state, list(state.fitness_history)


def pbil_history_csv(history) -> str:
    lines = ["iter,best_fitness,elite_mean"]
    for iteration, best, elite in history:
        lines.append(f"{iteration},{best:.6f},{elite:.6f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Fitness functions


def onemax(b: BinaryMorphology) -> float:
    """Donor pixel count; the classic sanity objective."""
    return float(b.donor_mask.sum())


class _SurrogateFitness:
    """Expected class index Sigma k * p_k; scores a population in one batch."""

    def __init__(self, model: CnnModel):
        self.model = model
        self._weights = np.arange(model.arch.n_classes, dtype=np.float64)

    def batch(self, grids) -> list:
        x = np.stack([g.donor_mask for g in grids]).astype(np.float32)[..., None]
        probs = predict_proba(self.model, x)
        return [float(v) for v in probs.astype(np.float64) @ self._weights]

    def __call__(self, b: BinaryMorphology) -> float:
        return self.batch([b])[0]


def cnn_expected_class(model: CnnModel) -> _SurrogateFitness:
    return _SurrogateFitness(model)


class _OracleFitness:
    def __init__(self, params: OracleParams):
        self.params = params

    def __call__(self, b: BinaryMorphology) -> float:
        return evaluate(b, self.params).jsc


def oracle_jsc(params: OracleParams | None = None) -> _OracleFitness:
    return _OracleFitness(params if params is not None else OracleParams())
