"""Monte Carlo experiments for the guarded step-up procedures.

Two seeded experiments are provided.  ``run_bernoulli_experiment`` tests
m coins against fairness with a randomized exact binomial test, computing
one p-value from the real sample alone and one from the real sample
pooled with an auxiliary synthetic sample; it then scores four methods
per trial:

* ``BH-real``     step-up on the real p-values at level alpha
* ``BH-real+eps`` step-up on the real p-values at level alpha + epsilon
* ``BH-synth``    step-up on the pooled p-values at level alpha
* ``SynthBH``     the guarded procedure at (alpha, epsilon)

``run_outlier_experiment`` is the conformal analogue with Gaussian scores,
a contaminated auxiliary set, and trimming.

Reproducibility: every trial draws from ``default_rng([seed, trial])``,
so results are bit-identical no matter how trials are scheduled across
threads.  The thread count is taken from the ``SYNTHBH_THREADS``
environment variable (default: CPU count capped at 8).

Binomial tail probabilities are computed by exact integer summation and
a single correctly rounded float division, for n up to 2000; larger n
raises rather than silently approximating.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Mapping, Union

import numpy as np

from .conformal import ScoreBundle, conformal_pvalues, detect_outliers, \
    merged_conformal_pvalues, trim_by_score
from .stepup import StepUpConfig, bh, synth_bh

MAX_EXACT_BINOMIAL_N = 2000

# Sentinel for the hostile auxiliary regime: synthetic data claim signal
# for every hypothesis, nulls included.
MIRROR_ALT = "mirror-alt"

METHOD_NAMES = ("BH-real", "BH-real+eps", "BH-synth", "SynthBH")


def _check_probability(name: str, value: float) -> None:
    if not math.isfinite(value) or not (0 <= value <= 1):
        raise ValueError(f"{name} must be in [0, 1], got {value!r}")


def _check_count(name: str, value: int, minimum: int = 1) -> None:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value!r}")


def _check_levels(alpha: float, epsilon: float) -> None:
    if not (math.isfinite(alpha) and 0 < alpha < 1):
        raise ValueError(f"alpha must be in (0, 1), got {alpha!r}")
    if not (math.isfinite(epsilon) and 0 <= epsilon < 1):
        raise ValueError(f"epsilon must be in [0, 1), got {epsilon!r}")
    if alpha + epsilon >= 1:
        raise ValueError(
            f"alpha + epsilon must be below 1 for the relaxed-level baseline, "
            f"got {alpha + epsilon!r}"
        )


@dataclass(frozen=True)
class SimConfig:
    """Parameters of the Bernoulli experiment.

    Defaults give m = 1000 hypotheses with 5% alternatives at success
    probability 0.6, n_real = 200 real and n_synth = 1000 synthetic draws
    per hypothesis, synthetic alternatives at 0.55, and levels
    alpha = epsilon = 0.1 over 100 trials.  ``q_synth_null`` is either a
    probability or the string ``"mirror-alt"``, which makes synthetic
    nulls use ``q_synth_alt`` (auxiliary data claiming signal everywhere).
    """

    n_real: int = 200
    n_synth: int = 1000
    m: int = 1000
    frac_alt: float = 0.05
    q_alt: float = 0.6
    q_synth_null: Union[float, str] = 0.5
    q_synth_alt: float = 0.55
    alpha: float = 0.1
    epsilon: float = 0.1
    trials: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        _check_count("n_real", self.n_real)
        _check_count("n_synth", self.n_synth)
        _check_count("m", self.m)
        _check_count("trials", self.trials)
        _check_probability("frac_alt", self.frac_alt)
        _check_probability("q_alt", self.q_alt)
        _check_probability("q_synth_alt", self.q_synth_alt)
        if isinstance(self.q_synth_null, str):
            if self.q_synth_null != MIRROR_ALT:
                raise ValueError(
                    f"q_synth_null must be a probability or {MIRROR_ALT!r}, "
                    f"got {self.q_synth_null!r}"
                )
        else:
            _check_probability("q_synth_null", self.q_synth_null)
        _check_levels(self.alpha, self.epsilon)
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool):
            raise ValueError(f"seed must be an integer, got {self.seed!r}")

    @property
    def n_alternatives(self) -> int:
        """Number of non-null hypotheses; they occupy the first indices."""
        return round(self.frac_alt * self.m)


@dataclass(frozen=True)
class TrialMetrics:
    """Per-trial outcome of one method.

    ``fdp`` is false rejections over ``max(|R|, 1)``; ``power`` is true
    rejections over ``max(#non-nulls, 1)``; ``rejections`` is |R|, which
    for every step-up rule here equals the selected index k*.
    """

    fdp: float
    power: float
    rejections: int


@dataclass(frozen=True)
class MethodSummary:
    """Mean and standard error of one method's metrics over all trials."""

    method: str
    trials: int
    mean_fdp: float
    se_fdp: float
    mean_power: float
    se_power: float
    mean_rejections: float


@dataclass(frozen=True)
class ExperimentResult:
    """All per-trial metrics of one experiment, keyed by method name."""

    method_names: tuple
    per_trial: Mapping[str, tuple]

    def trial_metrics(self, method: str) -> tuple:
        return self.per_trial[method]

    def summaries(self) -> list[MethodSummary]:
        out = []
        for name in self.method_names:
            rows = self.per_trial[name]
            fdp = np.array([r.fdp for r in rows])
            power = np.array([r.power for r in rows])
            rej = np.array([r.rejections for r in rows], dtype=np.float64)
            out.append(
                MethodSummary(
                    method=name,
                    trials=len(rows),
                    mean_fdp=float(fdp.mean()),
                    se_fdp=_standard_error(fdp),
                    mean_power=float(power.mean()),
                    se_power=_standard_error(power),
                    mean_rejections=float(rej.mean()),
                )
            )
        return out


def _standard_error(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return float(values.std(ddof=1) / math.sqrt(values.size))


@lru_cache(maxsize=64)
def _binomial_half_tables(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact fair-coin tail and mass tables: sf[x] = P(B > x), pmf[x] = P(B = x).

    Computed with arbitrary-precision integers and one correctly rounded
    division per entry, so every value is the nearest float to the true
    probability.
    """
    total = 1 << n
    masses = [math.comb(n, x) for x in range(n + 1)]
    sf = np.empty(n + 1)
    pmf = np.empty(n + 1)
    suffix = 0
    for x in range(n, -1, -1):
        sf[x] = suffix / total
        pmf[x] = masses[x] / total
        suffix += masses[x]
    return sf, pmf


def randomized_binomial_pvalues(successes, n: int, u) -> np.ndarray:
    """Randomized one-sided fair-coin test p-values, vectorized.

    For success count x out of n and an independent uniform draw u, the
    p-value is ``P(B > x) + u * P(B = x)`` with B ~ Binomial(n, 1/2),
    testing success probability <= 1/2 against > 1/2.  When the truth is
    exactly 1/2 the result is uniform on (0, 1); below 1/2 it is
    super-uniform.
    """
    _check_count("n", n)
    if n > MAX_EXACT_BINOMIAL_N:
        raise ValueError(
            f"n={n} exceeds the exact-tail limit of {MAX_EXACT_BINOMIAL_N}"
        )
    x = np.asarray(successes)
    if not np.issubdtype(x.dtype, np.integer):
        raise ValueError("successes must be integers")
    if np.any(x < 0) or np.any(x > n):
        raise ValueError(f"successes must lie in [0, {n}]")
    uu = np.asarray(u, dtype=np.float64)
    if not np.all(np.isfinite(uu)) or np.any(uu < 0) or np.any(uu > 1):
        raise ValueError("u must lie in [0, 1]")
    sf, pmf = _binomial_half_tables(n)
    return np.minimum(sf[x] + uu * pmf[x], 1.0)


def randomized_binomial_pvalue(successes: int, n: int, u: float) -> float:
    """Scalar form of :func:`randomized_binomial_pvalues`."""
    return float(randomized_binomial_pvalues([successes], n, [u])[0])


def fdp_and_power(rejected, null_mask) -> TrialMetrics:
    """False discovery proportion and power of one rejection set.

    ``rejected`` holds hypothesis indices; ``null_mask`` is True where a
    hypothesis is null.  An empty rejection set has fdp 0; power is 0
    when no non-nulls exist.
    """
    mask = np.asarray(null_mask, dtype=bool)
    idx = np.asarray(rejected, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= mask.size):
        raise ValueError("rejected indices out of range")
    n_rej = int(idx.size)
    false_rej = int(mask[idx].sum())
    n_alt = int((~mask).sum())
    return TrialMetrics(
        fdp=false_rej / max(n_rej, 1),
        power=(n_rej - false_rej) / max(n_alt, 1),
        rejections=n_rej,
    )


def _evaluate_methods(p_real, p_pooled, null_mask, alpha, epsilon):
    pairs = np.column_stack((p_real, p_pooled))
    guarded = StepUpConfig(alpha=alpha, epsilon=epsilon, mode="fast")
    runs = {
        "BH-real": bh(p_real, alpha),
        "BH-real+eps": bh(p_real, alpha + epsilon),
        "BH-synth": bh(p_pooled, alpha),
        "SynthBH": synth_bh(pairs, guarded),
    }
    return {name: fdp_and_power(run.rejected, null_mask) for name, run in runs.items()}


def _bernoulli_trial(config: SimConfig, trial: int) -> dict[str, TrialMetrics]:
    rng = np.random.default_rng([config.seed, trial])
    m, m_alt = config.m, config.n_alternatives
    q_real = np.full(m, 0.5)
    q_real[:m_alt] = config.q_alt
    synth_null = (
        config.q_synth_alt
        if config.q_synth_null == MIRROR_ALT
        else config.q_synth_null
    )
    q_synth = np.full(m, synth_null)
    q_synth[:m_alt] = config.q_synth_alt
    x_real = rng.binomial(config.n_real, q_real)
    x_synth = rng.binomial(config.n_synth, q_synth)
    u_real = rng.random(m)
    u_pooled = rng.random(m)
    p_real = randomized_binomial_pvalues(x_real, config.n_real, u_real)
    p_pooled = randomized_binomial_pvalues(
        x_real + x_synth, config.n_real + config.n_synth, u_pooled
    )
    null_mask = np.ones(m, dtype=bool)
    null_mask[:m_alt] = False
    return _evaluate_methods(p_real, p_pooled, null_mask, config.alpha, config.epsilon)


def resolve_thread_count() -> int:
    """Worker count for trial execution, from SYNTHBH_THREADS if set."""
    raw = os.environ.get("SYNTHBH_THREADS")
    if raw is None:
        return min(os.cpu_count() or 1, 8)
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"SYNTHBH_THREADS must be an integer, got {raw!r}") from None
    if value < 1:
        raise ValueError(f"SYNTHBH_THREADS must be >= 1, got {value}")
    return value


def _run_trials(
    worker: Callable[[int], dict[str, TrialMetrics]], trials: int
) -> ExperimentResult:
    threads = resolve_thread_count()
    if threads == 1 or trials == 1:
        rows = [worker(t) for t in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(worker, range(trials)))
    per_trial = {
        name: tuple(row[name] for row in rows) for name in METHOD_NAMES
    }
    return ExperimentResult(method_names=METHOD_NAMES, per_trial=per_trial)


def run_bernoulli_experiment(config: SimConfig) -> ExperimentResult:
    """Run the Bernoulli experiment; per-trial metrics for all four methods.

    Each trial draws, per hypothesis, a real success count and a synthetic
    success count, turns them into a real-only p-value and a pooled
    p-value via the randomized binomial test (with independent uniform
    draws for the two), and scores the four methods against the known
    null mask.  Identical seeds give identical results at any thread
    count.
    """
    return _run_trials(lambda t: _bernoulli_trial(config, t), config.trials)


def _outlier_trial(
    trial: int,
    n: int,
    n_synth: int,
    m: int,
    outlier_frac: float,
    contamination_frac: float,
    rho: float,
    alpha: float,
    epsilon: float,
    seed: int,
    mu_out: float,
) -> dict[str, TrialMetrics]:
    rng = np.random.default_rng([seed, trial])
    m_out = round(outlier_frac * m)
    n_contam = round(contamination_frac * n_synth)
    real = rng.normal(0.0, 1.0, n)
    synth_clean = rng.normal(0.0, 1.0, n_synth - n_contam)
    synth_bad = rng.normal(mu_out, 1.0, n_contam)
    test_out = rng.normal(mu_out, 1.0, m_out)
    test_in = rng.normal(0.0, 1.0, m - m_out)
    synth = trim_by_score(np.concatenate([synth_clean, synth_bad]), rho)
    test = np.concatenate([test_out, test_in])
    null_mask = np.ones(m, dtype=bool)
    null_mask[:m_out] = False

    bundle = ScoreBundle(real_scores=real, synth_scores=synth, test_scores=test)
    p_real = conformal_pvalues(real, test)
    p_merged = merged_conformal_pvalues(real, synth, test)
    guarded = detect_outliers(bundle, StepUpConfig(alpha=alpha, epsilon=epsilon))
    runs = {
        "BH-real": bh(p_real, alpha),
        "BH-real+eps": bh(p_real, alpha + epsilon),
        "BH-synth": bh(p_merged, alpha),
        "SynthBH": guarded,
    }
    return {name: fdp_and_power(run.rejected, null_mask) for name, run in runs.items()}


def run_outlier_experiment(
    n: int = 500,
    n_synth: int = 2500,
    m: int = 1000,
    outlier_frac: float = 0.05,
    contamination_frac: float = 0.05,
    rho: float = 0.02,
    alpha: float = 0.1,
    epsilon: float = 0.1,
    trials: int = 100,
    seed: int = 0,
    mu_out: float = 3.0,
) -> ExperimentResult:
    """Gaussian-score outlier experiment with a contaminated auxiliary set.

    Inlier scores are Normal(0, 1) and outlier scores Normal(mu_out, 1);
    the default mu_out of 3.0 was calibrated so the reference-only
    step-up baseline lands near 50% power at the default sizes.  Each
    trial builds a clean reference set of size n, an auxiliary set of
    size n_synth with a ``contamination_frac`` share of outlier-like
    scores, trims its top ``rho`` fraction, and scores the same four
    methods as the Bernoulli experiment, with conformal p-values in the
    real role and pooled conformal p-values in the synthetic role.
    """
    _check_count("n", n)
    _check_count("n_synth", n_synth, minimum=0)
    _check_count("m", m)
    _check_count("trials", trials)
    _check_probability("outlier_frac", outlier_frac)
    _check_probability("contamination_frac", contamination_frac)
    if not (0 <= rho < 1):
        raise ValueError(f"rho must be in [0, 1), got {rho!r}")
    _check_levels(alpha, epsilon)
    if not math.isfinite(mu_out):
        raise ValueError(f"mu_out must be finite, got {mu_out!r}")

    def worker(trial: int) -> dict[str, TrialMetrics]:
        return _outlier_trial(
            trial, n, n_synth, m, outlier_frac, contamination_frac,
            rho, alpha, epsilon, seed, mu_out,
        )

    return _run_trials(worker, trials)
