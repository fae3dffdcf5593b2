"""Step-up multiple-testing procedures over real and pooled p-values.

``bh`` is the classical step-up rule.  ``synth_bh`` augments it with pooled
real+auxiliary p-values under a rank-adaptive guard: at candidate rejection
count k, each p-value may be lowered by at most ``k * epsilon / m``.
``weighted_synth_bh`` scales that admission budget per hypothesis.

Two execution modes are provided:

* ``"fast"`` (default) rewrites the rank-adaptive rule as one plain step-up
  run on static modified values ``v_j = min(p_j, max(q_j, c_j * p_j))``
  with ``c_j = alpha / (alpha + w_j * epsilon)``.  One sort, O(m log m)
  time, O(m) memory.
* ``"naive"`` executes the literal rank-by-rank loop in Theta(m^2) time.
  It is retained as a test oracle; the two modes select identical k* and
  rejection sets.

In float arithmetic the naive guard ``p - k*eps/m`` and the fast guard
``c * p`` can land on opposite sides of a threshold by one ULP, and the
fast answer is then authoritative.  Passing ``fractions.Fraction`` values
(for the p-values and for ``alpha``/``epsilon``/``weights``) switches both
modes to exact rational arithmetic, under which they agree bit for bit.
Internally the exact path rescales everything to a common integer
denominator so the fuzz suites run at numpy speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Literal, NamedTuple, Sequence, Union

import numpy as np

Scalar = Union[float, Fraction]

WEIGHT_SUM_ATOL = 1e-9

# Largest magnitude allowed in the rescaled-integer exact path; beyond this
# the engine falls back to pure Fraction arithmetic.
_INT64_SAFE = 2**62


class PValuePair(NamedTuple):
    """Real-data p-value and pooled real+auxiliary p-value for one hypothesis."""

    p_real: Scalar
    p_pooled: Scalar


@dataclass(frozen=True, eq=False)
class StepUpConfig:
    """Levels and mode for the synthetic-powered step-up procedures.

    ``alpha`` is the target FDR level in (0, 1); ``epsilon`` in [0, 1) is
    the admission cost for auxiliary data (0 disables it).  ``weights``,
    when given, must be nonnegative and sum to their length m; set
    ``normalize_weights=True`` to rescale instead of erroring.  Exact
    rational runs pass ``Fraction`` values for the levels and weights.
    """

    alpha: Scalar
    epsilon: Scalar = 0.0
    weights: Sequence[Scalar] | np.ndarray | None = None
    mode: Literal["naive", "fast"] = "fast"
    normalize_weights: bool = False

    def __post_init__(self) -> None:
        _check_level("alpha", self.alpha)
        if isinstance(self.epsilon, float) and not math.isfinite(self.epsilon):
            raise ValueError(f"epsilon must be finite, got {self.epsilon!r}")
        if not (0 <= self.epsilon < 1):
            raise ValueError(f"epsilon must be in [0, 1), got {self.epsilon!r}")
        if self.mode not in ("naive", "fast"):
            raise ValueError(f"mode must be 'naive' or 'fast', got {self.mode!r}")
        if self.weights is not None:
            object.__setattr__(self, "weights", self._validated_weights())

    def _validated_weights(self):
        weights = self.weights
        if isinstance(weights, np.ndarray) and weights.dtype != object:
            w = np.array(weights, dtype=np.float64)
            exact = False
        else:
            w = list(weights)
            exact = any(isinstance(x, Fraction) for x in w)
            if not exact:
                w = np.asarray(w, dtype=np.float64)
        m = len(w)
        if m == 0:
            raise ValueError("weights must be nonempty")
        if exact:
            if any(x < 0 for x in w):
                raise ValueError("weights must be nonnegative")
            total = sum(w)
            if self.normalize_weights:
                if total == 0:
                    raise ValueError("cannot normalize all-zero weights")
                return [x * m / total for x in w]
            if total != m:
                raise ValueError(
                    f"weights must sum to m={m}, got {float(total)!r}"
                )
            return w
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        total = float(np.sum(w))
        if self.normalize_weights:
            if total == 0:
                raise ValueError("cannot normalize all-zero weights")
            return w * (m / total)
        if abs(total - m) > WEIGHT_SUM_ATOL:
            raise ValueError(
                f"weights must sum to m={m} within {WEIGHT_SUM_ATOL}, got {total!r}"
            )
        return w


@dataclass(frozen=True, eq=False)
class RejectionResult:
    """Outcome of one step-up run.

    ``k_star`` is the selected step-up index (0 means nothing rejected);
    ``rejected`` holds the 0-based hypothesis indices, ascending;
    ``modified_pvalues`` are the values actually compared against the
    thresholds (the inputs for ``bh``, the static ``v_j`` in fast mode,
    the guard-``k_star`` adjusted values in naive mode);
    ``threshold_used`` is ``alpha * k_star / m`` (0 when ``k_star == 0``).
    """

    k_star: int
    rejected: np.ndarray
    modified_pvalues: np.ndarray | list
    threshold_used: Scalar

    @property
    def num_rejected(self) -> int:
        return int(self.rejected.shape[0])

    def rejection_mask(self) -> np.ndarray:
        """Boolean mask over the m input hypotheses."""
        mask = np.zeros(len(self.modified_pvalues), dtype=bool)
        mask[self.rejected] = True
        return mask


def _check_level(name: str, value: Scalar) -> None:
    if isinstance(value, float) and not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    if not (0 < value < 1):
        raise ValueError(f"{name} must be in (0, 1), got {value!r}")


def _raise_bad_entry(name: str, vec: np.ndarray) -> None:
    """Pinpoint the offending entry of a failed range check (NaN included)."""
    bad = np.nonzero(~((vec >= 0) & (vec <= 1)))[0]
    i = int(bad[0])
    if not np.isfinite(vec[i]):
        raise ValueError(f"{name} contains non-finite values")
    raise ValueError(f"{name}[{i}]={float(vec[i])!r} outside [0, 1]")


def _check_prob_array(name: str, vec: np.ndarray) -> None:
    """Validate [0, 1] membership with two reduction passes; NaN fails both."""
    if vec.size == 0:
        raise ValueError(f"{name} must be nonempty")
    lo, hi = vec.min(), vec.max()
    if not (lo >= 0 and hi <= 1):
        _raise_bad_entry(name, vec.reshape(-1))


def _as_prob_vector(values, name: str):
    """Return (vector, exact) where vector is float64 ndarray or Fraction list."""
    if isinstance(values, np.ndarray) and values.dtype != object:
        vec = np.asarray(values, dtype=np.float64)
        if vec.ndim != 1:
            raise ValueError(f"{name} must be one-dimensional")
        _check_prob_array(name, vec)
        return vec, False
    items = list(values)
    if not items:
        raise ValueError(f"{name} must be nonempty")
    if any(isinstance(x, Fraction) for x in items):
        out = []
        for i, x in enumerate(items):
            f = x if isinstance(x, Fraction) else Fraction(x)
            if not (0 <= f <= 1):
                raise ValueError(f"{name}[{i}]={x!r} outside [0, 1]")
            out.append(f)
        return out, True
    return _as_prob_vector(np.asarray(items, dtype=np.float64), name)


def _split_pairs(pairs):
    """Split a sequence of (p_real, p_pooled) into two vectors.

    Returns (p, q, exact).  Exact mode is selected when any entry is a
    ``Fraction``; all entries are then converted (floats exactly, by their
    binary value).
    """
    if isinstance(pairs, np.ndarray) and pairs.dtype != object:
        arr = np.asarray(pairs, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("pairs must have shape (m, 2)")
        if arr.shape[0] == 0:
            raise ValueError("pairs must be nonempty")
        lo, hi = arr.min(), arr.max()
        if not (lo >= 0 and hi <= 1):
            _check_prob_array("p_real", np.ascontiguousarray(arr[:, 0]))
            _check_prob_array("p_pooled", np.ascontiguousarray(arr[:, 1]))
        return arr[:, 0], arr[:, 1], False
    rows = list(pairs)
    if not rows:
        raise ValueError("pairs must be nonempty")
    first = [row[0] for row in rows]
    second = [row[1] for row in rows]
    exact = any(isinstance(x, Fraction) for x in first + second)
    if exact:
        p, _ = _as_prob_vector([Fraction(x) for x in first], "p_real")
        q, _ = _as_prob_vector([Fraction(x) for x in second], "p_pooled")
        return p, q, True
    p, _ = _as_prob_vector(np.asarray(first, dtype=np.float64), "p_real")
    q, _ = _as_prob_vector(np.asarray(second, dtype=np.float64), "p_pooled")
    return p, q, False


# ---------------------------------------------------------------------------
# Exact-rational support: rescale to a common integer denominator when the
# magnitudes fit in int64, else fall back to Fraction arithmetic.
# ---------------------------------------------------------------------------


def _lcm_denominator(fracs: Iterable[Fraction]) -> int:
    d = 1
    for f in fracs:
        d = d * f.denominator // math.gcd(d, f.denominator)
    return d


def _scaled_ints(fracs: Sequence[Fraction], denom: int) -> np.ndarray:
    return np.array(
        [f.numerator * (denom // f.denominator) for f in fracs], dtype=np.int64
    )


def _exact_scaling(p, q, unit_fracs, thr_unit):
    """Common denominator for p, q, per-hypothesis guard units, threshold unit.

    Returns the denominator, or None when the rescaled magnitudes would not
    fit comfortably in int64.
    """
    denom = _lcm_denominator([*p, *q, *unit_fracs, thr_unit])
    m = len(p)
    # Guard values reach p - m * unit; thresholds reach m * thr_unit.
    bound = max(
        denom,
        m * max((abs(u.numerator * (denom // u.denominator)) for u in unit_fracs), default=0),
        m * thr_unit.numerator * (denom // thr_unit.denominator),
    )
    if denom >= _INT64_SAFE or bound >= _INT64_SAFE:
        return None
    return denom


# ---------------------------------------------------------------------------
# Core step-up scans (dtype-agnostic: float64 or rescaled int64 arrays).
# ---------------------------------------------------------------------------


def _bh_scan(values: np.ndarray, thresholds: np.ndarray) -> int:
    """k* = max{k : kth smallest value <= thresholds[k-1]}, 0 if none."""
    ordered = np.sort(values)
    passing = np.nonzero(ordered <= thresholds)[0]
    return int(passing[-1]) + 1 if passing.size else 0


def _bh_scan_float(ordered: np.ndarray, alpha: float) -> int:
    """Step-up scan over an ascending float64 array at thresholds alpha*k/m.

    Entries above the largest threshold can never pass, so the comparison
    is confined to the prefix below it; the comparisons themselves are the
    plain ``value <= alpha * k / m`` in float64.
    """
    m = ordered.shape[0]
    top = alpha * m / m
    limit = int(np.searchsorted(ordered, top, side="right"))
    if limit == 0:
        return 0
    ks = np.arange(1.0, limit + 1.0)
    passing = np.nonzero(ordered[:limit] <= alpha * ks / m)[0]
    return int(passing[-1]) + 1 if passing.size else 0


def _naive_scan(p: np.ndarray, q: np.ndarray, units, thresholds: np.ndarray) -> int:
    """Literal rank-adaptive loop; ``units`` is scalar or per-hypothesis."""
    m = p.shape[0]
    k_star = 0
    for k in range(1, m + 1):
        mod = np.minimum(p, np.maximum(q, p - k * units))
        kth = np.partition(mod, k - 1)[k - 1]
        if kth <= thresholds[k - 1]:
            k_star = k
    return k_star


def _bh_fraction_scan(values: Sequence[Fraction], thresholds) -> int:
    ordered = sorted(values)
    k_star = 0
    for k in range(1, len(ordered) + 1):
        if ordered[k - 1] <= thresholds[k - 1]:
            k_star = k
    return k_star


def _naive_fraction_scan(p, q, units, thresholds) -> int:
    m = len(p)
    k_star = 0
    for k in range(1, m + 1):
        mod = sorted(
            min(pj, max(qj, pj - k * uj)) for pj, qj, uj in zip(p, q, units)
        )
        if mod[k - 1] <= thresholds[k - 1]:
            k_star = k
    return k_star


def bh(pvalues, alpha: Scalar) -> RejectionResult:
    """Classical step-up rule at level ``alpha``.

    Selects k* = max{k : m * p_(k) / k <= alpha} and rejects every
    hypothesis whose p-value is at most the k*-th smallest.
    """
    _check_level("alpha", alpha)
    values, exact = _as_prob_vector(pvalues, "pvalues")
    if exact:
        alpha = Fraction(alpha)
        return _bh_exact(values, alpha)
    alpha = float(alpha)
    ordered = np.sort(values)
    k_star = _bh_scan_float(ordered, alpha)
    return _finish_float(values, ordered, k_star, alpha)


def _bh_exact(values: list[Fraction], alpha: Fraction) -> RejectionResult:
    m = len(values)
    thr_unit = alpha / m
    denom = _exact_scaling(values, [], [], thr_unit)
    if denom is not None:
        scaled = _scaled_ints(values, denom)
        thr = np.arange(1, m + 1, dtype=np.int64) * (
            thr_unit.numerator * (denom // thr_unit.denominator)
        )
        k_star = _bh_scan(scaled, thr)
    else:
        thresholds = [alpha * k / m for k in range(1, m + 1)]
        k_star = _bh_fraction_scan(values, thresholds)
    return _assemble_exact(values, k_star, alpha, m)


def _finish_float(modified: np.ndarray, ordered: np.ndarray, k_star: int,
                  alpha: float) -> RejectionResult:
    """Build the result from modified values and their sorted copy."""
    if k_star == 0:
        rejected = np.empty(0, dtype=np.int64)
        threshold = 0.0
    else:
        cutoff = ordered[k_star - 1]
        rejected = np.nonzero(modified <= cutoff)[0]
        threshold = alpha * k_star / modified.shape[0]
    return RejectionResult(
        k_star=k_star,
        rejected=rejected,
        modified_pvalues=modified,
        threshold_used=threshold,
    )


def _assemble(modified: np.ndarray, k_star: int,
              thresholds: np.ndarray) -> RejectionResult:
    if k_star == 0:
        rejected = np.empty(0, dtype=np.int64)
        threshold = 0.0
    else:
        cutoff = np.partition(modified, k_star - 1)[k_star - 1]
        rejected = np.nonzero(modified <= cutoff)[0]
        threshold = float(thresholds[k_star - 1])
    return RejectionResult(
        k_star=k_star,
        rejected=rejected,
        modified_pvalues=modified,
        threshold_used=threshold,
    )


def _assemble_exact(modified, k_star: int, alpha: Fraction,
                    m: int) -> RejectionResult:
    if k_star == 0:
        rejected = np.empty(0, dtype=np.int64)
        threshold: Scalar = Fraction(0)
    else:
        cutoff = sorted(modified)[k_star - 1]
        rejected = np.array(
            [j for j, v in enumerate(modified) if v <= cutoff], dtype=np.int64
        )
        threshold = alpha * k_star / m
    return RejectionResult(
        k_star=k_star,
        rejected=rejected,
        modified_pvalues=list(modified),
        threshold_used=threshold,
    )


def synth_bh(pairs, config: StepUpConfig) -> RejectionResult:
    """Rank-adaptive step-up over (real, pooled) p-value pairs.

    Fast mode runs one plain step-up pass on the static modified values
    ``v_j = min(p_j, max(q_j, c * p_j))`` with ``c = alpha/(alpha+epsilon)``;
    naive mode executes the rank-by-rank loop.  ``config.weights`` must be
    None; use :func:`weighted_synth_bh` for per-hypothesis budgets.
    """
    if config.weights is not None:
        raise ValueError("synth_bh takes no weights; use weighted_synth_bh")
    p, q, exact = _split_pairs(pairs)
    return _stepup_impl(p, q, None, config, exact)


def weighted_synth_bh(pairs, config: StepUpConfig) -> RejectionResult:
    """Weighted rank-adaptive step-up; hypothesis j's guard scales with w_j.

    The fast path uses per-hypothesis ratios ``c_j = alpha/(alpha + w_j *
    epsilon)``.  With all weights equal to one the output matches
    :func:`synth_bh` exactly; with ``epsilon == 0`` it matches :func:`bh`
    on the real p-values.
    """
    if config.weights is None:
        raise ValueError("weighted_synth_bh requires config.weights")
    p, q, exact = _split_pairs(pairs)
    weights = config.weights
    if len(weights) != len(p):
        raise ValueError(
            f"weights length {len(weights)} != number of pairs {len(p)}"
        )
    return _stepup_impl(p, q, weights, config, exact)


def _stepup_impl(p, q, weights, config: StepUpConfig, exact: bool) -> RejectionResult:
    if exact:
        return _stepup_exact(p, q, weights, config)
    return _stepup_float(p, q, weights, config)


def _stepup_float(p: np.ndarray, q: np.ndarray, weights,
                  config: StepUpConfig) -> RejectionResult:
    m = p.shape[0]
    alpha = float(config.alpha)
    eps = float(config.epsilon)
    if weights is None:
        units = eps / m                      # scalar guard increment
        ratios = alpha / (alpha + eps)
    else:
        w = np.asarray(weights, dtype=np.float64)
        units = w * eps / m
        ratios = alpha / (alpha + w * eps)
    if config.mode == "fast":
        v = np.minimum(p, np.maximum(q, ratios * p))
        ordered = np.sort(v)
        k_star = _bh_scan_float(ordered, alpha)
        return _finish_float(v, ordered, k_star, alpha)
    p = np.ascontiguousarray(p)
    q = np.ascontiguousarray(q)
    thresholds = alpha * np.arange(1, m + 1) / m
    k_star = _naive_scan(p, q, units, thresholds)
    modified = np.minimum(p, np.maximum(q, p - k_star * units))
    return _assemble(modified, k_star, thresholds)


def _stepup_exact(p, q, weights, config: StepUpConfig) -> RejectionResult:
    m = len(p)
    alpha = Fraction(config.alpha)
    eps = Fraction(config.epsilon)
    if weights is None:
        w = [Fraction(1)] * m
    else:
        w = [Fraction(x) for x in weights]
    units = [wj * eps / m for wj in w]
    thr_unit = alpha / m
    if config.mode == "fast":
        ratios = [alpha / (alpha + wj * eps) for wj in w]
        v = [min(pj, max(qj, rj * pj)) for pj, qj, rj in zip(p, q, ratios)]
        denom = _exact_scaling(v, [], [], thr_unit)
        if denom is not None:
            thr = np.arange(1, m + 1, dtype=np.int64) * (
                thr_unit.numerator * (denom // thr_unit.denominator)
            )
            k_star = _bh_scan(_scaled_ints(v, denom), thr)
        else:
            thresholds = [thr_unit * k for k in range(1, m + 1)]
            k_star = _bh_fraction_scan(v, thresholds)
        return _assemble_exact(v, k_star, alpha, m)
    denom = _exact_scaling(p, q, units, thr_unit)
    if denom is not None:
        ps = _scaled_ints(p, denom)
        qs = _scaled_ints(q, denom)
        us = _scaled_ints(units, denom)
        thr = np.arange(1, m + 1, dtype=np.int64) * (
            thr_unit.numerator * (denom // thr_unit.denominator)
        )
        k_star = _naive_scan(ps, qs, us, thr)
    else:
        thresholds = [thr_unit * k for k in range(1, m + 1)]
        k_star = _naive_fraction_scan(p, q, units, thresholds)
    modified = [
        min(pj, max(qj, pj - k_star * uj)) for pj, qj, uj in zip(p, q, units)
    ]
    return _assemble_exact(modified, k_star, alpha, m)
