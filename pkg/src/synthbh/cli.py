"""Command-line front-end.

Subcommands:

* ``test``      run the guarded step-up procedure on a p-value CSV
* ``outliers``  conformal outlier detection on score CSVs
* ``simulate``  seeded Monte Carlo experiments, optionally swept over one
  parameter
* ``bench``     wall-clock timing of the fast and naive engines

Input is always headered CSV; summaries are emitted as JSON (output-only).
Floats are serialized with 17 significant digits so that written results
parse back to the exact same values.  Exit codes: 0 success, 2 validation
error, 3 I/O error.  All randomness flows from ``--seed``; when omitted a
fresh seed is drawn and announced on stderr.  The ``SYNTHBH_THREADS``
environment variable bounds simulation parallelism without affecting
results.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import secrets
import sys
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .conformal import JitterSpec, ScoreBundle, apply_jitter, conformal_pvalues, \
    detect_outliers, merged_conformal_pvalues, trim_by_score
from .simulate import METHOD_NAMES, SimConfig, run_bernoulli_experiment, \
    run_outlier_experiment
from .stepup import StepUpConfig, synth_bh, weighted_synth_bh

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3

NAIVE_BENCH_CAP = 20_000

_BERNOULLI_SWEEP_FIELDS = {
    "n_real": int, "n_synth": int, "m": int, "trials": int,
    "frac_alt": float, "q_alt": float, "q_synth_null": float,
    "q_synth_alt": float, "alpha": float, "epsilon": float,
}
_OUTLIER_SWEEP_FIELDS = {
    "n": int, "n_synth": int, "m": int, "trials": int,
    "outlier_frac": float, "contamination_frac": float, "rho": float,
    "alpha": float, "epsilon": float, "mu_out": float,
}


class CliError(Exception):
    """Failure with a user-facing message and a process exit code."""

    def __init__(self, message: str, exit_code: int = EXIT_VALIDATION) -> None:
        super().__init__(message)
        self.exit_code = exit_code


@dataclass(frozen=True)
class RunManifest:
    """Everything one invocation is going to do, validated up front."""

    command: str
    inputs: tuple = ()
    alpha: float = 0.1
    epsilon: float = 0.0
    weights_path: str | None = None
    mode: str = "fast"
    rho: float = 0.0
    seed: int | None = None
    trials: int = 100
    sweep: str | None = None
    output: str | None = None
    fmt: str = "csv"
    options: Mapping = field(default_factory=dict)


def _fmt_float(x) -> str:
    return format(float(x), ".17g")


def _resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    drawn = secrets.randbits(63)
    print(f"seed={drawn}", file=sys.stderr)
    return drawn


# ---------------------------------------------------------------------------
# CSV ingestion with row/column diagnostics.
# ---------------------------------------------------------------------------


def _open_rows(path: str):
    try:
        with open(path, newline="") as handle:
            return list(csv.reader(handle))
    except OSError as exc:
        raise CliError(f"{path}: {exc.strerror or exc}", EXIT_IO) from exc


def _parse_cell(path: str, row_num: int, column: str, text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise CliError(
            f"{path}: row {row_num}, column {column!r}: not a number: {text!r}"
        ) from None
    if not math.isfinite(value):
        raise CliError(
            f"{path}: row {row_num}, column {column!r}: non-finite value {text!r}"
        )
    return value


def _parse_probability_cell(path: str, row_num: int, column: str, text: str) -> float:
    value = _parse_cell(path, row_num, column, text)
    if not (0 <= value <= 1):
        raise CliError(
            f"{path}: row {row_num}, column {column!r}: "
            f"value {text} outside [0, 1]"
        )
    return value


def read_pvalue_table(path: str):
    """Read ``id,p_real,p_synth[,weight]`` rows.

    Returns (ids, pairs array of shape (m, 2), weights array or None).
    """
    rows = _open_rows(path)
    if not rows:
        raise CliError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    required = ["id", "p_real", "p_synth"]
    if header != required and header != required + ["weight"]:
        raise CliError(
            f"{path}: expected header id,p_real,p_synth[,weight], "
            f"got {','.join(header)}"
        )
    has_weight = len(header) == 4
    ids: list[str] = []
    pairs: list[tuple[float, float]] = []
    weights: list[float] = []
    for offset, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise CliError(
                f"{path}: row {offset}: expected {len(header)} fields, got {len(row)}"
            )
        ids.append(row[0])
        p = _parse_probability_cell(path, offset, "p_real", row[1])
        q = _parse_probability_cell(path, offset, "p_synth", row[2])
        pairs.append((p, q))
        if has_weight:
            w = _parse_cell(path, offset, "weight", row[3])
            if w < 0:
                raise CliError(
                    f"{path}: row {offset}, column 'weight': negative value {row[3]}"
                )
            weights.append(w)
    if not ids:
        raise CliError(f"{path}: no data rows")
    return ids, np.array(pairs), (np.array(weights) if has_weight else None)


def read_single_column(path: str, column: str) -> np.ndarray:
    """Read a one-column CSV whose header names ``column``."""
    rows = _open_rows(path)
    if not rows:
        raise CliError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if header != [column]:
        raise CliError(f"{path}: expected header {column!r}, got {','.join(header)}")
    values = []
    for offset, row in enumerate(rows[1:], start=2):
        if len(row) != 1:
            raise CliError(f"{path}: row {offset}: expected 1 field, got {len(row)}")
        values.append(_parse_cell(path, offset, column, row[0]))
    return np.array(values)


def read_role_scores(path: str) -> dict[str, np.ndarray]:
    """Read a ``role,score`` CSV; roles are real, synth, or test."""
    rows = _open_rows(path)
    if not rows:
        raise CliError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if header != ["role", "score"]:
        raise CliError(f"{path}: expected header role,score, got {','.join(header)}")
    scores: dict[str, list[float]] = {"real": [], "synth": [], "test": []}
    for offset, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise CliError(f"{path}: row {offset}: expected 2 fields, got {len(row)}")
        role = row[0].strip()
        if role not in scores:
            raise CliError(
                f"{path}: row {offset}, column 'role': "
                f"unknown role {row[0]!r} (expected real, synth, or test)"
            )
        scores[role].append(_parse_cell(path, offset, "score", row[1]))
    return {role: np.array(vals) for role, vals in scores.items()}


def read_result_table(path: str):
    """Read back a results CSV written by this tool.

    Returns (header, data rows, summary dict parsed from the trailing
    ``# key=value`` comment line if present).
    """
    summary: dict[str, str] = {}
    data: list[list[str]] = []
    try:
        with open(path, newline="") as handle:
            for line in handle:
                line = line.rstrip("\n")
                if line.startswith("#"):
                    for token in line.lstrip("# ").split():
                        key, _, value = token.partition("=")
                        summary[key] = value
                elif line:
                    data.append(next(csv.reader([line])))
    except OSError as exc:
        raise CliError(f"{path}: {exc.strerror or exc}", EXIT_IO) from exc
    if not data:
        raise CliError(f"{path}: no rows")
    return data[0], data[1:], summary


# ---------------------------------------------------------------------------
# Output helpers.
# ---------------------------------------------------------------------------


class _Sink:
    """Writable text destination: a file path or stdout."""

    def __init__(self, path: str | None) -> None:
        self.path = path

    def __enter__(self):
        if self.path is None:
            self.handle = sys.stdout
        else:
            try:
                self.handle = open(self.path, "w", newline="")
            except OSError as exc:
                raise CliError(f"{self.path}: {exc.strerror or exc}", EXIT_IO) from exc
        return self.handle

    def __exit__(self, exc_type, exc, tb):
        if self.path is not None:
            self.handle.close()
        return False


def _write_json(payload, path: str | None) -> None:
    with _Sink(path) as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")


def _summary_comment(fields: Mapping) -> str:
    return "# " + " ".join(f"{k}={v}" for k, v in fields.items())


# ---------------------------------------------------------------------------
# Subcommands.
# ---------------------------------------------------------------------------


def cmd_test(manifest: RunManifest) -> int:
    """Run the guarded step-up rule over a p-value table."""
    path = manifest.inputs[0]
    ids, pairs, column_weights = read_pvalue_table(path)
    weights = column_weights
    if manifest.weights_path is not None:
        if column_weights is not None:
            raise CliError(
                "weights given twice: drop the input's weight column or "
                "the --weights-file flag"
            )
        weights = read_single_column(manifest.weights_path, "weight")
        if weights.size != len(ids):
            raise CliError(
                f"{manifest.weights_path}: {weights.size} weights for "
                f"{len(ids)} hypotheses"
            )
    try:
        config = StepUpConfig(
            alpha=manifest.alpha,
            epsilon=manifest.epsilon,
            weights=weights,
            mode=manifest.mode,
            normalize_weights=bool(manifest.options.get("normalize_weights", False)),
        )
        result = (
            weighted_synth_bh(pairs, config)
            if weights is not None
            else synth_bh(pairs, config)
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc

    rejected = result.rejection_mask()
    summary = {
        "k_star": result.k_star,
        "alpha": _fmt_float(manifest.alpha),
        "epsilon": _fmt_float(manifest.epsilon),
        "mode": manifest.mode,
        "threshold": _fmt_float(result.threshold_used),
    }
    if manifest.fmt == "json":
        payload = {
            "rows": [
                {
                    "id": ids[j],
                    "p_real": float(pairs[j, 0]),
                    "p_synth": float(pairs[j, 1]),
                    "v": float(result.modified_pvalues[j]),
                    "rejected": bool(rejected[j]),
                }
                for j in range(len(ids))
            ],
            "k_star": result.k_star,
            "alpha": manifest.alpha,
            "epsilon": manifest.epsilon,
            "mode": manifest.mode,
            "threshold": float(result.threshold_used),
        }
        _write_json(payload, manifest.output)
        return EXIT_OK
    with _Sink(manifest.output) as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["id", "p_real", "p_synth", "v", "rejected"])
        for j in range(len(ids)):
            writer.writerow([
                ids[j],
                _fmt_float(pairs[j, 0]),
                _fmt_float(pairs[j, 1]),
                _fmt_float(result.modified_pvalues[j]),
                "true" if rejected[j] else "false",
            ])
        handle.write(_summary_comment(summary) + "\n")
    return EXIT_OK


def _load_bundle(manifest: RunManifest) -> ScoreBundle:
    opts = manifest.options
    if opts.get("scores"):
        by_role = read_role_scores(opts["scores"])
        real, synth, test = by_role["real"], by_role["synth"], by_role["test"]
    else:
        real = read_single_column(opts["real"], "score")
        test = read_single_column(opts["test"], "score")
        synth = (
            read_single_column(opts["synth"], "score")
            if opts.get("synth")
            else np.empty(0)
        )
    if real.size == 0:
        raise CliError("real score set is empty")
    if test.size == 0:
        raise CliError("test score set is empty")
    return ScoreBundle(real_scores=real, synth_scores=synth, test_scores=test)


def cmd_outliers(manifest: RunManifest) -> int:
    """Conformal outlier detection over score files."""
    bundle = _load_bundle(manifest)
    try:
        trimmed = trim_by_score(bundle.synth_scores, manifest.rho)
        working = ScoreBundle(
            real_scores=bundle.real_scores,
            synth_scores=trimmed,
            test_scores=bundle.test_scores,
        )
        if manifest.options.get("jitter", False):
            working = apply_jitter(working, JitterSpec(seed=_resolve_seed(manifest.seed)))
        config = StepUpConfig(
            alpha=manifest.alpha, epsilon=manifest.epsilon, mode=manifest.mode
        )
        p_real = conformal_pvalues(working.real_scores, working.test_scores)
        p_merged = merged_conformal_pvalues(
            working.real_scores, working.synth_scores, working.test_scores
        )
        result = detect_outliers(working, config)
    except ValueError as exc:
        raise CliError(str(exc)) from exc

    rejected = result.rejection_mask()
    summary = {
        "k_star": result.k_star,
        "alpha": _fmt_float(manifest.alpha),
        "epsilon": _fmt_float(manifest.epsilon),
        "mode": manifest.mode,
        "rho": _fmt_float(manifest.rho),
        "n_real": bundle.n_real,
        "n_synth_used": working.n_synth,
    }
    if manifest.fmt == "json":
        payload = {
            "rows": [
                {
                    "id": j,
                    "score": float(bundle.test_scores[j]),
                    "p_real": float(p_real[j]),
                    "p_merged": float(p_merged[j]),
                    "rejected": bool(rejected[j]),
                }
                for j in range(bundle.n_test)
            ],
            "k_star": result.k_star,
            "alpha": manifest.alpha,
            "epsilon": manifest.epsilon,
            "mode": manifest.mode,
            "rho": manifest.rho,
            "n_real": bundle.n_real,
            "n_synth_used": working.n_synth,
        }
        _write_json(payload, manifest.output)
        return EXIT_OK
    with _Sink(manifest.output) as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["id", "score", "p_real", "p_merged", "rejected"])
        for j in range(bundle.n_test):
            writer.writerow([
                j,
                _fmt_float(bundle.test_scores[j]),
                _fmt_float(p_real[j]),
                _fmt_float(p_merged[j]),
                "true" if rejected[j] else "false",
            ])
        handle.write(_summary_comment(summary) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate: sweep parsing and execution.
# ---------------------------------------------------------------------------


def _parse_sweep(text: str, allowed: Mapping[str, type]):
    name, sep, rest = text.partition("=")
    name = name.strip()
    if not sep or not rest.strip():
        raise CliError(f"sweep must look like name=v1,v2,... or name=start:stop:step, got {text!r}")
    if name not in allowed:
        raise CliError(
            f"cannot sweep {name!r}; choose one of {', '.join(sorted(allowed))}"
        )
    rest = rest.strip()
    if ":" in rest:
        parts = rest.split(":")
        if len(parts) != 3:
            raise CliError(f"range sweep must be start:stop:step, got {rest!r}")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError:
            raise CliError(f"non-numeric sweep range {rest!r}") from None
        if step <= 0 or stop < start:
            raise CliError(f"sweep range must have step > 0 and stop >= start, got {rest!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        values = [start + i * step for i in range(count)]
    else:
        try:
            values = [float(p) for p in rest.split(",")]
        except ValueError:
            raise CliError(f"non-numeric sweep values {rest!r}") from None
    caster = allowed[name]
    if caster is int:
        out = []
        for v in values:
            if v != int(v):
                raise CliError(f"sweep over {name!r} needs integers, got {v!r}")
            out.append(int(v))
        return name, out
    return name, values


def _summary_dicts(result) -> list[dict]:
    return [dataclasses.asdict(s) for s in result.summaries()]


def cmd_simulate(manifest: RunManifest) -> int:
    """Run a Monte Carlo experiment, optionally sweeping one parameter."""
    opts = dict(manifest.options)
    experiment = opts.pop("experiment", "bernoulli")
    seed = _resolve_seed(manifest.seed)
    if experiment == "bernoulli":
        allowed = _BERNOULLI_SWEEP_FIELDS
        base_kwargs = {
            "n_real": opts["n_real"], "n_synth": opts["n_synth"], "m": opts["m"],
            "frac_alt": opts["frac_alt"], "q_alt": opts["q_alt"],
            "q_synth_null": opts["q_synth_null"], "q_synth_alt": opts["q_synth_alt"],
            "alpha": manifest.alpha, "epsilon": manifest.epsilon,
            "trials": manifest.trials, "seed": seed,
        }
        if base_kwargs["q_synth_null"] != "mirror-alt":
            base_kwargs["q_synth_null"] = float(base_kwargs["q_synth_null"])

        def run(kwargs):
            return run_bernoulli_experiment(SimConfig(**kwargs))

    elif experiment == "outlier":
        allowed = _OUTLIER_SWEEP_FIELDS
        base_kwargs = {
            "n": opts["n"], "n_synth": opts["n_synth"], "m": opts["m"],
            "outlier_frac": opts["outlier_frac"],
            "contamination_frac": opts["contamination_frac"],
            "rho": manifest.rho, "mu_out": opts["mu_out"],
            "alpha": manifest.alpha, "epsilon": manifest.epsilon,
            "trials": manifest.trials, "seed": seed,
        }

        def run(kwargs):
            return run_outlier_experiment(**kwargs)

    else:
        raise CliError(f"unknown experiment {experiment!r}")

    if manifest.sweep is not None:
        param, values = _parse_sweep(manifest.sweep, allowed)
        points = []
        for value in values:
            kwargs = dict(base_kwargs)
            kwargs[param] = value
            try:
                points.append((value, run(kwargs)))
            except ValueError as exc:
                raise CliError(f"sweep {param}={value!r}: {exc}") from exc
        sweep_info = {"param": param, "values": values}
    else:
        param = None
        try:
            points = [(None, run(base_kwargs))]
        except ValueError as exc:
            raise CliError(str(exc)) from exc
        sweep_info = None

    summary_payload = {
        "experiment": experiment,
        "config": {k: v for k, v in base_kwargs.items()},
        "seed": seed,
        "sweep": sweep_info,
        "points": [
            {"param": param, "value": value, "methods": _summary_dicts(result)}
            for value, result in points
        ],
    }

    if manifest.fmt == "json":
        payload = dict(summary_payload)
        payload["per_trial"] = [
            {
                "param": param,
                "value": value,
                "method": method,
                "trial": trial,
                "fdp": metrics.fdp,
                "power": metrics.power,
                "rejections": metrics.rejections,
            }
            for value, result in points
            for method in result.method_names
            for trial, metrics in enumerate(result.trial_metrics(method))
        ]
        _write_json(payload, manifest.output)
        return EXIT_OK

    with _Sink(manifest.output) as handle:
        writer = csv.writer(handle, lineterminator="\n")
        if param is None:
            writer.writerow(["method", "trial", "fdp", "power", "rejections"])
        else:
            writer.writerow(
                ["param", "value", "method", "trial", "fdp", "power", "rejections"]
            )
        for value, result in points:
            for method in result.method_names:
                for trial, metrics in enumerate(result.trial_metrics(method)):
                    row = [
                        method,
                        trial,
                        _fmt_float(metrics.fdp),
                        _fmt_float(metrics.power),
                        metrics.rejections,
                    ]
                    if param is not None:
                        row = [param, _fmt_float(value)] + row
                    writer.writerow(row)
    if manifest.output is not None:
        stem = manifest.output[:-4] if manifest.output.endswith(".csv") else manifest.output
        _write_json(summary_payload, stem + ".summary.json")
    return EXIT_OK


def cmd_bench(manifest: RunManifest) -> int:
    """Time the fast engine (and the naive oracle at small m)."""
    sizes = manifest.options["sizes"]
    repeats = manifest.options.get("repeats", 3)
    if repeats < 1:
        raise CliError(f"--repeats must be >= 1, got {repeats}")
    seed = _resolve_seed(manifest.seed)
    records = []
    for m in sizes:
        if m < 1:
            raise CliError(f"sizes must be >= 1, got {m}")
        rng = np.random.default_rng([seed, m])
        pairs = rng.random((m, 2))
        modes = ["fast"] if m > NAIVE_BENCH_CAP else ["fast", "naive"]
        for mode in modes:
            config = StepUpConfig(
                alpha=manifest.alpha, epsilon=manifest.epsilon, mode=mode
            )
            best = math.inf
            for _ in range(repeats):
                t0 = time.perf_counter()
                synth_bh(pairs, config)
                best = min(best, time.perf_counter() - t0)
            records.append((m, mode, best))
    with _Sink(manifest.output) as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["m", "mode", "seconds"])
        for m, mode, seconds in records:
            writer.writerow([m, mode, _fmt_float(seconds)])
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing.
# ---------------------------------------------------------------------------


def _add_level_flags(parser: argparse.ArgumentParser, default_epsilon: float) -> None:
    parser.add_argument("--alpha", type=float, default=0.1,
                        help="target FDR level (default 0.1)")
    parser.add_argument("--epsilon", type=float, default=default_epsilon,
                        help=f"admission cost for auxiliary data (default {default_epsilon})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="synthbh",
        description="Guarded step-up multiple testing with auxiliary data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_test = sub.add_parser("test", help="run the step-up procedure on a p-value CSV")
    p_test.add_argument("input", help="CSV with header id,p_real,p_synth[,weight]")
    _add_level_flags(p_test, default_epsilon=0.0)
    p_test.add_argument("--weights-file", help="single-column CSV with header 'weight'")
    p_test.add_argument("--normalize-weights", action="store_true",
                        help="rescale weights to sum to m instead of erroring")
    p_test.add_argument("--mode", choices=["naive", "fast"], default="fast")
    p_test.add_argument("--output", help="output path (default stdout)")
    p_test.add_argument("--format", choices=["csv", "json"], default="csv")

    p_out = sub.add_parser("outliers", help="conformal outlier detection on score CSVs")
    p_out.add_argument("--scores", help="CSV with header role,score (roles real/synth/test)")
    p_out.add_argument("--real", help="single-column score CSV for the reference set")
    p_out.add_argument("--synth", help="single-column score CSV for the auxiliary set")
    p_out.add_argument("--test", help="single-column score CSV for the test points")
    _add_level_flags(p_out, default_epsilon=0.0)
    p_out.add_argument("--rho", type=float, default=0.0,
                       help="fraction of most outlier-like auxiliary scores to trim")
    p_out.add_argument("--mode", choices=["naive", "fast"], default="fast")
    p_out.add_argument("--jitter", action="store_true",
                       help="break score ties with seeded negligible noise")
    p_out.add_argument("--seed", type=int, help="seed for --jitter")
    p_out.add_argument("--output", help="output path (default stdout)")
    p_out.add_argument("--format", choices=["csv", "json"], default="csv")

    p_sim = sub.add_parser("simulate", help="run a seeded Monte Carlo experiment")
    p_sim.add_argument("--experiment", choices=["bernoulli", "outlier"],
                       default="bernoulli")
    _add_level_flags(p_sim, default_epsilon=0.1)
    p_sim.add_argument("--trials", type=int, default=100)
    p_sim.add_argument("--seed", type=int,
                       help="master seed (omitted: drawn from entropy and printed)")
    p_sim.add_argument("--sweep", help="one-parameter sweep: name=v1,v2,... or name=start:stop:step")
    p_sim.add_argument("--output", help="per-trial CSV path (default stdout); "
                       "a .summary.json sidecar is written next to it")
    p_sim.add_argument("--format", choices=["csv", "json"], default="csv")
    bern = p_sim.add_argument_group("bernoulli experiment")
    bern.add_argument("--n-real", type=int, default=200)
    bern.add_argument("--n-synth", type=int, default=1000)
    bern.add_argument("--m", type=int, default=1000)
    bern.add_argument("--frac-alt", type=float, default=0.05)
    bern.add_argument("--q-alt", type=float, default=0.6)
    bern.add_argument("--q-synth-null", default="0.5",
                      help="probability, or 'mirror-alt' for the hostile regime")
    bern.add_argument("--q-synth-alt", type=float, default=0.55)
    outl = p_sim.add_argument_group("outlier experiment")
    outl.add_argument("--n", type=int, default=500)
    outl.add_argument("--outlier-frac", type=float, default=0.05)
    outl.add_argument("--contamination-frac", type=float, default=0.05)
    outl.add_argument("--rho", type=float, default=0.02)
    outl.add_argument("--mu-out", type=float, default=3.0)

    p_bench = sub.add_parser("bench", help="time the fast and naive engines")
    p_bench.add_argument("--sizes", required=True,
                         help="comma-separated problem sizes, e.g. 1000,100000")
    _add_level_flags(p_bench, default_epsilon=0.1)
    p_bench.add_argument("--repeats", type=int, default=3,
                         help="timing repeats per size; the minimum is reported")
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--output", help="output path (default stdout)")
    return parser


def _manifest_from_args(args: argparse.Namespace) -> RunManifest:
    if args.command == "test":
        return RunManifest(
            command="test",
            inputs=(args.input,),
            alpha=args.alpha,
            epsilon=args.epsilon,
            weights_path=args.weights_file,
            mode=args.mode,
            output=args.output,
            fmt=args.format,
            options={"normalize_weights": args.normalize_weights},
        )
    if args.command == "outliers":
        if args.scores and (args.real or args.synth or args.test):
            raise CliError("give either --scores or --real/--synth/--test, not both")
        if not args.scores and not (args.real and args.test):
            raise CliError("score input required: --scores, or --real and --test")
        return RunManifest(
            command="outliers",
            inputs=tuple(p for p in (args.scores, args.real, args.synth, args.test) if p),
            alpha=args.alpha,
            epsilon=args.epsilon,
            mode=args.mode,
            rho=args.rho,
            seed=args.seed,
            output=args.output,
            fmt=args.format,
            options={
                "scores": args.scores,
                "real": args.real,
                "synth": args.synth,
                "test": args.test,
                "jitter": args.jitter,
            },
        )
    if args.command == "simulate":
        q_synth_null = args.q_synth_null
        if q_synth_null != "mirror-alt":
            try:
                q_synth_null = float(q_synth_null)
            except ValueError:
                raise CliError(
                    f"--q-synth-null must be a probability or 'mirror-alt', "
                    f"got {q_synth_null!r}"
                ) from None
        return RunManifest(
            command="simulate",
            alpha=args.alpha,
            epsilon=args.epsilon,
            rho=args.rho,
            seed=args.seed,
            trials=args.trials,
            sweep=args.sweep,
            output=args.output,
            fmt=args.format,
            options={
                "experiment": args.experiment,
                "n_real": args.n_real,
                "n_synth": args.n_synth,
                "m": args.m,
                "frac_alt": args.frac_alt,
                "q_alt": args.q_alt,
                "q_synth_null": q_synth_null,
                "q_synth_alt": args.q_synth_alt,
                "n": args.n,
                "outlier_frac": args.outlier_frac,
                "contamination_frac": args.contamination_frac,
                "mu_out": args.mu_out,
            },
        )
    sizes = []
    for token in args.sizes.split(","):
        try:
            sizes.append(int(token))
        except ValueError:
            raise CliError(f"--sizes must be integers, got {token!r}") from None
    return RunManifest(
        command="bench",
        alpha=args.alpha,
        epsilon=args.epsilon,
        seed=args.seed,
        output=args.output,
        options={"sizes": sizes, "repeats": args.repeats},
    )


_DISPATCH = {
    "test": cmd_test,
    "outliers": cmd_outliers,
    "simulate": cmd_simulate,
    "bench": cmd_bench,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manifest = _manifest_from_args(args)
        return _DISPATCH[manifest.command](manifest)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
