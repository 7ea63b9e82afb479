"""Fit per-phase localization-freeze rates to target module failure rates.

Both fits use bisection with common random numbers: every evaluation of a
candidate rate replays the same calibration rounds, so the simulated
failure rate is a (noisy but) monotone step function of the parameter.
The pick-phase rate is fitted first, since it also changes which bricks
ever reach the placing phase.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from typing import Callable

from .config import ScenarioConfig
from .errors import ConfigError
from .harness import run_eval

CALIBRATION_SEED = 20_240_917
CALIBRATION_ROUNDS = 200


@dataclass(frozen=True)
class TargetRates:
    """Failure probabilities to reproduce: alignment, and placing given a grasp."""

    align_failure: float
    place_failure: float

    @classmethod
    def from_table(cls, text: str) -> TargetRates:
        """Read a ``module/successes/attempts`` TSV (the report format)."""
        rows = {}
        reader = csv.DictReader(io.StringIO(text), delimiter="\t")
        if reader.fieldnames is None or not {"module", "successes", "attempts"} <= set(reader.fieldnames):
            raise ConfigError("target table needs module, successes and attempts columns")
        for row in reader:
            try:
                rows[row["module"].strip()] = (int(row["successes"]), int(row["attempts"]))
            except (TypeError, ValueError):
                raise ConfigError(f"bad counts in target table row {row}") from None
        try:
            a_s, a_n = rows["Alignment"]
            p_s, p_n = rows["Placing"]
        except KeyError as e:
            raise ConfigError(f"target table lacks a {e.args[0]} row") from None
        if a_n <= 0 or p_n <= 0 or not (0 <= a_s <= a_n and 0 <= p_s <= p_n):
            raise ConfigError("target table counts must satisfy 0 <= successes <= attempts > 0")
        return cls(1.0 - a_s / a_n, 1.0 - p_s / p_n)


@dataclass(frozen=True)
class CalibrationResult:
    freeze_probability_align: float
    freeze_probability_place: float
    align_failure: float
    place_failure: float
    rounds: int
    seed: int


def failure_rates(cfg: ScenarioConfig, jobs: int = 1) -> tuple[float, float]:
    report = run_eval(cfg, jobs)
    align = report.row("Alignment")
    place = report.row("Placing")
    a = 1.0 - align.successes / align.attempts if align.attempts else 0.0
    p = 1.0 - place.successes / place.attempts if place.attempts else 0.0
    return a, p


def bisect_increasing(
    rate: Callable[[float], float],
    target: float,
    lo: float = 0.0,
    hi: float = 1.0,
    iterations: int = 12,
    tolerance: float = 0.002,
) -> tuple[float, float]:
    """Parameter in [lo, hi] whose ``rate`` is closest to ``target``.

    ``rate`` is assumed non-decreasing. Returns (parameter, rate).
    """
    best = None
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        r = rate(mid)
        if best is None or abs(r - target) < abs(best[1] - target):
            best = (mid, r)
        if abs(r - target) <= tolerance:
            break
        if r < target:
            lo = mid
        else:
            hi = mid
    return best


def calibrate(
    cfg: ScenarioConfig,
    targets: TargetRates,
    rounds: int = CALIBRATION_ROUNDS,
    seed: int = CALIBRATION_SEED,
    iterations: int = 12,
    jobs: int = 1,
    log: Callable[[str], None] | None = None,
) -> CalibrationResult:
    base = replace(cfg, rounds=rounds, seed=seed, freeze_probability_align=0.0, freeze_probability_place=0.0)

    def align_rate(p: float) -> float:
        a, _ = failure_rates(replace(base, freeze_probability_align=p), jobs)
        if log:
            log(f"align  p={p:.5f}  failure={a:.4f}  target={targets.align_failure:.4f}")
        return a

    pa, _ = bisect_increasing(align_rate, targets.align_failure, iterations=iterations)
    pa = round(pa, 5)
    tuned = replace(base, freeze_probability_align=pa)

    def place_rate(p: float) -> float:
        _, f = failure_rates(replace(tuned, freeze_probability_place=p), jobs)
        if log:
            log(f"place  p={p:.5f}  failure={f:.4f}  target={targets.place_failure:.4f}")
        return f

    pp, _ = bisect_increasing(place_rate, targets.place_failure, iterations=iterations)
    pp = round(pp, 5)
    a, p = failure_rates(replace(tuned, freeze_probability_place=pp), jobs)
    return CalibrationResult(pa, pp, a, p, rounds, seed)
