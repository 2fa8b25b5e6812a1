"""Shared stochastic machinery: exact event-driven (Gillespie direct-method)
sampling, reproducible per-trial random streams, trial orchestration and
summary statistics.

All experiment modules build on this. Trials are independent; the stream for
trial ``i`` is derived from ``(master_seed, i)`` with a counter-based generator
(Philox), so results are bit-identical for any degree of parallelism.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

STASIS = "stasis"

_WORKER_ENV = "DISSMEM_WORKERS"


def stream(master_seed: int, index: int) -> np.random.Generator:
    """Counter-based random stream for trial `index` under `master_seed`.

    Distinct (seed, index) pairs give statistically independent streams;
    identical pairs reproduce identical sequences on all platforms.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((master_seed, index))))


class RateTable:
    """Named event classes with nonnegative rates and an incrementally
    maintained total."""

    def __init__(self, rates=None):
        self._rates: dict = {}
        self._total = 0.0
        if rates:
            for name, rate in dict(rates).items():
                self.set(name, rate)

    def set(self, name, rate: float) -> None:
        if rate < 0.0:
            raise ValueError(f"negative rate for {name!r}: {rate}")
        self._total += rate - self._rates.get(name, 0.0)
        if rate == 0.0:
            self._rates.pop(name, None)
        else:
            self._rates[name] = rate

    def get(self, name) -> float:
        return self._rates.get(name, 0.0)

    @property
    def total(self) -> float:
        return self._total

    def recompute_total(self) -> float:
        """From-scratch total, for consistency checks."""
        return math.fsum(self._rates.values())

    def items(self):
        return self._rates.items()

    def __len__(self):
        return len(self._rates)


def next_event(rates: RateTable, rng: np.random.Generator):
    """Draw (waiting_time, event_class) for the direct Gillespie method.

    Waiting time is Exponential(total rate); the class is chosen with
    probability proportional to its rate. A zero total rate signals stasis:
    returns (inf, STASIS).
    """
    total = rates.total
    if total <= 0.0:
        return math.inf, STASIS
    wait = rng.exponential(1.0 / total)
    u = rng.random() * total
    acc = 0.0
    last = None
    for name, rate in rates.items():
        acc += rate
        last = name
        if u < acc:
            return wait, name
    # u landed on the accumulated-rounding edge; return the last class
    return wait, last


@dataclass
class Estimate:
    """Monte Carlo statistic over uncensored trial values.

    Censored trials are counted separately and never imputed into the mean.
    """

    mean: float
    stderr: float
    n_trials: int
    n_censored: int
    values: list = field(default_factory=list, repr=False)
    censored_flags: list = field(default_factory=list, repr=False)

    @classmethod
    def from_outcomes(cls, values, censored) -> "Estimate":
        values = list(values)
        censored = list(censored)
        obs = [v for v, c in zip(values, censored) if not c]
        n_cens = sum(bool(c) for c in censored)
        if obs:
            mean = float(np.mean(obs))
            stderr = float(np.std(obs, ddof=1) / math.sqrt(len(obs))) if len(obs) > 1 else 0.0
        else:
            mean = math.nan
            stderr = math.nan
        return cls(mean=mean, stderr=stderr, n_trials=len(values),
                   n_censored=n_cens, values=values, censored_flags=censored)


@dataclass
class TrialOutcome:
    """Outcome of one simulated trial."""

    failure_time: float
    censored: bool
    n_noise_events: int = 0
    n_correction_events: int = 0
    n_checks: int = 0


class TrialFailure(RuntimeError):
    """One or more trials raised; carries the per-index exceptions."""

    def __init__(self, errors: dict):
        self.errors = errors
        idx = sorted(errors)
        super().__init__(f"{len(errors)} trial(s) failed at indices {idx}: {errors[idx[0]]!r}")


_worker_fn = None


def _init_worker(fn, master_seed):
    global _worker_fn
    _worker_fn = (fn, master_seed)


def _run_one(index):
    fn, master_seed = _worker_fn
    try:
        return index, fn(stream(master_seed, index), index), None
    except Exception as exc:  # isolated and reported per index
        return index, None, exc


def default_workers() -> int:
    env = os.environ.get(_WORKER_ENV)
    if env:
        return max(1, int(env))
    return 1


def run_trials(trial, n: int, master_seed: int, parallelism: int | None = None) -> list:
    """Run `n` independent seeded trials of `trial(rng, index)`.

    Returns the list of results ordered by trial index; the result is
    bit-identical for any parallelism degree. Trial exceptions are isolated
    and re-raised together as TrialFailure.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if parallelism is None:
        parallelism = default_workers()
    results = [None] * n
    errors = {}
    if parallelism <= 1:
        _init_worker(trial, master_seed)
        for i in range(n):
            _, res, err = _run_one(i)
            if err is not None:
                errors[i] = err
            else:
                results[i] = res
    else:
        with ProcessPoolExecutor(max_workers=parallelism,
                                 initializer=_init_worker,
                                 initargs=(trial, master_seed)) as pool:
            for i, res, err in pool.map(_run_one, range(n), chunksize=max(1, n // (parallelism * 8))):
                if err is not None:
                    errors[i] = err
                else:
                    results[i] = res
    if errors:
        raise TrialFailure(errors)
    return results


def estimate_times(outcomes) -> Estimate:
    """Aggregate TrialOutcome failure times into an Estimate."""
    return Estimate.from_outcomes([o.failure_time for o in outcomes],
                                  [o.censored for o in outcomes])
