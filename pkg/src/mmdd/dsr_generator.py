"""Wall-clock budgeted surrogate generation with a reduced number of diffusion steps."""
import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .data_io import LabeledSet
from .diffusion import make_step_plan, reverse_sample
from .errors import InvalidArgument


@dataclass
class GenBudget:
    """Generation budget.

    With ``clock="simulated"`` every batch costs ``simulated_batch_cost``
    seconds or, if that is unset (0), ``simulated_step_cost * steps``.
    """

    budget: float = 600.0
    batch_size: int = 8
    steps: int = 10
    clock: str = "real"
    simulated_batch_cost: float = 0.0
    simulated_step_cost: float = 0.0

    def __post_init__(self):
        if self.budget < 0:
            raise InvalidArgument(f"budget must be >= 0, got {self.budget}")
        if self.steps < 1 or self.batch_size < 1:
            raise InvalidArgument("steps and batch_size must be >= 1")
        if self.clock not in ("real", "simulated"):
            raise InvalidArgument(f"unknown clock {self.clock!r}")
        if self.clock == "simulated" and self.batch_cost() <= 0:
            raise InvalidArgument("simulated clock needs a positive batch or step cost")

    def batch_cost(self):
        if self.simulated_batch_cost > 0:
            return self.simulated_batch_cost
        return self.simulated_step_cost * self.steps


class RealClock:
    def __init__(self):
        self._t0 = time.perf_counter()

    def elapsed(self):
        return time.perf_counter() - self._t0

    def charge(self):
        pass

    def estimate(self, n_batches):
        # no estimate before the first batch; it always runs
        return self.elapsed() / n_batches if n_batches else 0.0


class SimulatedClock:
    def __init__(self, batch_cost):
        self.batch_cost = batch_cost
        self.n = 0

    def elapsed(self):
        return self.n * self.batch_cost

    def charge(self):
        self.n += 1

    def estimate(self, n_batches):
        return self.batch_cost


class SurrogateDataset(LabeledSet):
    """Generated samples plus generation metadata."""

    @property
    def steps(self):
        return self.metadata.get("steps")

    @property
    def elapsed(self):
        return self.metadata.get("elapsed")

    @property
    def budget_exhausted(self):
        return bool(self.metadata.get("budget_exhausted", False))

    @property
    def per_class_counts(self):
        return list(self.metadata.get("per_class_counts", []))


class IPC(NamedTuple):
    value: int
    exact: Fraction


def compute_ipc(n_samples, n_classes):
    """Images per class: floor value plus the exact ratio."""
    if n_classes < 1:
        raise InvalidArgument(f"n_classes must be >= 1, got {n_classes}")
    exact = Fraction(int(n_samples), int(n_classes))
    return IPC(math.floor(exact), exact)


def generate(model, schedule, budget, n_classes, seed=0, codec=None):
    """Fill the budget with class batches, cycling classes from 0.

    A batch starts only if elapsed time plus the mean batch time so far
    stays within the budget. With a real clock the first batch always runs
    (there is no estimate yet) unless the budget is zero.
    """
    if n_classes < 1:
        raise InvalidArgument(f"n_classes must be >= 1, got {n_classes}")
    plan = make_step_plan(schedule.T, budget.steps)
    clock = SimulatedClock(budget.batch_cost()) if budget.clock == "simulated" else RealClock()
    rng = np.random.default_rng(seed)
    out_dim = codec.data_dim if codec is not None else model.latent_dim
    samples, labels = [], []
    n_batches = 0
    while budget.budget > 0:
        if clock.elapsed() + clock.estimate(n_batches) > budget.budget + 1e-9:
            break
        c = n_batches % n_classes
        z = reverse_sample(schedule, model, plan, c, rng, n=budget.batch_size)
        samples.append(codec.decode(z) if codec is not None else z)
        labels.append(np.full(budget.batch_size, c))
        clock.charge()
        n_batches += 1
    elapsed = clock.elapsed()
    x = np.concatenate(samples) if samples else np.zeros((0, out_dim))
    y = np.concatenate(labels) if labels else np.zeros(0, dtype=np.int64)
    counts = np.bincount(y, minlength=n_classes) if len(y) else np.zeros(n_classes, dtype=np.int64)
    ipc = compute_ipc(len(y), n_classes)
    meta = {
        "steps": budget.steps,
        "elapsed": elapsed,
        "seed": seed,
        "clock": budget.clock,
        "budget": budget.budget,
        "batches": n_batches,
        "mean_batch_time": elapsed / n_batches if n_batches else 0.0,
        "per_class_counts": [int(v) for v in counts],
        "budget_exhausted": n_batches == 0,
        "ipc": ipc.value,
        "ipc_exact": f"{ipc.exact.numerator}/{ipc.exact.denominator}",
    }
    return SurrogateDataset(x, y, n_classes, meta)


@dataclass
class SweepRow:
    steps: int
    batch_time: float
    n_samples: int
    accuracy: float
    acc_gain: float


SWEEP_HEADER = "diff_steps,batchtime_s,num_samples,accuracy,acc_gain"


def sweep_steps(model, schedule, budget, step_list, eval_hook, n_classes, seed=0, codec=None):
    """Generate under the same budget for each step count and score each surrogate.

    ``eval_hook(surrogate)`` returns an accuracy in percent. The gain column
    is in units of 1e-3 percent per sample.
    """
    from .evaluator import accuracy_gain

    rows = []
    for S in step_list:
        b = GenBudget(budget.budget, budget.batch_size, int(S), budget.clock,
                      budget.simulated_batch_cost, budget.simulated_step_cost)
        sur = generate(model, schedule, b, n_classes, seed, codec)
        acc = float(eval_hook(sur)) if len(sur) else float("nan")
        gain = accuracy_gain(acc, len(sur)) if len(sur) else float("nan")
        rows.append(SweepRow(int(S), sur.metadata["mean_batch_time"], len(sur), acc, gain))
    return rows


def sweep_csv(rows):
    lines = [SWEEP_HEADER]
    for r in rows:
        lines.append(f"{r.steps},{r.batch_time:.6g},{r.n_samples},{r.accuracy:.4f},{r.acc_gain:.4f}")
    return "\n".join(lines) + "\n"
