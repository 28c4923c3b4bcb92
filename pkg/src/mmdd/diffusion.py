"""Noise schedule, forward noising, clean-latent prediction and DDIM-style sampling."""
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, NumericFailure


@dataclass
class NoiseSchedule:
    """Linear betas; ``gammas[t]`` is the cumulative product of ``1 - beta`` up to ``t``."""

    T: int = 1000
    beta_min: float = 1e-4
    beta_max: float = 2e-2
    betas: np.ndarray = field(init=False, repr=False)
    gammas: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.T < 1:
            raise InvalidArgument(f"T must be >= 1, got {self.T}")
        if not 0.0 < self.beta_min <= self.beta_max < 1.0:
            raise InvalidArgument(f"need 0 < beta_min <= beta_max < 1, got {self.beta_min}, {self.beta_max}")
        self.betas = np.linspace(self.beta_min, self.beta_max, self.T)
        self.gammas = np.cumprod(1.0 - self.betas)

    def _t(self, t):
        t = np.asarray(t)
        if t.size and (t.min() < 0 or t.max() >= self.T):
            raise InvalidArgument(f"timestep outside [0, {self.T})")
        return t


def forward_noise(schedule, z0, t, eps):
    """``sqrt(g_t) * z0 + sqrt(1 - g_t) * eps``; ``t`` may be a scalar or one index per row."""
    z0 = np.asarray(z0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if z0.shape != eps.shape:
        raise InvalidArgument(f"noise shape {eps.shape} does not match latent shape {z0.shape}")
    g = schedule.gammas[schedule._t(t)]
    if np.ndim(g):
        g = g.reshape(-1, *([1] * (z0.ndim - 1)))
    return np.sqrt(g) * z0 + np.sqrt(1.0 - g) * eps


def predict_clean(schedule, model, z_t, t, c):
    """Clean-latent estimate ``z_t - eps_hat`` used by the min-max losses (no 1/sqrt(g_t) factor)."""
    return np.asarray(z_t, dtype=np.float64) - model(z_t, t, c)


@dataclass(frozen=True)
class StepPlan:
    T: int
    timesteps: tuple

    @property
    def S(self):
        return len(self.timesteps)


def make_step_plan(T, S):
    """``S`` timesteps spread uniformly over ``[0, T)``, descending from ``T - 1``.

    Entry ``k`` is ``floor((S - k) * T / S) - 1``. When ``S`` divides ``T`` this
    is the plain stride ``T // S``; plans whose step count divides ``S`` visit
    a subset of this plan's timesteps.
    """
    T, S = int(T), int(S)
    if not 1 <= S <= T:
        raise InvalidArgument(f"step count S={S} outside [1, {T}]")
    return StepPlan(T, tuple(((S - k) * T) // S - 1 for k in range(S)))


def reverse_sample(schedule, model, plan, c, rng, n=None, z_start=None):
    """Deterministic (eta = 0) reverse pass from ``z_T ~ N(0, I)``.

    ``c`` is a class id or a per-row array; ``n`` rows are drawn (defaults to
    ``len(c)``). Between plan steps ``t -> t'`` the update re-noises the
    current clean estimate with the predicted noise; the last step returns
    the clean estimate itself.
    """
    if plan.T != schedule.T:
        raise InvalidArgument(f"plan built for T={plan.T}, schedule has T={schedule.T}")
    c = np.atleast_1d(np.asarray(c))
    if n is None:
        n = c.size
    if c.size == 1 and n != 1:
        c = np.repeat(c, n)
    if z_start is None:
        z = np.random.default_rng(rng).standard_normal((n, model.latent_dim))
    else:
        z = np.array(z_start, dtype=np.float64)
    g = schedule.gammas
    steps = plan.timesteps
    x0 = z
    with np.errstate(over="ignore", invalid="ignore"):
        for i, t in enumerate(steps):
            eps = model(z, np.full(n, t), c)
            x0 = (z - np.sqrt(1.0 - g[t]) * eps) / np.sqrt(g[t])
            if i + 1 < len(steps):
                tn = steps[i + 1]
                z = np.sqrt(g[tn]) * x0 + np.sqrt(1.0 - g[tn]) * eps
                check = z
            else:
                check = x0
            if not np.all(np.isfinite(check)):
                raise NumericFailure(f"non-finite value in reverse sampling at step {i} (t={t})", step=i)
    return x0
