"""Flat ``key = value`` run configuration.

One key per line, ``#`` starts a comment, lists are comma-separated.
Unknown or repeated keys are rejected; every key has a default.
"""
import dataclasses
from dataclasses import dataclass, fields
from typing import get_type_hints

from .errors import ConfigError, InvalidArgument


@dataclass
class RunConfig:
    # toy data
    dataset: str = "gaussian_mixture"
    n_classes: int = 4
    dim: int = 2
    samples_per_class: int = 500
    separation: float = 6.0
    # schedule and sampler
    T: int = 1000
    beta_min: float = 1e-4
    beta_max: float = 2e-2
    steps: int = 10
    # denoiser and codec
    hidden: tuple = (128, 128)
    time_dim: int = 16
    class_embedding: str = "onehot"
    activation: str = "tanh"
    codec: str = "identity"
    latent_dim: int = 0  # 0: same as data dim
    # training
    epochs: int = 8
    batch_size: int = 8
    lr: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    lambda_r: float = 1e-3
    lambda_d: float = 2e-3
    buffer_capacity: int = 64
    buffer_scope: str = "per_class"
    warmup_steps: int = 0
    grad_clip: float = 10.0
    checkpoint_every: int = 0
    # generation
    budget_secs: float = 600.0
    gen_batch_size: int = 8
    clock: str = "real"
    simulated_batch_cost: float = 0.0
    simulated_step_cost: float = 0.0
    # evaluation
    eval_hidden: tuple = (128,)
    eval_lr: float = 0.01
    eval_momentum: float = 0.9
    eval_weight_decay: float = 5e-4
    eval_epochs: int = 200
    eval_repeats: int = 3
    eval_batch_size: int = 64
    sweep_steps: tuple = (5, 10, 15, 20, 25, 30)
    seed: int = 0

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    # builders for the per-module configs

    def schedule(self):
        from .diffusion import NoiseSchedule
        return NoiseSchedule(self.T, self.beta_min, self.beta_max)

    def dataset_spec(self):
        from .data_io import ToyDatasetSpec
        return ToyDatasetSpec(self.dataset, self.n_classes, self.dim, self.samples_per_class,
                              self.separation, self.seed)

    def train_config(self):
        from .trainer import TrainConfig
        return TrainConfig(self.epochs, self.batch_size, self.lr, self.adam_beta1, self.adam_beta2,
                           self.adam_eps, self.lambda_r, self.lambda_d, self.buffer_capacity,
                           self.buffer_scope, self.warmup_steps, self.grad_clip,
                           self.checkpoint_every, self.seed)

    def gen_budget(self, steps=None):
        from .dsr_generator import GenBudget
        return GenBudget(self.budget_secs, self.gen_batch_size, steps or self.steps, self.clock,
                         self.simulated_batch_cost, self.simulated_step_cost)

    def eval_config(self):
        from .evaluator import EvalConfig
        return EvalConfig(self.eval_hidden, self.eval_lr, self.eval_momentum, self.eval_weight_decay,
                          self.eval_epochs, self.eval_repeats, self.eval_batch_size, self.seed)

    def validate(self):
        """Build every sub-config so bad values surface as :class:`ConfigError`."""
        try:
            self.schedule()
            self.dataset_spec()
            self.train_config()
            self.gen_budget()
            self.eval_config()
        except InvalidArgument as exc:
            raise ConfigError(str(exc)) from None
        if self.codec not in ("identity", "linear"):
            raise ConfigError(f"unknown codec {self.codec!r}")
        if self.class_embedding not in ("onehot", "learned"):
            raise ConfigError(f"unknown class_embedding {self.class_embedding!r}")
        if self.activation not in ("tanh", "relu"):
            raise ConfigError(f"unknown activation {self.activation!r}")
        return self


_TYPES = get_type_hints(RunConfig)


def _format(value):
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _convert(key, raw):
    kind = _TYPES[key]
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is tuple:
            return tuple(int(v) for v in raw.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def render_config(cfg):
    return "".join(f"{f.name} = {_format(getattr(cfg, f.name))}\n" for f in fields(cfg))


def parse_config(text, base=None):
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (p.strip() for p in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, raw)
    return dataclasses.replace(base or RunConfig(), **values)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
