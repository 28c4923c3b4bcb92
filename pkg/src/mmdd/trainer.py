"""Training loop for the denoiser under the combined diffusion + min-max objective."""
import math
from dataclasses import dataclass

import numpy as np

from .diffusion import forward_noise
from .errors import InvalidArgument, NumericFailure
from .minmax import FeatureBuffer, combined_loss


@dataclass
class TrainConfig:
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
    grad_clip: float = 10.0  # global-norm clip; 0 disables
    checkpoint_every: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise InvalidArgument(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise InvalidArgument(f"epochs must be >= 0, got {self.epochs}")
        if min(self.lr, self.adam_beta1, self.adam_beta2, self.adam_eps) <= 0:
            raise InvalidArgument("learning rate and Adam constants must be positive")
        if self.lambda_r < 0 or self.lambda_d < 0:
            raise InvalidArgument("loss weights must be non-negative")


class Adam:
    """Bias-corrected Adam over a single flat parameter vector (updated in place)."""

    def __init__(self, n_params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.step_count = 0

    def step(self, params, grads):
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        self.m *= b1
        self.m += (1.0 - b1) * grads
        self.v *= b2
        self.v += (1.0 - b2) * grads * grads
        m_hat = self.m / (1.0 - b1 ** self.step_count)
        v_hat = self.v / (1.0 - b2 ** self.step_count)
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return params


def make_buffers(dim, config):
    return (FeatureBuffer("real", dim, config.buffer_capacity, config.buffer_scope),
            FeatureBuffer("synthesized", dim, config.buffer_capacity, config.buffer_scope))


def train_step(model, schedule, buffers, batch, opt, config, rng, codec=None, step=0):
    """One optimisation step; mutates ``model``, ``opt`` and ``buffers``.

    The loss only sees buffer contents from earlier steps: the current
    batch's clean latents and detached clean-latent predictions are pushed
    after the parameter update.
    """
    x, c = batch
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    c = np.atleast_1d(np.asarray(c))
    if x.shape[0] == 0:
        raise InvalidArgument("empty batch")
    real_buf, synth_buf = buffers
    z0 = codec.encode(x) if codec is not None else x
    B = z0.shape[0]
    t = rng.integers(0, schedule.T, size=B)
    eps = rng.standard_normal(z0.shape)
    z_t = forward_noise(schedule, z0, t, eps)
    eps_hat, cache = model.forward_cached(z_t, t, c)
    zhat = z_t - eps_hat

    aux_on = step >= config.warmup_steps
    loss = combined_loss(eps, eps_hat, zhat, c, real_buf, synth_buf,
                         config.lambda_r if aux_on else 0.0,
                         config.lambda_d if aux_on else 0.0)
    if not math.isfinite(loss.l_total):
        raise NumericFailure(
            f"non-finite loss at step {step}: l_diff={loss.l_diff}, l_r={loss.l_r}, l_d={loss.l_d}", step=step)
    grads, _ = model.backward_cached(cache, loss.grad_eps_hat)
    if config.grad_clip > 0:
        norm = float(np.linalg.norm(grads))
        if norm > config.grad_clip:
            grads *= config.grad_clip / norm
    opt.step(model.params, grads)

    real_buf.push(z0, c, tag=step)
    synth_buf.push(zhat, c, tag=step)
    return loss


def stratified_order(labels, rng):
    """Per-epoch ordering that interleaves classes so each batch mixes labels."""
    labels = np.asarray(labels)
    queues = []
    for k in np.unique(labels):
        idx = np.flatnonzero(labels == k)
        queues.append(list(rng.permutation(idx)))
    order = []
    while queues:
        for q in (queues[i] for i in rng.permutation(len(queues))):
            order.append(q.pop())
        queues = [q for q in queues if q]
    return np.array(order, dtype=np.int64)


def train(model, dataset, config, schedule, codec=None, checkpoint=None, on_step=None):
    """Train for ``config.epochs`` epochs; returns ``(model, history)``.

    ``dataset`` is ``(x, labels)``. ``checkpoint`` is a callable taking the
    global step count, called every ``config.checkpoint_every`` steps and
    once at the end. ``on_step(step, buffers)`` runs before each step.
    """
    x, y = dataset
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if len(x) == 0:
        raise InvalidArgument("training set is empty")
    shuffle_seq, noise_seq = np.random.SeedSequence(config.seed).spawn(2)
    shuffle_rng = np.random.default_rng(shuffle_seq)
    noise_rng = np.random.default_rng(noise_seq)
    dim = codec.latent_dim if codec is not None else x.shape[1]
    buffers = make_buffers(dim, config)
    opt = Adam(model.n_params, config.lr, config.adam_beta1, config.adam_beta2, config.adam_eps)
    history = []
    step = 0
    for _ in range(config.epochs):
        order = stratified_order(y, shuffle_rng)
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            if on_step is not None:
                on_step(step, buffers)
            history.append(train_step(model, schedule, buffers, (x[idx], y[idx]), opt,
                                      config, noise_rng, codec, step))
            step += 1
            if checkpoint is not None and config.checkpoint_every and step % config.checkpoint_every == 0:
                checkpoint(step)
    if checkpoint is not None:
        checkpoint(step)
    return model, history


def history_csv(history):
    lines = ["step,l_diff,l_r,l_d,l_total"]
    for i, h in enumerate(history):
        lines.append(f"{i},{h.l_diff!r},{h.l_r!r},{h.l_d!r},{h.l_total!r}")
    return "\n".join(lines) + "\n"
