"""Downstream scoring: fit a small classifier on a surrogate set, test on real data."""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateData, InvalidArgument


@dataclass
class EvalConfig:
    hidden: tuple = (128,)
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 5e-4
    epochs: int = 200
    repeats: int = 3
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0 or self.momentum < 0 or self.weight_decay < 0:
            raise InvalidArgument("learning rate must be positive, momentum and decay non-negative")
        if self.repeats < 1 or self.batch_size < 1 or self.epochs < 0:
            raise InvalidArgument("repeats and batch_size must be >= 1, epochs >= 0")


@dataclass
class EvalResult:
    accuracy_mean: float
    accuracy_std: float
    n_samples: int
    acc_gain: float
    accuracies: list
    ipc: int = 0


class Classifier:
    """ReLU MLP with softmax output over standardized inputs."""

    def __init__(self, in_dim, n_classes, hidden=(128,), rng=None):
        rng = np.random.default_rng(rng)
        self.n_classes = int(n_classes)
        self.widths = np.array((in_dim, *hidden, n_classes), dtype=np.int64)
        self.params = np.zeros(kernels.param_count(self.widths))
        for W, _ in kernels.layer_views(self.params, self.widths):
            lim = np.sqrt(6.0 / (W.shape[0] + W.shape[1]))
            W[...] = rng.uniform(-lim, lim, size=W.shape)
        self.mean = np.zeros(in_dim)
        self.scale = np.ones(in_dim)

    def _prep(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.widths[0]:
            raise InvalidArgument(f"input dim mismatch: expected {self.widths[0]}, got {x.shape[1]}")
        return (x - self.mean) / self.scale

    def logits(self, x):
        x = self._prep(x)
        acts = kernels.mlp_forward(self.params, self.widths, x, kernels.RELU)
        return kernels.mlp_output(acts, self.widths, len(x)).copy()

    def predict(self, x):
        return np.argmax(self.logits(x), axis=1)


def softmax_xent(logits, labels):
    """Mean cross-entropy and its gradient with respect to the logits."""
    z = logits - logits.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    n = len(labels)
    loss = -np.mean(np.log(p[np.arange(n), labels] + 1e-300))
    p[np.arange(n), labels] -= 1.0
    return loss, p / n


def train_classifier(data, cfg, rng=None, n_classes=None):
    """Fit a :class:`Classifier` to ``data`` (anything with ``samples`` and ``labels``).

    Minibatch SGD with momentum and L2 weight decay applied to all
    parameters.
    """
    x = np.asarray(data.samples, dtype=np.float64)
    y = np.asarray(data.labels, dtype=np.int64)
    n_classes = n_classes or getattr(data, "n_classes", None) or int(y.max()) + 1
    if len(x) == 0 or len(np.unique(y)) < 2:
        raise DegenerateData("classifier training needs samples from at least two classes")
    rng = np.random.default_rng(rng)
    clf = Classifier(x.shape[1], n_classes, cfg.hidden, rng)
    clf.mean = x.mean(axis=0)
    sd = x.std(axis=0)
    clf.scale = np.where(sd > 1e-12, sd, 1.0)
    xs = clf._prep(x)
    vel = np.zeros_like(clf.params)
    for _ in range(cfg.epochs):
        order = rng.permutation(len(xs))
        for s in range(0, len(order), cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            acts = kernels.mlp_forward(clf.params, clf.widths, xs[idx], kernels.RELU)
            out = kernels.mlp_output(acts, clf.widths, len(idx))
            _, g = softmax_xent(out, y[idx])
            grad, _ = kernels.mlp_backward(clf.params, clf.widths, acts, g, kernels.RELU)
            grad += cfg.weight_decay * clf.params
            vel *= cfg.momentum
            vel += grad
            clf.params -= cfg.lr * vel
    return clf


def evaluate(classifier, test):
    """Test accuracy in percent."""
    x = np.asarray(test.samples if hasattr(test, "samples") else test[0])
    y = np.asarray(test.labels if hasattr(test, "labels") else test[1])
    if len(y) == 0:
        raise InvalidArgument("test set is empty")
    pred = classifier.predict(x)
    return 100.0 * float(np.mean(pred == y))


def accuracy_gain(accuracy_percent, n_samples):
    """Accuracy per sample, in units of 1e-3 percent per sample."""
    if n_samples < 1:
        raise InvalidArgument("accuracy gain needs at least one sample")
    return 1000.0 * accuracy_percent / n_samples


def aggregate(accuracies):
    """Mean and population standard deviation, order-independent."""
    a = np.sort(np.asarray(accuracies, dtype=np.float64))
    return float(a.mean()), float(a.std())


def run_evaluation(surrogate, test, cfg):
    """Train ``cfg.repeats`` classifiers with derived seeds and summarize test accuracy."""
    from .dsr_generator import compute_ipc

    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.repeats)
    accs = [evaluate(train_classifier(surrogate, cfg, np.random.default_rng(s)), test) for s in seeds]
    mean, std = aggregate(accs)
    n = len(surrogate.labels)
    return EvalResult(mean, std, n, accuracy_gain(mean, n), accs,
                      compute_ipc(n, surrogate.n_classes).value)


def eval_csv(result):
    lines = ["repeat,accuracy"]
    lines += [f"{i},{a:.4f}" for i, a in enumerate(result.accuracies)]
    lines.append("mean,std,samples,ipc,gain")
    lines.append(f"{result.accuracy_mean:.4f},{result.accuracy_std:.4f},{result.n_samples},"
                 f"{result.ipc},{result.acc_gain:.4f}")
    return "\n".join(lines) + "\n"
