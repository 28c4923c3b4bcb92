"""Feature buffers and the min-max representativeness/diversity loss terms."""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import BufferUnderflow, InvalidArgument

COS_EPS = 1e-12


class _Ring:
    __slots__ = ("data", "tags", "n", "head")

    def __init__(self, capacity, dim):
        self.data = np.zeros((capacity, dim))
        self.tags = np.zeros(capacity, dtype=np.int64)
        self.n = 0
        self.head = 0  # slot of the oldest entry once full

    def push(self, vec, tag):
        cap = len(self.data)
        slot = (self.head + self.n) % cap if self.n < cap else self.head
        self.data[slot] = vec
        self.tags[slot] = tag
        if self.n < cap:
            self.n += 1
        else:
            self.head = (self.head + 1) % cap

    def ordered(self, arr):
        if self.n < len(arr):
            return arr[:self.n].copy()
        return np.concatenate((arr[self.head:], arr[:self.head]))


class FeatureBuffer:
    """FIFO store of latent vectors, partitioned by class.

    ``kind`` is ``"real"`` or ``"synthesized"``. With ``scope="global"`` all
    classes share one bucket of size ``capacity``. Entries are copied on
    insertion and only ever handed out as read-only arrays. Each entry
    carries an integer ``tag`` (the trainer uses the step index) so tests
    can check which batch an entry came from.
    """

    def __init__(self, kind, dim, capacity=64, scope="per_class"):
        if kind not in ("real", "synthesized"):
            raise InvalidArgument(f"unknown buffer kind {kind!r}")
        if scope not in ("per_class", "global"):
            raise InvalidArgument(f"unknown buffer scope {scope!r}")
        if capacity < 1:
            raise InvalidArgument(f"capacity must be >= 1, got {capacity}")
        self.kind = kind
        self.dim = int(dim)
        self.capacity = int(capacity)
        self.scope = scope
        self._rings = {}
        self._banks = {}

    def _key(self, c):
        return None if self.scope == "global" else int(c)

    def push(self, features, classes, tag=-1):
        """Append rows of ``features`` under their class; oldest entries fall out first."""
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        classes = np.atleast_1d(np.asarray(classes))
        if features.shape[1] != self.dim:
            raise InvalidArgument(f"feature dim mismatch: expected {self.dim}, got {features.shape[1]}")
        if classes.shape != (features.shape[0],):
            raise InvalidArgument("one class id per feature row is required")
        for vec, c in zip(features, classes):
            key = self._key(c)
            ring = self._rings.get(key)
            if ring is None:
                ring = self._rings[key] = _Ring(self.capacity, self.dim)
            ring.push(vec, tag)
            self._banks.pop(key, None)
        return self

    def count(self, c):
        ring = self._rings.get(self._key(c))
        return ring.n if ring is not None else 0

    def __len__(self):
        return sum(r.n for r in self._rings.values())

    def entries(self, c):
        return list(self.bank(c)) if self.count(c) else []

    def tags(self, c=None):
        if c is None:
            return [int(t) for r in self._rings.values() for t in r.ordered(r.tags)]
        ring = self._rings.get(self._key(c))
        return [] if ring is None else [int(t) for t in ring.ordered(ring.tags)]

    def bank(self, c):
        """``(n, dim)`` read-only array of the class bucket, oldest first."""
        key = self._key(c)
        bank = self._banks.get(key)
        if bank is None:
            ring = self._rings.get(key)
            if ring is None or ring.n == 0:
                raise BufferUnderflow(f"{self.kind} buffer has no entries for class {c}")
            bank = ring.ordered(ring.data)
            bank.flags.writeable = False
            self._banks[key] = bank
        return bank


def cosine_similarity(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.size == 0:
        raise InvalidArgument(f"cosine similarity needs equal non-empty shapes, got {a.shape} and {b.shape}")
    na = max(float(np.linalg.norm(a)), COS_EPS)
    nb = max(float(np.linalg.norm(b)), COS_EPS)
    return float(np.vdot(a, b) / (na * nb))


def cosine_grad(a, b):
    """Gradient of ``cosine_similarity(a, b)`` with respect to ``a``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = float(np.linalg.norm(a))
    nb = max(float(np.linalg.norm(b)), COS_EPS)
    if na <= COS_EPS:
        # the norm clamp is constant here, so only the dot product varies
        return b / (COS_EPS * nb)
    return b / (na * nb) - (a @ b) * a / (na ** 3 * nb)


def _select(buffer, zhat, c, want_max):
    zhat = np.asarray(zhat, dtype=np.float64)
    if zhat.shape != (buffer.dim,):
        raise InvalidArgument(f"feature dim mismatch: expected {buffer.dim}, got {zhat.shape}")
    sim, idx, grad = kernels.cosine_select(buffer.bank(c), zhat, want_max, COS_EPS)
    return sim, grad, idx


def representativeness_term(buffer, zhat, c):
    """``-min_m cos(zhat, z_m)`` over the real bucket of class ``c``.

    Returns ``(value, d value / d zhat, argmin index)``; ties go to the
    lowest index.
    """
    sim, grad, idx = _select(buffer, zhat, c, False)
    return -sim, -grad, idx


def diversity_term(buffer, zhat, c):
    """``max_d cos(zhat, z_d)`` over the synthesized bucket of class ``c``."""
    return _select(buffer, zhat, c, True)


@dataclass
class LossBreakdown:
    l_diff: float
    l_r: float
    l_d: float
    l_total: float
    lambda_r: float
    lambda_d: float
    argmin: list
    argmax: list
    r_skipped: list
    d_skipped: list
    grad_eps_hat: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def any_r_skipped(self):
        return any(self.r_skipped)

    @property
    def any_d_skipped(self):
        return any(self.d_skipped)


def combined_loss(eps, eps_hat, zhat, classes, real_buffer, synth_buffer, lambda_r=1e-3, lambda_d=2e-3):
    """``l_diff + lambda_r * l_r + lambda_d * l_d`` for a batch.

    ``l_diff`` is the batch mean of ``||eps - eps_hat||^2``; ``l_r`` and
    ``l_d`` are batch means of the per-sample terms, where a sample whose
    class bucket is empty contributes 0 and is flagged as skipped (index -1).
    Either buffer may be ``None`` to skip that term outright. The gradient
    of the total with respect to ``eps_hat`` (with ``zhat = z_t - eps_hat``)
    is attached as ``grad_eps_hat``.
    """
    if lambda_r < 0 or lambda_d < 0:
        raise InvalidArgument("loss weights must be non-negative")
    eps = np.atleast_2d(np.asarray(eps, dtype=np.float64))
    eps_hat = np.atleast_2d(np.asarray(eps_hat, dtype=np.float64))
    zhat = np.atleast_2d(np.asarray(zhat, dtype=np.float64))
    if eps.shape != eps_hat.shape or zhat.shape != eps.shape:
        raise InvalidArgument(f"shape mismatch: eps {eps.shape}, eps_hat {eps_hat.shape}, zhat {zhat.shape}")
    classes = np.broadcast_to(np.atleast_1d(np.asarray(classes)), (eps.shape[0],))
    B = eps.shape[0]

    diff = eps_hat - eps
    l_diff = float(np.sum(diff * diff) / B)
    grad = 2.0 * diff / B

    gz = np.zeros_like(zhat)
    r_vals, d_vals = np.zeros(B), np.zeros(B)
    argmin, argmax = [-1] * B, [-1] * B
    r_skip, d_skip = [True] * B, [True] * B
    for i in range(B):
        c = classes[i]
        if real_buffer is not None and real_buffer.count(c):
            r_vals[i], g, argmin[i] = representativeness_term(real_buffer, zhat[i], c)
            r_skip[i] = False
            gz[i] += lambda_r * g / B
        if synth_buffer is not None and synth_buffer.count(c):
            d_vals[i], g, argmax[i] = diversity_term(synth_buffer, zhat[i], c)
            d_skip[i] = False
            gz[i] += lambda_d * g / B
    l_r = float(r_vals.sum() / B)
    l_d = float(d_vals.sum() / B)
    # zhat = z_t - eps_hat
    grad -= gz
    return LossBreakdown(
        l_diff=l_diff, l_r=l_r, l_d=l_d,
        l_total=l_diff + lambda_r * l_r + lambda_d * l_d,
        lambda_r=float(lambda_r), lambda_d=float(lambda_d),
        argmin=argmin, argmax=argmax, r_skipped=r_skip, d_skipped=d_skip,
        grad_eps_hat=grad,
    )
