"""Conditional MLP noise predictor and the latent codec.

Arrays are plain float64 numpy arrays. The denoiser input is the
concatenation ``[z_t, time_embedding(t), class_embedding(c)]``.
"""
import numpy as np

from . import kernels
from .errors import InvalidArgument


def time_embedding(t, T, width=16):
    """Sinusoidal features of ``t / T``; returns shape ``(len(t), width)``.

    Frequencies are ``pi * 2**k`` for ``k < width // 2``, sines first.
    """
    if width % 2:
        raise InvalidArgument(f"time embedding width must be even, got {width}")
    tau = np.asarray(t, dtype=np.float64).reshape(-1, 1) / float(T)
    freqs = np.pi * 2.0 ** np.arange(width // 2)
    ang = tau * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


class ConditionEmbedding:
    """Class-label conditioning: one-hot of width C, or rows of a learned table."""

    def __init__(self, n_classes, mode="onehot", width=None):
        if n_classes < 1:
            raise InvalidArgument(f"n_classes must be >= 1, got {n_classes}")
        if mode not in ("onehot", "learned"):
            raise InvalidArgument(f"unknown class embedding mode {mode!r}")
        self.n_classes = int(n_classes)
        self.mode = mode
        if mode == "onehot":
            width = self.n_classes
        self.width = int(width if width is not None else self.n_classes)

    def check(self, c):
        c = np.atleast_1d(np.asarray(c))
        if c.ndim != 1 or not np.issubdtype(c.dtype, np.integer):
            raise InvalidArgument("class ids must be integers")
        if c.size and (c.min() < 0 or c.max() >= self.n_classes):
            bad = c[(c < 0) | (c >= self.n_classes)][0]
            raise InvalidArgument(f"class id {bad} outside [0, {self.n_classes})")
        return c.astype(np.int64)

    def onehot(self, c):
        c = self.check(c)
        out = np.zeros((c.size, self.n_classes))
        out[np.arange(c.size), c] = 1.0
        return out


class DenoiserModel:
    """Noise predictor ``eps_hat(z_t, t, c)`` as a conditional MLP.

    All trainable values live in one flat vector ``params``: the dense
    chain (see :mod:`mmdd.kernels` for its layout) followed, in
    ``class_embedding="learned"`` mode, by the ``(C, class_dim)`` table.
    Hidden layers use Glorot-uniform init; the output layer starts at zero
    so an untrained model predicts zero noise.
    """

    def __init__(self, latent_dim, n_classes, hidden=(128, 128), time_dim=16, T=1000,
                 class_embedding="onehot", class_dim=None, activation="tanh", rng=None):
        if latent_dim < 1:
            raise InvalidArgument(f"latent_dim must be >= 1, got {latent_dim}")
        if activation not in kernels.ACTIVATIONS:
            raise InvalidArgument(f"unknown activation {activation!r}")
        self.latent_dim = int(latent_dim)
        self.time_dim = int(time_dim)
        self.T = int(T)
        self.hidden = tuple(int(h) for h in hidden)
        self.activation = activation
        self.cond = ConditionEmbedding(n_classes, class_embedding, class_dim)
        in_dim = self.latent_dim + self.time_dim + self.cond.width
        self.widths = np.array((in_dim, *self.hidden, self.latent_dim), dtype=np.int64)
        self.n_dense = kernels.param_count(self.widths)
        n_table = self.cond.n_classes * self.cond.width if self.cond.mode == "learned" else 0
        self.params = np.zeros(self.n_dense + n_table)
        self.init_params(rng)

    @property
    def n_classes(self):
        return self.cond.n_classes

    @property
    def n_params(self):
        return self.params.size

    def init_params(self, rng=None):
        rng = np.random.default_rng(rng)
        self.params[:] = 0.0
        layers = kernels.layer_views(self.params, self.widths)
        for W, _ in layers[:-1]:
            lim = np.sqrt(6.0 / (W.shape[0] + W.shape[1]))
            W[...] = rng.uniform(-lim, lim, size=W.shape)
        if self.cond.mode == "learned":
            tab = self.class_table
            lim = np.sqrt(6.0 / (tab.shape[0] + tab.shape[1]))
            tab[...] = rng.uniform(-lim, lim, size=tab.shape)

    @property
    def class_table(self):
        if self.cond.mode != "learned":
            return None
        return self.params[self.n_dense:].reshape(self.cond.n_classes, self.cond.width)

    def copy(self):
        new = object.__new__(DenoiserModel)
        new.__dict__.update(self.__dict__)
        new.params = self.params.copy()
        return new

    # ----------------------------------------------------------------- forward

    def _inputs(self, z_t, t, c):
        z = np.asarray(z_t, dtype=np.float64)
        single = z.ndim == 1
        z2 = z.reshape(1, -1) if single else z
        if z2.ndim != 2 or z2.shape[1] != self.latent_dim:
            got = z2.shape[-1] if z2.ndim else 0
            raise InvalidArgument(f"latent dim mismatch: expected {self.latent_dim}, got {got}")
        B = z2.shape[0]
        t = np.broadcast_to(np.asarray(t), (B,)) if np.ndim(t) == 0 else np.asarray(t)
        if t.shape != (B,):
            raise InvalidArgument(f"timestep batch dim mismatch: expected {B}, got {t.shape[0]}")
        if B and (t.min() < 0 or t.max() >= self.T):
            raise InvalidArgument(f"timestep outside [0, {self.T})")
        c = self.cond.check(c)
        if c.size == 1 and B != 1:
            c = np.repeat(c, B)
        if c.shape != (B,):
            raise InvalidArgument(f"class batch dim mismatch: expected {B}, got {c.shape[0]}")
        if self.cond.mode == "onehot":
            cemb = self.cond.onehot(c)
        else:
            cemb = self.class_table[c]
        x = np.concatenate([z2, time_embedding(t, self.T, self.time_dim), cemb], axis=1)
        return x, c, single

    def forward_cached(self, z_t, t, c):
        """Forward pass that also returns the state needed by :meth:`backward_cached`."""
        x, c, single = self._inputs(z_t, t, c)
        act = kernels.ACTIVATIONS[self.activation]
        acts = kernels.mlp_forward(self.params[:self.n_dense], self.widths, x, act)
        out = kernels.mlp_output(acts, self.widths, x.shape[0]).copy()
        return (out[0] if single else out), (acts, c, single, x.shape[0])

    def forward(self, z_t, t, c):
        return self.forward_cached(z_t, t, c)[0]

    __call__ = forward

    # ---------------------------------------------------------------- backward

    def backward_cached(self, cache, upstream):
        acts, c, single, B = cache
        g = np.asarray(upstream, dtype=np.float64)
        g2 = g.reshape(1, -1) if single else g
        if g2.shape != (B, self.latent_dim) or (single and g.ndim != 1):
            raise InvalidArgument(
                f"upstream gradient shape {g.shape} does not match output shape "
                f"{(self.latent_dim,) if single else (B, self.latent_dim)}")
        act = kernels.ACTIVATIONS[self.activation]
        gdense, gx = kernels.mlp_backward(self.params[:self.n_dense], self.widths, acts, g2, act)
        grads = np.zeros_like(self.params)
        grads[:self.n_dense] = gdense
        if self.cond.mode == "learned":
            off = self.latent_dim + self.time_dim
            gtab = grads[self.n_dense:].reshape(self.cond.n_classes, self.cond.width)
            np.add.at(gtab, c, gx[:, off:])
        gz = gx[:, :self.latent_dim]
        return grads, (gz[0].copy() if single else gz.copy())

    def backward(self, z_t, t, c, upstream_grad):
        """Analytic ``(d params, d z_t)`` for the upstream gradient on the output."""
        _, cache = self.forward_cached(z_t, t, c)
        return self.backward_cached(cache, upstream_grad)


class LatentCodec:
    """Stand-in for a pretrained autoencoder.

    ``identity`` passes vectors through. ``linear`` maps ``x @ enc`` and
    ``z @ dec`` with ``enc`` of shape ``(data_dim, latent_dim)`` and ``dec``
    of shape ``(latent_dim, data_dim)``; :meth:`fit_pca` trains it.
    """

    def __init__(self, data_dim, latent_dim=None, mode="identity", enc=None, dec=None):
        if mode not in ("identity", "linear"):
            raise InvalidArgument(f"unknown codec mode {mode!r}")
        self.mode = mode
        self.data_dim = int(data_dim)
        if mode == "identity":
            latent_dim = self.data_dim
            self.enc = self.dec = None
        else:
            latent_dim = int(latent_dim if latent_dim is not None else data_dim)
            enc = np.eye(self.data_dim, latent_dim) if enc is None else np.asarray(enc, dtype=np.float64)
            dec = enc.T.copy() if dec is None else np.asarray(dec, dtype=np.float64)
            if enc.shape != (self.data_dim, latent_dim) or dec.shape != (latent_dim, self.data_dim):
                raise InvalidArgument(
                    f"codec weights must be {(self.data_dim, latent_dim)} and "
                    f"{(latent_dim, self.data_dim)}, got {enc.shape} and {dec.shape}")
            self.enc, self.dec = enc, dec
        self.latent_dim = int(latent_dim)

    @classmethod
    def fit_pca(cls, x, latent_dim):
        """Linear codec from the top principal directions of ``x`` (uncentred)."""
        x = np.asarray(x, dtype=np.float64)
        _, _, vt = np.linalg.svd(x, full_matrices=False)
        enc = vt[:latent_dim].T.copy()
        return cls(x.shape[1], latent_dim, "linear", enc, enc.T.copy())

    def _check(self, a, dim, what):
        a = np.asarray(a, dtype=np.float64)
        if a.shape[-1:] != (dim,):
            raise InvalidArgument(f"{what} dim mismatch: expected {dim}, got {a.shape[-1] if a.ndim else 0}")
        return a

    def encode(self, x):
        x = self._check(x, self.data_dim, "data")
        return x.copy() if self.mode == "identity" else x @ self.enc

    def decode(self, z):
        z = self._check(z, self.latent_dim, "latent")
        return z.copy() if self.mode == "identity" else z @ self.dec
