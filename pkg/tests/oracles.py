"""Independent reference computations used as test oracles."""
import numpy as np


def central_diff(f, x, h=1e-5):
    """Central finite-difference gradient of scalar ``f`` with respect to array ``x``, perturbed in place."""
    shape = x.shape
    x = x.reshape(-1)
    g = np.zeros(x.size)
    for i in range(x.size):
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g.reshape(shape)


def grad_mismatch(analytic, numeric, rel=1e-4, floor=1e-8):
    """Indices where neither the absolute floor nor the relative bound holds."""
    err = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    return np.flatnonzero((err > floor) & (err > rel * scale))


def straight_line_mlp(model, z, t, c):
    """Evaluate the denoiser one sample at a time with explicit loops over layers."""
    out = []
    widths = [int(w) for w in model.widths]
    for zi, ti, ci in zip(np.atleast_2d(z), np.atleast_1d(t), np.atleast_1d(c)):
        tau = ti / model.T
        k = np.arange(model.time_dim // 2)
        temb = [np.sin(np.pi * 2.0 ** kk * tau) for kk in k] + [np.cos(np.pi * 2.0 ** kk * tau) for kk in k]
        if model.cond.mode == "onehot":
            cemb = [1.0 if j == ci else 0.0 for j in range(model.n_classes)]
        else:
            cemb = list(model.class_table[ci])
        h = list(zi) + temb + cemb
        off = 0
        for L in range(len(widths) - 1):
            n, m = widths[L], widths[L + 1]
            W = model.params[off:off + n * m]
            b = model.params[off + n * m:off + n * m + m]
            off += n * m + m
            new = []
            for j in range(m):
                s = b[j]
                for i in range(n):
                    s += h[i] * W[i * m + j]
                if L < len(widths) - 2:
                    s = np.tanh(s) if model.activation == "tanh" else max(s, 0.0)
                new.append(s)
            h = new
        out.append(h)
    return np.array(out)


def scan_cosines(bank, v):
    """Exhaustive cosine scan with the plain formula."""
    sims = []
    nv = max(np.sqrt(sum(x * x for x in v)), 1e-12)
    for row in bank:
        nb = max(np.sqrt(sum(x * x for x in row)), 1e-12)
        sims.append(sum(a * b for a, b in zip(row, v)) / (nv * nb))
    return sims


def first_argmin(values):
    best = 0
    for i, v in enumerate(values):
        if v < values[best]:
            best = i
    return best


def first_argmax(values):
    best = 0
    for i, v in enumerate(values):
        if v > values[best]:
            best = i
    return best


class PlantedNoise:
    """Denoiser that returns the exact noise separating ``z`` from a known clean latent."""

    def __init__(self, schedule, z0):
        self.schedule = schedule
        self.z0 = np.asarray(z0, dtype=float)
        self.latent_dim = self.z0.shape[-1]

    def __call__(self, z, t, c):
        g = self.schedule.gammas[np.asarray(t)].reshape(-1, 1)
        return (z - np.sqrt(g) * self.z0) / np.sqrt(1.0 - g)
