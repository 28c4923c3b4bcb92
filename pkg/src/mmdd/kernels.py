"""Hot numeric kernels: dense MLP forward/backward and cosine scans.

Every kernel has two implementations with identical signatures, a numba
``@njit`` one and a pure-numpy one. The public functions dispatch on
:func:`mmdd._backend.active_backend`.

Parameter layout (shared by the denoiser and the evaluation classifier):
a flat float64 vector holding, for each layer ``i`` with fan-in
``widths[i]`` and fan-out ``widths[i+1]``, the row-major weight matrix
``W_i`` of shape ``(widths[i], widths[i+1])`` followed by the bias ``b_i``.
Hidden layers apply the activation, the last layer is linear.

Activations are returned as one flat buffer: layer ``k`` (``k=0`` is the
input) occupies ``B * widths[k]`` consecutive values starting at
``B * sum(widths[:k])``.
"""
import numpy as np

from . import _backend

TANH = 0
RELU = 1

ACTIVATIONS = {"tanh": TANH, "relu": RELU}


def param_count(widths):
    return int(sum(widths[i] * widths[i + 1] + widths[i + 1] for i in range(len(widths) - 1)))


def layer_views(params, widths):
    """List of ``(W, b)`` views into a flat parameter vector."""
    views = []
    off = 0
    for n, m in zip(widths[:-1], widths[1:]):
        W = params[off:off + n * m].reshape(n, m)
        off += n * m
        views.append((W, params[off:off + m]))
        off += m
    return views


def activation_views(acts, widths, batch):
    out = []
    off = 0
    for w in widths:
        out.append(acts[off:off + batch * w].reshape(batch, w))
        off += batch * w
    return out


# --------------------------------------------------------------------------
# numpy path


def _mlp_forward_np(params, widths, x, act):
    B = x.shape[0]
    acts = np.empty(B * int(np.sum(widths)))
    views = activation_views(acts, widths, B)
    views[0][...] = x
    layers = layer_views(params, widths)
    last = len(layers) - 1
    for i, (W, b) in enumerate(layers):
        h = views[i] @ W + b
        if i < last:
            h = np.tanh(h) if act == TANH else np.maximum(h, 0.0)
        views[i + 1][...] = h
    return acts


def _mlp_backward_np(params, widths, acts, gout, act):
    B = gout.shape[0]
    grad = np.zeros_like(params)
    gviews = layer_views(grad, widths)
    views = activation_views(acts, widths, B)
    layers = layer_views(params, widths)
    delta = np.array(gout, dtype=np.float64)
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        a_in = views[i]
        gviews[i][0][...] = a_in.T @ delta
        gviews[i][1][...] = delta.sum(axis=0)
        g_in = delta @ W.T
        if i > 0:
            if act == TANH:
                g_in *= 1.0 - a_in * a_in
            else:
                g_in *= a_in > 0.0
        delta = g_in
    return grad, delta


def _cosine_rows_np(bank, v, eps):
    nv = max(float(np.sqrt(v @ v)), eps)
    # sequential accumulation over coordinates (same order as the jit loop);
    # BLAS gemv rounding can depend on a row's position, which breaks exact ties
    bt = bank.T
    dot = np.add.reduce(bt * v[:, None], axis=0)
    nb = np.maximum(np.sqrt(np.add.reduce(bt * bt, axis=0)), eps)
    return dot / (nb * nv)


def _cosine_select_np(bank, v, eps, want_max):
    sims = _cosine_rows_np(bank, v, eps)
    idx = int(np.argmax(sims) if want_max else np.argmin(sims))
    b = bank[idx]
    na = float(np.sqrt(v @ v))
    nb = max(float(np.sqrt(b @ b)), eps)
    if na <= eps:
        grad = b / (eps * nb)
    else:
        grad = b / (na * nb) - (v @ b) * v / (na ** 3 * nb)
    return float(sims[idx]), idx, grad


# --------------------------------------------------------------------------
# numba path

if _backend.NUMBA_AVAILABLE:
    from numba import njit

    @njit(cache=True)
    def _mlp_forward_jit(params, widths, x, act):
        B = x.shape[0]
        total = 0
        for w in widths:
            total += w
        acts = np.empty(B * total)
        n0 = widths[0]
        for r in range(B):
            for j in range(n0):
                acts[r * n0 + j] = x[r, j]
        n_layers = widths.shape[0] - 1
        p_off = 0
        a_off = 0
        for i in range(n_layers):
            n = widths[i]
            m = widths[i + 1]
            W = params[p_off:p_off + n * m].reshape((n, m))
            p_off += n * m
            b = params[p_off:p_off + m]
            p_off += m
            a_in = acts[a_off:a_off + B * n].reshape((B, n))
            h = np.dot(a_in, W)
            a_off += B * n
            hidden = i < n_layers - 1
            for r in range(B):
                for j in range(m):
                    v = h[r, j] + b[j]
                    if hidden:
                        if act == 0:
                            v = np.tanh(v)
                        elif v < 0.0:
                            v = 0.0
                    acts[a_off + r * m + j] = v
        return acts

    @njit(cache=True)
    def _mlp_backward_jit(params, widths, acts, gout, act):
        B = gout.shape[0]
        n_layers = widths.shape[0] - 1
        p_offs = np.zeros(n_layers, dtype=np.int64)
        a_offs = np.zeros(n_layers + 1, dtype=np.int64)
        off = 0
        for i in range(n_layers):
            p_offs[i] = off
            off += widths[i] * widths[i + 1] + widths[i + 1]
        off = 0
        for k in range(n_layers + 1):
            a_offs[k] = off
            off += B * widths[k]
        grad = np.zeros_like(params)
        delta = np.ascontiguousarray(gout)
        for i in range(n_layers - 1, -1, -1):
            n = widths[i]
            m = widths[i + 1]
            po = p_offs[i]
            W = params[po:po + n * m].reshape((n, m))
            a_in = acts[a_offs[i]:a_offs[i] + B * n].reshape((B, n))
            gW = np.dot(np.ascontiguousarray(a_in.T), delta)
            for p in range(n):
                for q in range(m):
                    grad[po + p * m + q] = gW[p, q]
            for q in range(m):
                s = 0.0
                for r in range(B):
                    s += delta[r, q]
                grad[po + n * m + q] = s
            g_in = np.dot(delta, np.ascontiguousarray(W.T))
            if i > 0:
                for r in range(B):
                    for p in range(n):
                        a = a_in[r, p]
                        if act == 0:
                            g_in[r, p] *= 1.0 - a * a
                        elif a <= 0.0:
                            g_in[r, p] = 0.0
            delta = g_in
        return grad, delta

    @njit(cache=True)
    def _cosine_rows_jit(bank, v, eps):
        n, d = bank.shape
        nv = 0.0
        for j in range(d):
            nv += v[j] * v[j]
        nv = max(np.sqrt(nv), eps)
        out = np.empty(n)
        for i in range(n):
            dot = 0.0
            nb = 0.0
            for j in range(d):
                dot += bank[i, j] * v[j]
                nb += bank[i, j] * bank[i, j]
            out[i] = dot / (max(np.sqrt(nb), eps) * nv)
        return out

    @njit(cache=True)
    def _cosine_select_jit(bank, v, eps, want_max):
        sims = _cosine_rows_jit(bank, v, eps)
        idx = 0
        for i in range(1, sims.shape[0]):
            if (want_max and sims[i] > sims[idx]) or (not want_max and sims[i] < sims[idx]):
                idx = i
        d = v.shape[0]
        na = 0.0
        nb = 0.0
        dot = 0.0
        for j in range(d):
            na += v[j] * v[j]
            nb += bank[idx, j] * bank[idx, j]
            dot += v[j] * bank[idx, j]
        na = np.sqrt(na)
        nb = max(np.sqrt(nb), eps)
        grad = np.empty(d)
        for j in range(d):
            if na <= eps:
                grad[j] = bank[idx, j] / (eps * nb)
            else:
                grad[j] = bank[idx, j] / (na * nb) - dot * v[j] / (na * na * na * nb)
        return sims[idx], idx, grad

else:  # pragma: no cover
    _mlp_forward_jit = _mlp_forward_np
    _mlp_backward_jit = _mlp_backward_np
    _cosine_rows_jit = _cosine_rows_np
    _cosine_select_jit = _cosine_select_np


# --------------------------------------------------------------------------
# dispatch


def _as_widths(widths):
    return np.ascontiguousarray(widths, dtype=np.int64)


def mlp_forward(params, widths, x, act=TANH):
    """Run the dense chain on a ``(B, widths[0])`` batch; returns the flat activation buffer."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if _backend.active_backend() == "numba":
        return _mlp_forward_jit(params, _as_widths(widths), x, act)
    return _mlp_forward_np(params, _as_widths(widths), x, act)


def mlp_backward(params, widths, acts, gout, act=TANH):
    """Gradients ``(d params, d input)`` for upstream gradient ``gout`` on the output."""
    gout = np.ascontiguousarray(gout, dtype=np.float64)
    if _backend.active_backend() == "numba":
        return _mlp_backward_jit(params, _as_widths(widths), acts, gout, act)
    return _mlp_backward_np(params, _as_widths(widths), acts, gout, act)


def mlp_output(acts, widths, batch):
    return acts[len(acts) - batch * widths[-1]:].reshape(batch, widths[-1])


def cosine_rows(bank, v, eps=1e-12):
    """Cosine similarity of every row of ``bank`` against ``v``."""
    bank = np.ascontiguousarray(bank, dtype=np.float64)
    v = np.ascontiguousarray(v, dtype=np.float64)
    if _backend.active_backend() == "numba":
        return _cosine_rows_jit(bank, v, eps)
    return _cosine_rows_np(bank, v, eps)


def cosine_select(bank, v, want_max, eps=1e-12):
    """Hard min (or max) cosine over ``bank`` rows.

    Returns ``(similarity, index, d similarity / d v)``; ties resolve to the
    lowest index.
    """
    bank = np.ascontiguousarray(bank, dtype=np.float64)
    v = np.ascontiguousarray(v, dtype=np.float64)
    if _backend.active_backend() == "numba":
        sim, idx, grad = _cosine_select_jit(bank, v, eps, bool(want_max))
        return float(sim), int(idx), grad
    return _cosine_select_np(bank, v, eps, bool(want_max))
