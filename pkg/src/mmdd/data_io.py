"""Toy datasets and the binary file formats.

Labeled-set file (surrogate datasets and real train/test splits), all
little-endian::

    offset  type              field
    0       4 bytes           magic b"SURD"
    4       u32               format version (1)
    8       u32               number of classes C
    12      u32               sample dimension
    16      u64               record count N
    24      N records         dim x f64 sample values, then u32 label
    ...     u32               metadata length L
    ...     L bytes           metadata, UTF-8 JSON object (sorted keys)

Checkpoint file::

    0       4 bytes           magic b"MMDD"
    4       u32               format version (1)
    8       u32 x 7           latent_dim, time_dim, n_classes, class_mode
                              (0 one-hot, 1 learned), class_dim,
                              activation (0 tanh, 1 relu), n_hidden
    36      u32 x n_hidden    hidden widths
    ...     u32, f64, f64     schedule T, beta_min, beta_max
    ...     u32 x 3           codec mode (0 identity, 1 linear), data_dim,
                              codec latent_dim
    ...     u64               parameter count P
    ...     P x f64           denoiser parameters (flat layout, see kernels)
    ...     f64 arrays        linear codec only: encoder (data_dim x latent),
                              then decoder (latent x data_dim), row-major
"""
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, InvalidArgument

SURD_MAGIC = b"SURD"
CKPT_MAGIC = b"MMDD"
FORMAT_VERSION = 1


@dataclass
class LabeledSet:
    samples: np.ndarray
    labels: np.ndarray
    n_classes: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.samples.ndim == 1 and self.samples.size == 0:
            self.samples = self.samples.reshape(0, int(self.metadata.get("dim", 0)))
        if self.samples.ndim != 2 or len(self.samples) != len(self.labels):
            raise InvalidArgument("samples must be 2-D with one label per row")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise InvalidArgument(f"labels outside [0, {self.n_classes})")

    def __len__(self):
        return len(self.labels)

    @property
    def dim(self):
        return self.samples.shape[1]

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.n_classes)


# --------------------------------------------------------------------------
# toy data

@dataclass
class ToyDatasetSpec:
    kind: str = "gaussian_mixture"
    n_classes: int = 4
    dim: int = 2
    samples_per_class: int = 500
    separation: float = 6.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gaussian_mixture", "ring_classes", "grid_digits"):
            raise InvalidArgument(f"unknown dataset kind {self.kind!r}")
        if self.n_classes < 2:
            raise InvalidArgument("need at least 2 classes")
        if self.dim < 1 or self.samples_per_class < 1:
            raise InvalidArgument("dim and samples_per_class must be >= 1")
        if self.kind == "grid_digits" and self.dim != 64:
            raise InvalidArgument("grid_digits samples are 8x8, dim must be 64")
        if self.separation < 0:
            raise InvalidArgument("separation must be non-negative")


def _class_samples(spec, k, rng):
    n, d, sep = spec.samples_per_class, spec.dim, spec.separation
    if spec.kind == "gaussian_mixture":
        theta = 2.0 * np.pi * k / spec.n_classes
        mean = np.zeros(d)
        mean[0] = sep * np.cos(theta)
        if d > 1:
            mean[1] = sep * np.sin(theta)
        return mean + rng.standard_normal((n, d))
    if spec.kind == "ring_classes":
        # concentric rings, radius grows with class id
        phi = rng.uniform(0.0, 2.0 * np.pi, n)
        r = sep * (k + 1) + 0.25 * rng.standard_normal(n)
        x = 0.25 * rng.standard_normal((n, d))
        x[:, 0] = r * np.cos(phi)
        if d > 1:
            x[:, 1] = r * np.sin(phi)
        return x
    glyph = _glyph(spec.seed, k)
    flips = rng.random((n, 64)) < 0.05
    pix = np.where(flips, 1.0 - glyph, glyph)
    return sep * pix + 0.1 * rng.standard_normal((n, 64))


def _glyph(seed, k):
    g = np.random.default_rng([seed, k, 8]).random((8, 8)) < 0.4
    return g.reshape(64).astype(np.float64)


def synth_dataset(spec):
    """Deterministic ``(train, test)`` split, 80/20 stratified per class."""
    rng = np.random.default_rng(spec.seed)
    n_train = int(round(0.8 * spec.samples_per_class))
    parts = {"train": ([], []), "test": ([], [])}
    for k in range(spec.n_classes):
        x = _class_samples(spec, k, rng)
        x = x[rng.permutation(len(x))]
        for name, chunk in (("train", x[:n_train]), ("test", x[n_train:])):
            parts[name][0].append(chunk)
            parts[name][1].append(np.full(len(chunk), k))
    meta = {"kind": spec.kind, "separation": spec.separation, "seed": spec.seed}
    return tuple(
        LabeledSet(np.concatenate(parts[name][0]), np.concatenate(parts[name][1]), spec.n_classes,
                   dict(meta, split=name))
        for name in ("train", "test"))


# --------------------------------------------------------------------------
# labeled-set files

_SURD_HEAD = struct.Struct("<4sIIIQ")


def _record_dtype(dim):
    return np.dtype([("x", "<f8", (dim,)), ("y", "<u4")])


def labeled_to_bytes(data):
    rec = np.zeros(len(data), dtype=_record_dtype(data.dim))
    rec["x"] = data.samples
    rec["y"] = data.labels
    meta = json.dumps(data.metadata, sort_keys=True).encode("utf-8")
    return b"".join([
        _SURD_HEAD.pack(SURD_MAGIC, FORMAT_VERSION, data.n_classes, data.dim, len(data)),
        rec.tobytes(),
        struct.pack("<I", len(meta)),
        meta,
    ])


def labeled_from_bytes(buf, cls=LabeledSet):
    if len(buf) < _SURD_HEAD.size:
        raise FormatError("truncated header", offset=len(buf))
    magic, version, n_classes, dim, count = _SURD_HEAD.unpack_from(buf, 0)
    if magic != SURD_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {SURD_MAGIC!r}", offset=0)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    dt = _record_dtype(dim)
    off = _SURD_HEAD.size
    need = off + count * dt.itemsize
    if len(buf) < need:
        whole = (len(buf) - off) // dt.itemsize
        raise FormatError(f"truncated record {whole} of {count}", offset=off + whole * dt.itemsize)
    rec = np.frombuffer(buf, dtype=dt, count=count, offset=off)
    off = need
    if len(buf) < off + 4:
        raise FormatError("truncated metadata length", offset=off)
    (mlen,) = struct.unpack_from("<I", buf, off)
    off += 4
    if len(buf) < off + mlen:
        raise FormatError("truncated metadata block", offset=len(buf))
    if len(buf) > off + mlen:
        raise FormatError("trailing bytes after metadata", offset=off + mlen)
    try:
        meta = json.loads(bytes(buf[off:off + mlen]).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable metadata: {exc}", offset=off) from None
    labels = rec["y"].astype(np.int64)
    if count and labels.max() >= n_classes:
        bad = int(np.argmax(labels >= n_classes))
        raise FormatError(f"label {labels[bad]} outside [0, {n_classes})",
                          offset=_SURD_HEAD.size + bad * dt.itemsize + 8 * dim)
    samples = np.array(rec["x"], dtype=np.float64).reshape(count, dim)
    return cls(samples, labels, n_classes, meta)


def write_labeled(path, data):
    with open(path, "wb") as fh:
        fh.write(labeled_to_bytes(data))


def read_labeled(path, cls=LabeledSet):
    with open(path, "rb") as fh:
        return labeled_from_bytes(fh.read(), cls)


# --------------------------------------------------------------------------
# checkpoints

_CLASS_MODES = {"onehot": 0, "learned": 1}
_ACTS = {"tanh": 0, "relu": 1}
_CODECS = {"identity": 0, "linear": 1}


def _inverse(d):
    return {v: k for k, v in d.items()}


def checkpoint_to_bytes(model, schedule, codec):
    out = [struct.pack("<4sI", CKPT_MAGIC, FORMAT_VERSION)]
    out.append(struct.pack("<7I", model.latent_dim, model.time_dim, model.n_classes,
                           _CLASS_MODES[model.cond.mode], model.cond.width,
                           _ACTS[model.activation], len(model.hidden)))
    out.append(struct.pack(f"<{len(model.hidden)}I", *model.hidden))
    out.append(struct.pack("<Idd", schedule.T, schedule.beta_min, schedule.beta_max))
    out.append(struct.pack("<3I", _CODECS[codec.mode], codec.data_dim, codec.latent_dim))
    out.append(struct.pack("<Q", model.n_params))
    out.append(model.params.astype("<f8").tobytes())
    if codec.mode == "linear":
        out.append(codec.enc.astype("<f8").tobytes())
        out.append(codec.dec.astype("<f8").tobytes())
    return b"".join(out)


class _Reader:
    def __init__(self, buf):
        self.buf, self.off = buf, 0

    def unpack(self, fmt, what):
        s = struct.Struct("<" + fmt)
        if self.off + s.size > len(self.buf):
            raise FormatError(f"truncated {what}", offset=self.off)
        vals = s.unpack_from(self.buf, self.off)
        self.off += s.size
        return vals

    def floats(self, n, what):
        if self.off + 8 * n > len(self.buf):
            raise FormatError(f"truncated {what}", offset=self.off)
        arr = np.frombuffer(self.buf, dtype="<f8", count=n, offset=self.off).astype(np.float64)
        self.off += 8 * n
        return arr


def checkpoint_from_bytes(buf):
    """Inverse of :func:`checkpoint_to_bytes`; returns ``(model, schedule, codec)``."""
    from .diffusion import NoiseSchedule
    from .numeric_model import DenoiserModel, LatentCodec

    r = _Reader(buf)
    magic, version = r.unpack("4sI", "header")
    if magic != CKPT_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {CKPT_MAGIC!r}", offset=0)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    dims_at = r.off
    latent, tdim, n_classes, cmode, cdim, act, n_hidden = r.unpack("7I", "model dims")
    try:
        cmode, act = _inverse(_CLASS_MODES)[cmode], _inverse(_ACTS)[act]
    except KeyError:
        raise FormatError("unknown class-embedding or activation code", offset=dims_at) from None
    hidden = r.unpack(f"{n_hidden}I", "hidden widths")
    T, bmin, bmax = r.unpack("Idd", "schedule")
    codec_at = r.off
    codec_mode, data_dim, codec_latent = r.unpack("3I", "codec header")
    if codec_mode not in (0, 1):
        raise FormatError(f"unknown codec mode {codec_mode}", offset=codec_at)
    (n_params,) = r.unpack("Q", "parameter count")
    model = DenoiserModel(latent, n_classes, hidden, tdim, T, cmode,
                          cdim if cmode == "learned" else None, act, rng=0)
    if n_params != model.n_params:
        raise FormatError(f"parameter count {n_params} does not match dims ({model.n_params})",
                          offset=r.off - 8)
    model.params[:] = r.floats(n_params, "parameters")
    if codec_mode == 1:
        enc = r.floats(data_dim * codec_latent, "codec encoder").reshape(data_dim, codec_latent)
        dec = r.floats(data_dim * codec_latent, "codec decoder").reshape(codec_latent, data_dim)
        codec = LatentCodec(data_dim, codec_latent, "linear", enc, dec)
    else:
        codec = LatentCodec(data_dim)
    if r.off != len(buf):
        raise FormatError("trailing bytes after checkpoint", offset=r.off)
    return model, NoiseSchedule(T, bmin, bmax), codec


def write_checkpoint(path, model, schedule, codec):
    with open(path, "wb") as fh:
        fh.write(checkpoint_to_bytes(model, schedule, codec))


def read_checkpoint(path):
    with open(path, "rb") as fh:
        return checkpoint_from_bytes(fh.read())
