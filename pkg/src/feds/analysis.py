"""Statistical checks on protected data.

Every metric works on plain numpy arrays of bytes. ``run_report`` repeats a
protection under many random keys and aggregates the metrics into a
:class:`SecurityReport` with min/mean/max/std per metric.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Callable

import numpy as np

from .errors import DegenerateVariance, EmptyInput, GeometryMismatch, LengthMismatch, ShapeMismatch
from .model import canonical_json

DEFAULT_PAIRS = 10_000
DIRECTIONS = {"h": (0, 1), "v": (1, 0), "d": (1, 1)}


def _bytes_array(data) -> np.ndarray:
    if isinstance(data, (bytes, bytearray, memoryview)):
        return np.frombuffer(bytes(data), dtype=np.uint8)
    return np.asarray(data)


def histogram(data) -> np.ndarray:
    a = _bytes_array(data).ravel()
    if a.size == 0:
        raise EmptyInput("histogram of empty data")
    return np.bincount(a.astype(np.int64), minlength=256)[:256]


def chi_square(counts) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum()
    if n == 0:
        raise EmptyInput("no observations")
    e = n / len(counts)
    return float(((counts - e) ** 2 / e).sum())


def _entropy_bits(counts: np.ndarray, axis=-1) -> np.ndarray:
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum(axis=axis, keepdims=True)
    p = np.divide(counts, total, out=np.zeros_like(counts), where=total > 0)
    logs = np.log2(p, out=np.zeros_like(p), where=p > 0)
    return -(p * logs).sum(axis=axis)


def block_entropy(data, h: int = 8) -> float:
    """Mean Shannon entropy (bits) over the h x h tiles of a 2-D byte array."""
    a = np.asarray(data)
    if a.ndim != 2 or a.size == 0 or a.shape[0] % h or a.shape[1] % h:
        raise GeometryMismatch(f"shape {a.shape} does not tile into {h}x{h}")
    rows, cols = a.shape[0] // h, a.shape[1] // h
    tiles = a.reshape(rows, h, cols, h).swapaxes(1, 2).reshape(-1, h * h).astype(np.int64)
    idx = tiles + 256 * np.arange(len(tiles))[:, None]
    counts = np.bincount(idx.ravel(), minlength=256 * len(tiles)).reshape(len(tiles), 256)
    return float(_entropy_bits(counts).mean())


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    x = x.astype(np.float64).ravel()
    y = y.astype(np.float64).ravel()
    dx = x - x.mean()
    dy = y - y.mean()
    vx = (dx * dx).mean()
    vy = (dy * dy).mean()
    if vx == 0 or vy == 0:
        raise DegenerateVariance("correlation undefined for constant samples")
    r = (dx * dy).mean() / math.sqrt(vx * vy)
    return float(min(1.0, max(-1.0, r)))


def adjacent_correlation(image, direction: str = "h", pairs: int = DEFAULT_PAIRS, seed=0) -> float:
    """Correlation of randomly sampled neighbouring pixel pairs."""
    img = np.asarray(image)
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {sorted(DIRECTIONS)}")
    dr, dc = DIRECTIONS[direction]
    if img.ndim != 2 or img.shape[0] <= dr or img.shape[1] <= dc:
        raise GeometryMismatch(f"image {img.shape} too small for direction {direction}")
    rng = np.random.default_rng(seed)
    r = rng.integers(0, img.shape[0] - dr, pairs)
    c = rng.integers(0, img.shape[1] - dc, pairs)
    return _pearson(img[r, c], img[r + dr, c + dc])


def _same_shape(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"shapes {a.shape} and {b.shape} differ")
    if a.size == 0:
        raise EmptyInput("empty arrays")
    return a, b


def corr2d(a, b) -> float:
    a, b = _same_shape(a, b)
    return _pearson(a, b)


def nmi(a, b) -> float:
    """2 I(a;b) / (H(a) + H(b)) from the 256x256 joint histogram."""
    a, b = _same_shape(a, b)
    joint = np.bincount(a.astype(np.int64).ravel() * 256 + b.astype(np.int64).ravel(),
                        minlength=65536).reshape(256, 256)
    hx = float(_entropy_bits(joint.sum(axis=1)))
    hy = float(_entropy_bits(joint.sum(axis=0)))
    if hx + hy == 0:
        raise DegenerateVariance("both inputs are constant")
    hxy = float(_entropy_bits(joint.ravel()))
    mi = hx + hy - hxy
    return float(min(1.0, max(0.0, 2 * mi / (hx + hy))))


def bit_difference(a, b) -> float:
    """Percentage of differing bits."""
    x = _bytes_array(a).astype(np.uint8).ravel()
    y = _bytes_array(b).astype(np.uint8).ravel()
    if len(x) != len(y):
        raise LengthMismatch(f"lengths {len(x)} and {len(y)} differ")
    if len(x) == 0:
        raise EmptyInput("empty inputs")
    return 100.0 * int(np.unpackbits(x ^ y).sum()) / (8 * len(x))


def flip_bit(key: bytes, bit: int) -> bytes:
    k = bytearray(key)
    k[bit // 8] ^= 0x80 >> (bit % 8)
    return bytes(k)


def key_sensitivity(protect_fn: Callable, data, key: bytes, trials: int, rng=None) -> list[float]:
    """Bit difference between outputs under keys one bit apart, per trial."""
    rng = np.random.default_rng(rng)
    base = protect_fn(data, key)
    out = []
    for _ in range(trials):
        other = flip_bit(key, int(rng.integers(0, 8 * len(key))))
        out.append(bit_difference(base, protect_fn(data, other)))
    return out


def psnr(a, b) -> float:
    a, b = _same_shape(a, b)
    mse = float(((a.astype(np.float64) - b.astype(np.float64)) ** 2).mean())
    if mse == 0:
        return math.inf
    return 10 * math.log10(255.0 ** 2 / mse)


def _box_mean(x: np.ndarray, w: int) -> np.ndarray:
    """Mean over every w x w window (valid positions, stride 1)."""
    s = np.zeros((x.shape[0] + 1, x.shape[1] + 1))
    s[1:, 1:] = x.cumsum(0).cumsum(1)
    tot = s[w:, w:] - s[:-w, w:] - s[w:, :-w] + s[:-w, :-w]
    return tot / (w * w)


def ssim(a, b, window: int = 8) -> float:
    a, b = _same_shape(a, b)
    if a.ndim != 2 or min(a.shape) < window:
        raise GeometryMismatch(f"ssim needs 2-D inputs of at least {window}x{window}")
    x = a.astype(np.float64)
    y = b.astype(np.float64)
    c1 = (0.01 * 255) ** 2
    c2 = (0.03 * 255) ** 2
    mx = _box_mean(x, window)
    my = _box_mean(y, window)
    vx = _box_mean(x * x, window) - mx * mx
    vy = _box_mean(y * y, window) - my * my
    cxy = _box_mean(x * y, window) - mx * my
    s = ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
    return float(s.mean())


# -- reports ---------------------------------------------------------------------

@dataclass
class MetricStats:
    min: float
    mean: float
    max: float
    std: float
    undefined: int = 0          # trials where the metric was degenerate
    abs_mean: float = math.nan  # mean of |value|, the useful summary for signed correlations

    @classmethod
    def of(cls, values) -> "MetricStats":
        v = np.asarray([x for x in values if x is not None and not math.isnan(x)], dtype=np.float64)
        bad = len(values) - len(v)
        if len(v) == 0:
            return cls(math.nan, math.nan, math.nan, math.nan, bad)
        finite = v[np.isfinite(v)]
        std = float(finite.std()) if len(finite) == len(v) else math.nan
        return cls(float(v.min()), float(v.mean()), float(v.max()), std, bad, float(np.abs(v).mean()))


METRICS = ("psnr", "ssim", "dif", "ks", "chi2", "entropy_orig", "entropy_enc",
           "rho2d", "rho_h", "rho_v", "rho_d", "nmi")


@dataclass
class SecurityReport:
    trials: int
    psnr: MetricStats
    ssim: MetricStats
    dif: MetricStats
    ks: MetricStats
    chi2: MetricStats
    entropy_orig: MetricStats
    entropy_enc: MetricStats
    rho2d: MetricStats
    rho_h: MetricStats
    rho_v: MetricStats
    rho_d: MetricStats
    nmi: MetricStats
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {"trials": self.trials, "flags": list(self.flags)}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, MetricStats):
                out[f.name] = {k: _json_num(getattr(v, k)) for k in ("min", "mean", "max", "std", "abs_mean", "undefined")}
        return out

    def to_json(self) -> str:
        return canonical_json(self.to_dict()) + "\n"


def _json_num(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def _safe(fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except DegenerateVariance:
        return math.nan


def _crop_like(plain: np.ndarray, view: np.ndarray) -> np.ndarray:
    """Align plain data with a protected view that may hold fewer rows."""
    if plain.shape == view.shape:
        return plain
    flat = plain.ravel()
    if view.size > flat.size:
        raise ShapeMismatch(f"protected view {view.shape} larger than plain {plain.shape}")
    return flat[: view.size].reshape(view.shape)


def trial_metrics(plain, view, pairs: int = DEFAULT_PAIRS, seed=0, ks_view=None) -> dict:
    plain = np.asarray(plain)
    view = np.asarray(view)
    p = _crop_like(plain, view)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seeds = ss.spawn(3)
    m = {
        "psnr": psnr(p, view),
        "ssim": ssim(p, view),
        "dif": bit_difference(p, view),
        "ks": bit_difference(view, ks_view) if ks_view is not None else math.nan,
        "chi2": chi_square(histogram(view)),
        "entropy_orig": block_entropy(p),
        "entropy_enc": block_entropy(view),
        "rho2d": _safe(corr2d, p, view),
        "nmi": _safe(nmi, p, view),
    }
    for (name, s) in zip("hvd", seeds):
        m["rho_" + name] = _safe(adjacent_correlation, view, name, pairs, s)
    return m


def aggregate(rows: list[dict]) -> SecurityReport:
    stats = {name: MetricStats.of([r[name] for r in rows]) for name in METRICS}
    flags = [f"{name} undefined in {s.undefined} trial(s)" for name, s in stats.items()
             if s.undefined and name != "ks"]
    if rows and all(math.isnan(r["ks"]) for r in rows):
        flags.append("ks not measured")
    return SecurityReport(trials=len(rows), flags=flags, **stats)


def pair_report(plain, protected, pairs: int = DEFAULT_PAIRS, seed=0) -> SecurityReport:
    """Single-trial report for an already protected pair (no key sensitivity)."""
    return aggregate([trial_metrics(plain, protected, pairs, seed)])


def run_report(plain, protect_fn: Callable, trials: int = 200, *, seed=0,
               pairs: int = DEFAULT_PAIRS, workers: int = 1, key_len: int = 16) -> SecurityReport:
    """Protect ``plain`` under ``trials`` random keys and aggregate all metrics.

    ``protect_fn(plain, key)`` must be deterministic and return the public
    view as a 2-D uint8 array. Each trial draws its key, the bit flipped for
    key sensitivity and the sampling seed from its own child seed, so the
    report does not depend on ``workers``.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    children = np.random.SeedSequence(seed).spawn(trials)

    def one(ss):
        rng = np.random.default_rng(ss)
        key = rng.bytes(key_len)
        view = protect_fn(plain, key)
        other = protect_fn(plain, flip_bit(key, int(rng.integers(0, 8 * key_len))))
        return trial_metrics(plain, view, pairs, ss.spawn(1)[0], ks_view=other)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, children))
    else:
        rows = [one(ss) for ss in children]
    return aggregate(rows)
