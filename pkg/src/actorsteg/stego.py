"""Embedding simulators and the subsequent-embedding operator.

All three systems are plus-minus-one embedders driven by the payload-limited
sender: per-pixel change probabilities minimize expected cost subject to the
ternary entropy of the change distribution hitting the target payload. The
message is realized implicitly, by sampling changes from a key-seeded stream
at the sender's optimal rates, which is the standard way to simulate
cost-based embedding without running an actual coder.

Systems:

* ``lsb_matching``   uniform costs, every pixel equally likely to change.
* ``adaptive_hill``  costs low in textured regions: a high-pass residual is
  averaged, inverted, and averaged again with a wide window.
* ``adaptive_var``   costs are the inverse of the local 3x3 variance.

Saturated pixels (0 and 255) change only inward, so outputs always remain
valid 8-bit samples and every change has magnitude exactly 1.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .imagery import Image, box_filter
from .seeding import rng_for

SYSTEMS = ("lsb_matching", "adaptive_hill", "adaptive_var")

LOG2_3 = float(np.log2(3.0))

# Costs are normalized to mean 1 and floored so the bracket [0, _LAMBDA_HI]
# always contains the solution for any target in (0, log2 3].
_COST_FLOOR = 0.05
_LAMBDA_HI = 1024.0
_SOLVER_TOL = 1e-12  # bits per pixel
_SOLVER_MAX_ITERS = 80

_HIGHPASS = np.array(
    [[-1.0, 2.0, -1.0], [2.0, -4.0, 2.0], [-1.0, 2.0, -1.0]]
) / 4.0

# Minimum image side per system, set by the cost filter support.
_MIN_SIZE = {"lsb_matching": 1, "adaptive_hill": 15, "adaptive_var": 3}


@dataclass(frozen=True)
class StegoSpec:
    """One embedding configuration: system identity, payload, and key seed."""

    system: str
    payload_bpp: float
    key_seed: int

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ValueError(f"unknown stego system {self.system!r}, expected one of {SYSTEMS}")
        if not (0.0 < self.payload_bpp <= 1.0):
            raise ValueError(f"payload_bpp must lie in (0, 1], got {self.payload_bpp}")

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "payload_bpp": self.payload_bpp,
            "key_seed": self.key_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StegoSpec":
        return cls(str(d["system"]), float(d["payload_bpp"]), int(d["key_seed"]))


@dataclass(frozen=True)
class EmbeddingRecord:
    """Bookkeeping for how many times an image has been embedded.

    embed_count 0 is a cover, 1 a stego image, 2 a double-stego image; no
    pipeline in this package embeds more than twice.
    """

    spec: Optional[StegoSpec]
    embed_count: int

    def __post_init__(self):
        if not (0 <= self.embed_count <= 2):
            raise ValueError("embed_count must be 0, 1, or 2")
        if self.embed_count > 0 and self.spec is None:
            raise ValueError("embedded images must carry their StegoSpec")


def _conv3x3(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    p = np.pad(np.asarray(x, np.float64), 1, mode="edge")
    h, w = x.shape
    out = np.zeros((h, w), dtype=np.float64)
    for di in range(3):
        for dj in range(3):
            out += kernel[di, dj] * p[di : di + h, dj : dj + w]
    return out


def cost_map(system: str, pixels: np.ndarray) -> np.ndarray:
    """Per-pixel embedding cost for one system (strictly positive)."""
    if system not in SYSTEMS:
        raise ValueError(f"unknown stego system {system!r}")
    h, w = pixels.shape
    if min(h, w) < _MIN_SIZE[system]:
        raise ValueError(
            f"image {w}x{h} too small for the {system} cost filter support "
            f"(needs at least {_MIN_SIZE[system]} per side)"
        )
    px = np.asarray(pixels, np.float64)
    if system == "lsb_matching":
        return np.ones((h, w), dtype=np.float64)
    if system == "adaptive_hill":
        resid = np.abs(_conv3x3(px, _HIGHPASS))
        resid = box_filter(resid, 1)
        cost = 1.0 / (resid + 1e-2)
        return box_filter(cost, 7)
    # adaptive_var
    mean = box_filter(px, 1)
    var = np.maximum(box_filter(px * px, 1) - mean * mean, 0.0)
    return 1.0 / (var + 1e-2)


def _xlog2(v: np.ndarray) -> np.ndarray:
    return np.where(v > 0.0, v * np.log2(np.maximum(v, 1e-300)), 0.0)


def ternary_entropy(p):
    """Per-pixel entropy (bits) of the symmetric ternary change distribution.

    ``p`` is the probability of each of the +1 and -1 changes, so the no-change
    probability is 1 - 2p. Valid for p in [0, 1/3]; elementwise on arrays.
    """
    p = np.asarray(p, np.float64)
    return -2.0 * _xlog2(p) - _xlog2(1.0 - 2.0 * p)


def _solve_lambda(rho: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Per-row Lagrange multipliers so mean ternary entropy hits the targets.

    Bracketed bisection on [0, _LAMBDA_HI] refined by safeguarded Newton
    steps (the Newton candidate is used only when it falls strictly inside
    the current bracket). Rows freeze as soon as they converge, so each
    row's trajectory depends only on that row's data and the result is
    independent of batching.
    """
    b, n = rho.shape
    lo = np.zeros(b)
    hi = np.full(b, _LAMBDA_HI)
    lam = np.zeros(b)
    done = np.zeros(b, dtype=bool)
    cand = 0.5 * (lo + hi)
    for _ in range(_SOLVER_MAX_ITERS):
        e = np.exp(-cand[:, None] * rho)
        p = e / (1.0 + 2.0 * e)
        q = 1.0 - 2.0 * p
        lp = np.log2(p + 1e-300)
        lq = np.log2(q)
        entropy = (-2.0 * p * lp - q * lq).sum(axis=1) / n
        deriv = (2.0 * (lq - lp) * (-rho * p * q)).sum(axis=1) / n

        err = entropy - targets
        conv = np.abs(err) <= _SOLVER_TOL
        newly = conv & ~done
        lam[newly] = cand[newly]
        done |= conv
        if done.all():
            break

        move = ~done
        high = err > 0.0  # too much entropy: lambda must grow
        lo = np.where(move & high, cand, lo)
        hi = np.where(move & ~high, cand, hi)

        with np.errstate(divide="ignore", invalid="ignore"):
            newton = cand - err / deriv
        ok = move & np.isfinite(newton) & (newton > lo) & (newton < hi)
        cand = np.where(ok, newton, 0.5 * (lo + hi))
    lam[~done] = cand[~done]
    return lam


def change_rates(costs: np.ndarray, payloads) -> np.ndarray:
    """Optimal per-direction change probabilities for given costs and payloads.

    ``costs`` has shape (h, w) or (batch, h, w); entries must be finite and
    positive. ``payloads`` is a scalar or per-batch-row vector of target
    entropies in bits per pixel, each in (0, log2 3]. The returned array has
    the shape of ``costs``; entry p means the pixel changes by +1 with
    probability p and by -1 with probability p, chosen in the two-sided Gibbs
    form p = exp(-lam*cost) / (1 + 2 exp(-lam*cost)) with lam solved per
    image so the mean per-pixel entropy hits the target.

    Each image's solve depends only on that image's costs and payload, so
    batched and single-image calls produce bit-identical results. Constant
    cost maps collapse to a single-pixel solve (the mean entropy of identical
    pixels is the per-pixel entropy), which keeps uniform-cost embedding fast.
    """
    c = np.asarray(costs, dtype=np.float64)
    single = c.ndim == 2
    if single:
        c = c[None]
    if c.ndim != 3:
        raise ValueError(f"costs must be 2-D or 3-D, got shape {c.shape}")
    b, h, w = c.shape
    n = h * w
    flat = c.reshape(b, n)
    if not np.all(np.isfinite(flat)) or np.any(flat <= 0.0):
        raise ValueError("costs must be finite and strictly positive")

    rho = flat / flat.mean(axis=1, keepdims=True)
    np.clip(rho, _COST_FLOOR, None, out=rho)

    targets = np.broadcast_to(np.asarray(payloads, dtype=np.float64), (b,)).astype(np.float64)
    if np.any(targets <= 0.0) or np.any(targets > LOG2_3 + 1e-12):
        raise ValueError(f"target payloads must lie in (0, log2(3)], got {payloads!r}")

    uniform = rho.min(axis=1) == rho.max(axis=1)
    lam = np.empty(b)
    if uniform.any():
        lam[uniform] = _solve_lambda(rho[uniform][:, :1], targets[uniform])
    if (~uniform).any():
        lam[~uniform] = _solve_lambda(rho[~uniform], targets[~uniform])

    e = np.exp(-lam[:, None] * rho)
    p = (e / (1.0 + 2.0 * e)).reshape(b, h, w)
    return p[0] if single else p


def _apply_changes(pixels: np.ndarray, p: np.ndarray, key_seed: int) -> np.ndarray:
    rng = rng_for(key_seed, "embed")
    u = rng.random(pixels.shape)
    delta = np.zeros(pixels.shape, dtype=np.int16)
    delta[u < p] = 1
    delta[(u >= p) & (u < 2.0 * p)] = -1
    # Saturated pixels change only inward.
    delta = np.where(pixels == 0, np.abs(delta), delta)
    delta = np.where(pixels == 255, -np.abs(delta), delta)
    return (pixels.astype(np.int16) + delta).astype(np.uint8)


def embed_images(
    covers: Sequence[Image],
    system: str,
    payloads: Sequence[float],
    key_seeds: Sequence[int],
) -> list[Image]:
    """Embed a batch of same-geometry images; elementwise identical to embed()."""
    if not covers:
        return []
    if not (len(covers) == len(payloads) == len(key_seeds)):
        raise ValueError("covers, payloads, and key_seeds must have equal lengths")
    shape = covers[0].pixels.shape
    if any(img.pixels.shape != shape for img in covers):
        raise ValueError("batched embedding requires a single geometry")
    for pl in payloads:
        if not (0.0 < pl <= 1.0):
            raise ValueError(f"payload_bpp must lie in (0, 1], got {pl}")
    stack = np.stack([img.pixels for img in covers])
    costs = np.stack([cost_map(system, img.pixels) for img in covers])
    p = change_rates(costs, np.asarray(payloads, np.float64))
    return [
        Image(_apply_changes(stack[i], p[i], key_seeds[i]))
        for i in range(len(covers))
    ]


def embed(cover: Image, spec: StegoSpec) -> Image:
    """Embed one image. Pure function of (cover, spec)."""
    return embed_images([cover], spec.system, [spec.payload_bpp], [spec.key_seed])[0]


def subsequent_embed(image: Image, spec: StegoSpec, fresh_seed: int) -> Image:
    """Re-embed with the same parameters but a fresh key (and hence message).

    Applying this to a cover yields a stego image; applying it to a stego
    image yields a double-stego image. Costs are recomputed on the input.
    """
    if fresh_seed == spec.key_seed:
        raise ValueError("fresh_seed must differ from the original key seed")
    return embed(image, replace(spec, key_seed=fresh_seed))


def subsequent_embed_images(
    images: Sequence[Image], spec: StegoSpec, fresh_seeds: Sequence[int]
) -> list[Image]:
    """Batched subsequent_embed with one fresh key per image."""
    for s in fresh_seeds:
        if s == spec.key_seed:
            raise ValueError("fresh_seed must differ from the original key seed")
    return embed_images(images, spec.system, [spec.payload_bpp] * len(images), list(fresh_seeds))
