"""Interference-network instances: strength matrices, link classes, generators.

A network is described by its matrix of channel strength exponents: entry
``alpha[k, i]`` scales the power of the link from transmitter ``i`` into
receiver ``k`` as ``P**alpha[k, i]``, with direct links on the diagonal
(normalized to 1 in all generated networks).  A cross entry of exactly 0
means the link is absent: it carries no signal at any power.  Optional
per-link phases and a nominal power are carried for finite-SNR rate
evaluation; every GDoF-level computation depends on the exponents alone.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = [
    "DIRECT",
    "WEAK",
    "ChannelSpec",
    "QuantizationScheme",
    "classify_links",
    "link_class_name",
    "validate",
    "reciprocal",
    "gen_cyclic_random",
    "gen_neighboring",
    "with_phases",
    "linear_gain_matrix",
    "channel_to_dict",
    "channel_from_dict",
    "load_channel",
    "save_channel",
]

DIRECT = -1
WEAK = 0


def _frozen_array(values, dtype) -> np.ndarray:
    out = np.array(values, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ChannelSpec:
    """A K-user single-antenna interference network.

    ``alpha[k, i]`` is the strength exponent of the link from transmitter
    ``i`` into receiver ``k``.  ``theta`` holds per-link phases in radians
    and is consumed only by finite-SNR rate evaluation; ``P`` is the nominal
    power used there.  Instances are immutable.
    """

    K: int
    alpha: np.ndarray
    theta: np.ndarray | None = None
    P: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "alpha", _frozen_array(self.alpha, float))
        if self.theta is not None:
            object.__setattr__(self, "theta", _frozen_array(self.theta, float))
        if self.P is not None:
            object.__setattr__(self, "P", float(self.P))


def validate(spec: ChannelSpec) -> None:
    """Raise ValidationError unless every ChannelSpec invariant holds."""
    if spec.K < 1:
        raise ValidationError(f"user-count: K must be a positive integer, got {spec.K}")
    if spec.alpha.shape != (spec.K, spec.K):
        raise ValidationError(
            f"dimension-mismatch: alpha has shape {spec.alpha.shape}, "
            f"expected ({spec.K}, {spec.K})"
        )
    if not np.all(np.isfinite(spec.alpha)):
        raise ValidationError("non-finite-exponent: alpha entries must be finite")
    if np.any(spec.alpha < 0):
        raise ValidationError("negative-exponent: all strength exponents must be >= 0")
    if np.any(np.diag(spec.alpha) <= 0):
        raise ValidationError("non-positive-direct-link: diagonal entries must be > 0")
    if spec.theta is not None and spec.theta.shape != spec.alpha.shape:
        raise ValidationError(
            f"dimension-mismatch: theta has shape {spec.theta.shape}, "
            f"expected {spec.alpha.shape}"
        )
    if spec.theta is not None and not np.all(np.isfinite(spec.theta)):
        raise ValidationError("non-finite-phase: theta entries must be finite")
    if spec.P is not None and not (spec.P > 1):
        raise ValidationError(f"nominal-power: P must exceed 1, got {spec.P}")


def reciprocal(spec: ChannelSpec) -> ChannelSpec:
    """The network with transmitter and receiver roles swapped (transposed strengths)."""
    validate(spec)
    theta = None if spec.theta is None else spec.theta.T
    return ChannelSpec(K=spec.K, alpha=spec.alpha.T, theta=theta, P=spec.P)


@dataclass(frozen=True)
class QuantizationScheme:
    """Ascending cross-link quantization thresholds t_1 < ... < t_l, t_1 >= 0."""

    thresholds: tuple[float, ...]

    def __post_init__(self):
        ts = tuple(float(t) for t in np.atleast_1d(np.asarray(self.thresholds, dtype=float)))
        object.__setattr__(self, "thresholds", ts)
        if len(ts) == 0:
            raise ValidationError("quantization: at least one threshold required")
        if not all(math.isfinite(t) for t in ts):
            raise ValidationError("quantization: thresholds must be finite")
        if ts[0] < 0:
            raise ValidationError(f"quantization: t_1 must be >= 0, got {ts[0]}")
        if any(a >= b for a, b in zip(ts, ts[1:])):
            raise ValidationError(f"quantization: thresholds must be strictly ascending, got {ts}")

    @property
    def levels(self) -> int:
        return len(self.thresholds)


def classify_links(spec: ChannelSpec, q: QuantizationScheme) -> np.ndarray:
    """Classify every link of the network against the quantization thresholds.

    Returns an integer matrix: DIRECT (-1) on the diagonal, WEAK (0) for
    cross links with alpha <= t_1, bin j for t_j < alpha < t_{j+1}, and the
    top bin l for alpha >= t_l.  The top-bin boundary is inclusive, so a link
    exactly at the last threshold counts as top-bin.
    """
    validate(spec)
    ts = np.asarray(q.thresholds)
    codes = np.searchsorted(ts, spec.alpha, side="left")  # number of thresholds < alpha
    codes = np.where(spec.alpha >= ts[-1], len(ts), codes)
    codes = np.where(spec.alpha <= ts[0], WEAK, codes)
    codes = codes.astype(int)
    np.fill_diagonal(codes, DIRECT)
    return codes


def link_class_name(code: int, q: QuantizationScheme) -> str:
    """Human-readable name for a classification code under the given thresholds."""
    if code == DIRECT:
        return "direct"
    if code == WEAK:
        return "weak"
    if not 1 <= code <= q.levels:
        raise ValidationError(f"link-class: code {code} out of range for {q.levels} thresholds")
    if q.levels == 2:
        return {1: "medium", 2: "strong"}[code]
    return f"bin{code}"


def gen_cyclic_random(K: int, x: float, seed: int) -> ChannelSpec:
    """Random network with strong cyclic-neighbor interference.

    Direct links have exponent 1; links from transmitters i-1 and i+1
    (cyclic) are drawn uniformly from [x, 1]; every other cross link is
    drawn uniformly from [0, 1-x].  Phases are uniform on [0, 2*pi).
    Deterministic for a given seed.
    """
    if K < 3:
        raise ValidationError(f"too-few-users: cyclic model needs K >= 3, got {K}")
    if not 0.5 <= x <= 1.0:
        raise ValidationError(f"invalid-range: x must lie in [0.5, 1], got {x}")
    rng = np.random.default_rng(seed)
    raw = rng.uniform(size=(K, K))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=(K, K))
    idx = np.arange(K)
    neighbor = np.zeros((K, K), dtype=bool)
    neighbor[idx, (idx - 1) % K] = True
    neighbor[idx, (idx + 1) % K] = True
    alpha = np.where(neighbor, x + (1.0 - x) * raw, (1.0 - x) * raw)
    np.fill_diagonal(alpha, 1.0)
    spec = ChannelSpec(K=K, alpha=alpha, theta=theta)
    validate(spec)
    return spec


def gen_neighboring(
    K: int,
    S: int,
    M: int,
    variant: str = "ring",
    strong_value: float = 1.0,
    medium_value: float = 0.5,
) -> ChannelSpec:
    """Symmetric network where each user interferes with its nearest neighbors.

    Offsets 1..S on both sides carry strong-class exponents and offsets
    S+1..S+M medium-class exponents; all other cross links are absent.  The
    ring variant wraps indices and requires K >= 2(S+M)+2 so that no user's
    neighborhoods collide around the ring; the line variant truncates at the
    edges.
    """
    if S < 0 or M < 0:
        raise ValidationError(f"invalid-range: S and M must be >= 0, got S={S}, M={M}")
    if variant not in ("ring", "line"):
        raise ValidationError(f"invalid-variant: expected 'ring' or 'line', got {variant!r}")
    width = S + M
    if variant == "ring" and K < 2 * width + 2:
        raise ValidationError(
            f"too-few-users: ring with S={S}, M={M} needs K >= {2 * width + 2} "
            f"to avoid wrap collision, got K={K}"
        )
    if K < 1:
        raise ValidationError(f"too-few-users: K must be >= 1, got {K}")
    alpha = np.zeros((K, K))
    np.fill_diagonal(alpha, 1.0)
    for k in range(K):
        for off in range(1, width + 1):
            value = strong_value if off <= S else medium_value
            for j in (k - off, k + off):
                if variant == "ring":
                    alpha[k, j % K] = value
                elif 0 <= j < K:
                    alpha[k, j] = value
    spec = ChannelSpec(K=K, alpha=alpha)
    validate(spec)
    return spec


def with_phases(spec: ChannelSpec, seed: int, P: float | None = None) -> ChannelSpec:
    """Copy of the network with i.i.d. uniform [0, 2*pi) phases attached."""
    validate(spec)
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=spec.alpha.shape)
    return ChannelSpec(K=spec.K, alpha=spec.alpha, theta=theta, P=spec.P if P is None else P)


def linear_gain_matrix(spec: ChannelSpec, P: float) -> np.ndarray:
    """Squared link magnitudes at power ``P``; absent cross links (strength
    exponent exactly 0) get gain 0."""
    g = np.power(float(P), spec.alpha)
    absent = (spec.alpha == 0.0) & ~np.eye(spec.K, dtype=bool)
    g[absent] = 0.0
    return g


_CHANNEL_KEYS = {"K", "alpha", "theta", "P"}
_DECOMPOSITION_EXTRA_KEYS = {"tim_links", "tin_links", "tim_n", "tim_vectors"}


def channel_to_dict(spec: ChannelSpec) -> dict:
    doc = {"K": spec.K, "alpha": spec.alpha.tolist()}
    if spec.theta is not None:
        doc["theta"] = spec.theta.tolist()
    if spec.P is not None:
        doc["P"] = spec.P
    return doc


def channel_from_dict(doc: dict) -> ChannelSpec:
    """Build and validate a ChannelSpec from a key/value document.

    Decomposition documents reuse the channel format with added link lists
    and an optional explicit vector assignment; those keys are tolerated and
    ignored here, any other extra key is an error.
    """
    if not isinstance(doc, dict):
        raise ValidationError("channel document must be a key/value mapping")
    unknown = set(doc) - _CHANNEL_KEYS - _DECOMPOSITION_EXTRA_KEYS
    if unknown:
        raise ValidationError(f"unknown key {sorted(unknown)[0]!r} in channel document")
    for key in ("K", "alpha"):
        if key not in doc:
            raise ValidationError(f"channel document missing required key {key!r}")
    try:
        spec = ChannelSpec(
            K=doc["K"],
            alpha=doc["alpha"],
            theta=doc.get("theta"),
            P=doc.get("P"),
        )
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"malformed channel document: {exc}") from exc
    validate(spec)
    return spec


def load_channel(path: str) -> ChannelSpec:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as exc:
        raise ValidationError(f"cannot read channel file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"parse-error in {path}: {exc}") from exc
    return channel_from_dict(doc)


def save_channel(spec: ChannelSpec, path: str) -> None:
    validate(spec)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(channel_to_dict(spec), f, indent=2)
        f.write("\n")
