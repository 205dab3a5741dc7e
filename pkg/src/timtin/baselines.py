"""Finite-SNR comparison algorithms.

Five references to compare the distributed vector/power iteration against:
orthogonal time sharing, naive full-power transmission, per-stream
SINR-maximizing filters with reciprocity, successive-approximation power
control on the sum-log-SINR objective, and iterated GDoF-based power
control.  All rate numbers come from the same exact log-det formula used
everywhere else in the package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSpec, linear_gain_matrix, validate as validate_channel
from .errors import ValidationError
from .gdof import TxConfig, finite_snr_rates, validate_tx

__all__ = [
    "BaselineResult",
    "IgpcResult",
    "tdma_rates",
    "full_power_rates",
    "max_sinr",
    "sapc",
    "igpc",
]


@dataclass(frozen=True)
class BaselineResult:
    """Outcome of one baseline run at a fixed transmit power."""

    algorithm: str
    rates: np.ndarray
    sum_rate: float
    iterations: int
    converged: bool
    trace: tuple[float, ...] = ()
    tx: TxConfig | None = None
    powers: np.ndarray | None = None

    def __post_init__(self):
        rates = np.array(self.rates, dtype=float)
        rates.setflags(write=False)
        object.__setattr__(self, "rates", rates)
        if self.powers is not None:
            p = np.array(self.powers, dtype=float)
            p.setflags(write=False)
            object.__setattr__(self, "powers", p)


def _resolve_power(spec: ChannelSpec, P: float | None) -> float:
    if P is None:
        P = spec.P
    if P is None or not np.isfinite(P) or not P > 1:
        raise ValidationError(f"nominal-power: P must exceed 1, got {P}")
    return float(P)


def tdma_rates(spec: ChannelSpec, P: float | None = None) -> BaselineResult:
    """Equal time sharing: each user gets a 1/K slice of its single-user rate.

    Phase-free: only the direct-link strengths enter.
    """
    validate_channel(spec)
    P = _resolve_power(spec, P)
    rates = np.log2(1.0 + P ** np.diag(spec.alpha)) / spec.K
    return BaselineResult(
        algorithm="tdma",
        rates=rates,
        sum_rate=float(rates.sum()),
        iterations=1,
        converged=True,
        trace=(float(rates.sum()),),
    )


def _scalar_full_power_tx(K: int) -> TxConfig:
    return TxConfig(
        n=1,
        V=tuple(np.ones((1, 1), dtype=complex) for _ in range(K)),
        r=tuple(np.zeros(1) for _ in range(K)),
    )


def full_power_rates(spec: ChannelSpec, P: float | None = None) -> BaselineResult:
    """Everyone transmits at full power over one channel use; interference
    is treated as noise."""
    validate_channel(spec)
    P = _resolve_power(spec, P)
    tx = _scalar_full_power_tx(spec.K)
    rates = finite_snr_rates(spec, tx, P)
    return BaselineResult(
        algorithm="full_power",
        rates=rates,
        sum_rate=float(rates.sum()),
        iterations=1,
        converged=True,
        trace=(float(rates.sum()),),
        tx=tx,
    )


def _equal_split_exponents(b: tuple[int, ...], P: float) -> tuple[np.ndarray, ...]:
    """Power exponents putting 1/b_k linear power on each of user k's streams."""
    return tuple(np.full(bk, -np.log(bk) / np.log(P)) for bk in b)


def _sinr_filters(gains: np.ndarray, V, powers, n: int):
    """Per-stream interference-plus-noise-whitened matched filters.

    ``gains[k, j]`` is the complex scalar channel from transmitter j to
    receiver k; ``powers[k][l]`` is stream (k, l)'s linear transmit power.
    The filter for a stream inverts the covariance of everything else
    received and matches the desired effective channel, then is normalized.
    """
    K = gains.shape[0]
    U = []
    for k in range(K):
        cov_all = np.eye(n, dtype=complex)
        for j in range(K):
            x = gains[k, j] * V[j] * np.sqrt(powers[j])[None, :]
            cov_all = cov_all + x @ x.conj().T
        uk = np.empty_like(V[k])
        for l in range(V[k].shape[1]):
            x = gains[k, k] * V[k][:, l] * np.sqrt(powers[k][l])
            cov = cov_all - np.outer(x, x.conj())
            w = np.linalg.solve(cov, x)
            uk[:, l] = w / np.linalg.norm(w)
        U.append(uk)
    return U


def max_sinr(
    spec: ChannelSpec,
    n: int = 2,
    b=1,
    P: float | None = None,
    seed: int | None = 0,
    max_iter: int = 500,
    tol: float = 1e-6,
    init_tx: TxConfig | None = None,
) -> BaselineResult:
    """Alternating per-stream SINR-maximizing filters with reciprocity.

    Each iteration whitens the interference-plus-noise covariance at every
    receiver, matches the desired stream, then repeats the same update in
    the reciprocal direction to produce the next transmit beamformers.
    Streams split their user's unit power equally.  Stops when the sum rate
    changes by less than ``tol``; convergence is not guaranteed.
    """
    validate_channel(spec)
    if spec.theta is None:
        raise ValidationError("missing-phases: this baseline needs theta on the channel")
    P = _resolve_power(spec, P)
    if init_tx is not None:
        validate_tx(init_tx, K=spec.K)
        if init_tx.n != n:
            raise ValidationError(
                f"mismatched-dimensions: initial configuration uses n={init_tx.n}, requested {n}"
            )
        V = [np.array(v) for v in init_tx.V]
    else:
        if isinstance(b, int):
            b = (b,) * spec.K
        b = tuple(int(x) for x in b)
        rng = np.random.default_rng(seed)
        V = []
        for bk in b:
            m = rng.standard_normal((n, bk)) + 1j * rng.standard_normal((n, bk))
            V.append(m / np.linalg.norm(m, axis=0, keepdims=True))
    b = tuple(v.shape[1] for v in V)
    gains_fwd = np.sqrt(linear_gain_matrix(spec, P)) * np.exp(1j * spec.theta)
    gains_rev = gains_fwd.T
    powers = [np.full(bk, 1.0 / bk) for bk in b]
    r_exp = _equal_split_exponents(b, P)

    def rates_of(Vcur):
        tx = TxConfig(n=n, V=tuple(Vcur), r=r_exp)
        return finite_snr_rates(spec, tx, P), tx

    trace = []
    rates, tx = rates_of(V)
    trace.append(float(rates.sum()))
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        U = _sinr_filters(gains_fwd, V, powers, n)
        V = _sinr_filters(gains_rev, U, powers, n)
        rates, tx = rates_of(V)
        trace.append(float(rates.sum()))
        if abs(trace[-1] - trace[-2]) < tol:
            converged = True
            break
    return BaselineResult(
        algorithm="max_sinr",
        rates=rates,
        sum_rate=float(rates.sum()),
        iterations=it,
        converged=converged,
        trace=tuple(trace),
        tx=tx,
    )


def sapc(
    spec: ChannelSpec,
    P: float | None = None,
    max_iter: int = 500,
    tol: float = 1e-6,
    init_powers=None,
) -> BaselineResult:
    """Successive approximation of the sum-log-SINR objective by scalar
    power control, starting from maximal power.

    Each round freezes the interference-plus-noise terms at the current
    operating point and solves the stationarity condition of
    ``sum_k log SINR_k`` in closed form (``p_k = 1 / sum_{i!=k} g_ik/I_i``),
    capping powers at 1.  Phases never enter: only squared link magnitudes
    matter.
    """
    validate_channel(spec)
    P = _resolve_power(spec, P)
    g = linear_gain_matrix(spec, P)
    K = spec.K
    if init_powers is None:
        p = np.ones(K)
    else:
        p = np.array(init_powers, dtype=float)
        if p.shape != (K,):
            raise ValidationError(f"mismatched-dimensions: {p.shape} powers for {K} users")
        if np.any(p <= 0) or np.any(p > 1):
            raise ValidationError("power-range: initial powers must lie in (0, 1]")

    def sinr(p):
        interference = (g * p[None, :]).sum(axis=1) - np.diag(g) * p
        return np.diag(g) * p / (1.0 + interference)

    def sum_rate(p):
        return float(np.log2(1.0 + sinr(p)).sum())

    trace = [sum_rate(p)]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        interference = 1.0 + (g * p[None, :]).sum(axis=1) - np.diag(g) * p
        # taxes[k] = sum over other receivers j of g_jk / I_j
        taxes = (1.0 / interference) @ g - (1.0 / interference) * np.diag(g)
        with np.errstate(divide="ignore"):
            p_new = np.where(taxes > 0, np.minimum(1.0, 1.0 / np.where(taxes > 0, taxes, 1.0)), 1.0)
        p_new = np.maximum(p_new, 1e-300)
        p = p_new
        trace.append(sum_rate(p))
        if abs(trace[-1] - trace[-2]) < tol:
            converged = True
            break
    rates = np.log2(1.0 + sinr(p))
    return BaselineResult(
        algorithm="sapc",
        rates=rates,
        sum_rate=float(rates.sum()),
        iterations=it,
        converged=converged,
        trace=tuple(trace),
        powers=p,
    )


@dataclass(frozen=True)
class IgpcResult:
    """Final exponents and GDoF of iterated power control, with the full
    per-half-iteration GDoF trace.  Unpacks as ``(powers, gdof)``."""

    r: np.ndarray
    d: np.ndarray
    trace: tuple[tuple[float, ...], ...]
    iterations: int
    converged: bool

    def __post_init__(self):
        for name in ("r", "d"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __iter__(self):
        yield self.r
        yield self.d


def _tin_gdof(alpha: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Per-user GDoF of scalar power exponents with interference as noise."""
    K = alpha.shape[0]
    recv = alpha + r[None, :]
    np.fill_diagonal(recv, -np.inf)
    floors = np.maximum(0.0, recv.max(axis=1)) if K > 1 else np.zeros(K)
    return np.maximum(0.0, np.diag(alpha) + r - floors)


def igpc(spec: ChannelSpec, max_iter: int = 100, tol: float = 1e-6) -> IgpcResult:
    """Iterated GDoF-based power control, alternating directions.

    Forward exponents induce reverse exponents (each stream transmits just
    below the interference floor it measured while receiving), and vice
    versa.  Every half-iteration's GDoF tuple componentwise dominates the
    previous one; the loop stops when the forward sum GDoF stops improving
    by ``tol``.
    """
    validate_channel(spec)
    if max_iter < 1:
        raise ValidationError(f"max-iterations: need >= 1, got {max_iter}")
    a_fwd = spec.alpha
    a_rev = spec.alpha.T
    r = np.zeros(spec.K)
    d = _tin_gdof(a_fwd, r)
    trace = [tuple(float(x) for x in d)]
    converged = False
    it = 0
    last_fwd_sum = float(d.sum())
    for it in range(1, max_iter + 1):
        # reverse half-iteration
        recv = a_fwd + r[None, :]
        np.fill_diagonal(recv, -np.inf)
        r_rev = -np.maximum(0.0, recv.max(axis=1)) if spec.K > 1 else np.zeros(spec.K)
        trace.append(tuple(float(x) for x in _tin_gdof(a_rev, r_rev)))
        # forward half-iteration
        recv = a_rev + r_rev[None, :]
        np.fill_diagonal(recv, -np.inf)
        r = -np.maximum(0.0, recv.max(axis=1)) if spec.K > 1 else np.zeros(spec.K)
        d = _tin_gdof(a_fwd, r)
        trace.append(tuple(float(x) for x in d))
        if float(d.sum()) - last_fwd_sum < tol:
            converged = True
            last_fwd_sum = float(d.sum())
            break
        last_fwd_sum = float(d.sum())
    return IgpcResult(r=r, d=d, trace=tuple(trace), iterations=it, converged=converged)
