"""Distributed beamformer/power iteration via forward-reverse switching.

One cycle of the iteration:

1. synthesize zero-forcing successive-cancellation receivers for the
   current forward transmit configuration and record the forward GDoF;
2. form the effective strength matrix seen through those receivers, run the
   reciprocal power update on it, and adopt the receive vectors as reverse
   transmit beamformers;
3. repeat both steps in the reverse direction, producing the next forward
   configuration.

Each of the four evaluations in a cycle (forward, switched-reverse,
reverse, switched-forward) is non-decreasing in sum GDoF, so the trace of
a run is a monotone staircase; the loop stops once the forward sum stops
improving by more than ``tol``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .channel import ChannelSpec, reciprocal, validate as validate_channel
from .errors import ValidationError
from .gdof import (
    RxConfig,
    TxConfig,
    _StreamTable,
    finite_snr_rates,
    gdof_of_config,
    lex_orders,
    per_user_gdof,
    reverse_lex_orders,
    stream_gdof,
    validate_tx,
    zfsc_receivers,
)

__all__ = [
    "EffectiveStrengthMatrix",
    "effective_strengths",
    "dual_power_update",
    "flatten_r",
    "split_r",
    "ZestTraceRow",
    "ZestResult",
    "zest_init",
    "run_zest",
    "multi_init_best",
    "select_best",
    "write_trace_csv",
]

INDICATOR_TOL = 1e-7


@dataclass(frozen=True)
class EffectiveStrengthMatrix:
    """Stream-to-stream interference strengths after receive filtering.

    ``G[i, j]`` is the channel strength exponent from the transmitter of
    stream j into the receiver of stream i, zeroed when the receive vector
    of i is orthogonal to the beamformer of j or when j is an own stream
    already cancelled before i is decoded.  Indices are user-major over
    streams; ``owner[i]`` gives the owning user.
    """

    G: np.ndarray
    owner: np.ndarray
    b: tuple[int, ...]

    def __post_init__(self):
        G = np.array(self.G, dtype=float)
        owner = np.array(self.owner, dtype=int)
        G.setflags(write=False)
        owner.setflags(write=False)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "owner", owner)
        object.__setattr__(self, "b", tuple(int(x) for x in self.b))


def effective_strengths(
    spec: ChannelSpec,
    tx: TxConfig,
    rx: RxConfig,
    indicator_tol: float = INDICATOR_TOL,
) -> EffectiveStrengthMatrix:
    """Effective strength matrix of a configuration through its receivers."""
    table = _StreamTable(spec, tx)
    B = table.B
    u_flat = np.array(
        [rx.U[k][:, l] for k, l in zip(table.owner, table.sidx)]
    ) if B else np.zeros((0, tx.n), dtype=complex)
    gains = np.abs(u_flat.conj() @ table.vectors.T)  # (rx stream i, tx stream j)
    G = np.where(gains > indicator_tol, table.alpha[np.ix_(table.owner, table.owner)], 0.0)
    for k in range(tx.K):
        order = rx.sc_order[k]
        for q in range(len(order)):
            for p in range(q):
                G[table.flat_index(k, order[q]), table.flat_index(k, order[p])] = 0.0
    return EffectiveStrengthMatrix(G=G, owner=table.owner, b=tx.b)


def flatten_r(tx: TxConfig) -> np.ndarray:
    return np.concatenate(tx.r)


def split_r(r_flat: np.ndarray, b: tuple[int, ...]) -> tuple[np.ndarray, ...]:
    offsets = np.cumsum([0] + list(b))
    return tuple(np.asarray(r_flat[offsets[k] : offsets[k + 1]], dtype=float) for k in range(len(b)))


def dual_power_update(esm: EffectiveStrengthMatrix, r_flat: np.ndarray) -> np.ndarray:
    """Reciprocal-direction power exponents from a forward strength matrix.

    Stream i's reverse exponent is minus the surviving interference floor at
    its forward receiver: ``-max(0, max_{j != i} G[i, j] + r[j])``.
    """
    G = esm.G
    B = G.shape[0]
    r_flat = np.asarray(r_flat, dtype=float)
    if r_flat.shape != (B,):
        raise ValidationError(
            f"mismatched-dimensions: {r_flat.shape} exponents for {B}-stream strength matrix"
        )
    A = G + r_flat[None, :]
    np.fill_diagonal(A, -np.inf)
    floors = A.max(axis=1) if B else np.zeros(0)
    return -np.maximum(0.0, floors)


@dataclass(frozen=True)
class ZestTraceRow:
    """The four per-user GDoF tuples evaluated inside one cycle and their sums.

    ``d`` is the forward tuple; the switch tuples are the ones measured right
    after a direction reversal, before the receivers are re-optimized.
    """

    iter: int
    sum_fwd: float
    sum_switch_rev: float
    sum_rev: float
    sum_switch_fwd: float
    d: tuple[float, ...]
    d_switch_rev: tuple[float, ...] = ()
    d_rev: tuple[float, ...] = ()
    d_switch_fwd: tuple[float, ...] = ()


@dataclass(frozen=True)
class ZestResult:
    converged: bool
    iterations: int
    d: np.ndarray
    sum_gdof: float
    tx: TxConfig
    rx: RxConfig
    rows: tuple[ZestTraceRow, ...]
    seed: int | None = None
    configs: tuple[TxConfig, ...] | None = None

    def __post_init__(self):
        d = np.array(self.d, dtype=float)
        d.setflags(write=False)
        object.__setattr__(self, "d", d)


def zest_init(spec: ChannelSpec, n: int, b, seed: int | None = 0) -> TxConfig:
    """Random starting configuration: beamformers uniform on the complex
    unit sphere, power exponents uniform in [-1, 0]."""
    validate_channel(spec)
    if isinstance(b, int):
        b = (b,) * spec.K
    b = tuple(int(x) for x in b)
    if len(b) != spec.K:
        raise ValidationError(f"mismatched-dimensions: {len(b)} stream counts for {spec.K} users")
    rng = np.random.default_rng(seed)
    V = []
    for bk in b:
        m = rng.standard_normal((n, bk)) + 1j * rng.standard_normal((n, bk))
        V.append(m / np.linalg.norm(m, axis=0, keepdims=True))
    tx = TxConfig(n=n, V=tuple(V), r=tuple(rng.uniform(-1.0, 0.0, bk) for bk in b))
    validate_tx(tx, K=spec.K)
    return tx


def _cycle(spec: ChannelSpec, recip: ChannelSpec, tx_fwd: TxConfig, m: int):
    """Run one full forward/reverse cycle from ``tx_fwd``.

    Returns the trace row, the forward receivers, and the next forward
    transmit configuration.
    """
    b = tx_fwd.b
    lex = lex_orders(b)
    rev = reverse_lex_orders(b)

    rx_fwd = zfsc_receivers(spec, tx_fwd, lex)
    d_fwd = gdof_of_config(spec, tx_fwd)

    g_fwd = effective_strengths(spec, tx_fwd, rx_fwd)
    r_rev = dual_power_update(g_fwd, flatten_r(tx_fwd))
    tx_rev = TxConfig(n=tx_fwd.n, V=rx_fwd.U, r=split_r(r_rev, b))
    d_sw_rev = per_user_gdof(
        stream_gdof(recip, tx_rev, RxConfig(U=tx_fwd.V, sc_order=rev))
    )

    rx_rev = zfsc_receivers(recip, tx_rev, lex)
    d_rev = gdof_of_config(recip, tx_rev)

    g_rev = effective_strengths(recip, tx_rev, rx_rev)
    r_fwd = dual_power_update(g_rev, r_rev)
    tx_next = TxConfig(n=tx_fwd.n, V=rx_rev.U, r=split_r(r_fwd, b))
    d_sw_fwd = per_user_gdof(
        stream_gdof(spec, tx_next, RxConfig(U=tx_rev.V, sc_order=rev))
    )

    row = ZestTraceRow(
        iter=m,
        sum_fwd=float(d_fwd.sum()),
        sum_switch_rev=float(d_sw_rev.sum()),
        sum_rev=float(d_rev.sum()),
        sum_switch_fwd=float(d_sw_fwd.sum()),
        d=tuple(float(x) for x in d_fwd),
        d_switch_rev=tuple(float(x) for x in d_sw_rev),
        d_rev=tuple(float(x) for x in d_rev),
        d_switch_fwd=tuple(float(x) for x in d_sw_fwd),
    )
    return row, rx_fwd, tx_next


def run_zest(
    spec: ChannelSpec,
    n: int = 2,
    b=1,
    seed: int | None = 0,
    max_iter: int = 100,
    tol: float = 1e-6,
    init_tx: TxConfig | None = None,
    keep_configs: bool = False,
) -> ZestResult:
    """Iterate forward/reverse cycles until the forward sum GDoF settles.

    Stops after the first cycle whose forward sum improves on the previous
    cycle's by less than ``tol`` (checked from the second cycle on), or
    after ``max_iter`` cycles.  The reported configuration and GDoF are the
    ones evaluated in the final cycle.  With ``keep_configs`` the transmit
    configuration evaluated at each cycle is retained.
    """
    validate_channel(spec)
    if max_iter < 1:
        raise ValidationError(f"max-iterations: need >= 1, got {max_iter}")
    if not tol > 0:
        raise ValidationError(f"tolerance-nonpositive: tol must be > 0, got {tol}")
    if init_tx is not None:
        validate_tx(init_tx, K=spec.K)
        tx = init_tx
    else:
        tx = zest_init(spec, n, b, seed)
    recip = reciprocal(spec)
    rows: list[ZestTraceRow] = []
    configs: list[TxConfig] = []
    converged = False
    rx_last = None
    tx_last = tx
    for m in range(1, max_iter + 1):
        row, rx_fwd, tx_next = _cycle(spec, recip, tx, m)
        rows.append(row)
        if keep_configs:
            configs.append(tx)
        rx_last, tx_last = rx_fwd, tx
        if m >= 2 and row.sum_fwd - rows[-2].sum_fwd < tol:
            converged = True
            break
        tx = tx_next
    d = np.array(rows[-1].d)
    return ZestResult(
        converged=converged,
        iterations=len(rows),
        d=d,
        sum_gdof=float(d.sum()),
        tx=tx_last,
        rx=rx_last,
        rows=tuple(rows),
        seed=seed if init_tx is None else None,
        configs=tuple(configs) if keep_configs else None,
    )


def multi_init_best(
    spec: ChannelSpec,
    n: int,
    b,
    seeds,
    max_iter: int = 100,
    tol: float = 1e-6,
    P: float | None = None,
) -> tuple[ZestResult, list[ZestResult]]:
    """Run the iteration from several random starts and keep the best.

    Candidates are ranked by sum GDoF; ties within 1e-9 are broken by the
    exact sum rate at ``P`` when the channel carries phases and a power is
    available, otherwise the earlier seed wins.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValidationError("empty-seed-list: at least one starting seed is required")
    results = [run_zest(spec, n=n, b=b, seed=s, max_iter=max_iter, tol=tol) for s in seeds]
    return select_best(spec, results, P), results


def select_best(spec: ChannelSpec, results, P: float | None = None) -> ZestResult:
    """Pick the best of several runs: larger sum GDoF wins, ties within 1e-9
    go to the larger exact sum rate when that is computable, earlier run
    otherwise."""
    results = list(results)
    if not results:
        raise ValidationError("empty-seed-list: at least one run is required")
    use_rates = spec.theta is not None and (P is not None or spec.P is not None)

    def sum_rate(res: ZestResult) -> float:
        return float(finite_snr_rates(spec, res.tx, P).sum())

    best = results[0]
    best_rate = None
    for cand in results[1:]:
        if cand.sum_gdof > best.sum_gdof + 1e-9:
            best, best_rate = cand, None
        elif use_rates and abs(cand.sum_gdof - best.sum_gdof) <= 1e-9:
            if best_rate is None:
                best_rate = sum_rate(best)
            cand_rate = sum_rate(cand)
            if cand_rate > best_rate:
                best, best_rate = cand, cand_rate
    return best


def write_trace_csv(path, rows, K: int) -> None:
    """Write trace rows as CSV with one line per cycle."""
    header = ["iter", "sum_fwd", "sum_switch_rev", "sum_rev", "sum_switch_fwd"]
    header += [f"d_{k}" for k in range(1, K + 1)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            vals = [row.sum_fwd, row.sum_switch_rev, row.sum_rev, row.sum_switch_fwd, *row.d]
            w.writerow([row.iter] + [f"{v:.10g}" for v in vals])
