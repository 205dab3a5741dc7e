"""GDoF and rate evaluation of beamforming/power configurations.

The central primitive is the dominant-exponent sum of a family of received
streams: walk the streams in order of decreasing power exponent and keep each
one whose beamformer has a nonzero residual against the span of the streams
kept so far; the kept exponents add up to the high-SNR slope of the
corresponding log-det.  Everything else here is structured around that scan:
configuration GDoF as a difference of two scans, zero-forcing receiver
synthesis with successive cancellation, per-stream GDoF accounting, and the
exact finite-SNR rate formula the scans approximate.

Conventions used throughout:

* streams are ordered user-major (all of user 0's streams, then user 1's,
  ...); ties in power exponent are broken by that build order;
* streams whose received exponent is negative sit below the noise floor and
  are dropped from every scan;
* ``n`` is the number of channel uses, so all per-stream values are divided
  by ``n``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .channel import ChannelSpec, linear_gain_matrix, validate as validate_channel
from .errors import ValidationError

__all__ = [
    "TxConfig",
    "RxConfig",
    "ExponentSet",
    "tx_config",
    "validate_tx",
    "lex_orders",
    "reverse_lex_orders",
    "dominant_exponent_sum",
    "gdof_of_config",
    "zfsc_receivers",
    "stream_gdof",
    "per_user_gdof",
    "finite_snr_rates",
    "gdof_slope",
    "txconfig_to_dict",
    "txconfig_from_dict",
    "load_txconfig",
    "save_txconfig",
]

UNIT_NORM_TOL = 1e-12


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TxConfig:
    """Transmit side of a configuration: beamformers and power exponents.

    ``V[k]`` holds user k's beamformers as unit-norm columns of an
    ``(n, b_k)`` complex matrix; ``r[k]`` the matching power exponents,
    all <= 0 (unit transmit power).
    """

    n: int
    V: tuple[np.ndarray, ...]
    r: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "n", int(self.n))
        V = tuple(_frozen(np.array(v, dtype=complex)) for v in self.V)
        r = tuple(_frozen(np.atleast_1d(np.array(rk, dtype=float))) for rk in self.r)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "r", r)

    @property
    def K(self) -> int:
        return len(self.V)

    @property
    def b(self) -> tuple[int, ...]:
        return tuple(v.shape[1] for v in self.V)


def tx_config(n, V, r) -> TxConfig:
    """Build a TxConfig, accepting per-user vector lists or stacked matrices."""
    cols = []
    for vk in V:
        arr = np.asarray(vk, dtype=complex)
        if arr.ndim == 1:
            arr = arr[:, None]
        elif arr.shape[0] != n and arr.shape[1] == n:
            arr = arr.T
        cols.append(arr)
    tx = TxConfig(n=n, V=tuple(cols), r=tuple(np.atleast_1d(np.asarray(rk, dtype=float)) for rk in r))
    validate_tx(tx)
    return tx


def validate_tx(tx: TxConfig, K: int | None = None) -> None:
    """Raise ValidationError unless every TxConfig invariant holds."""
    if K is not None and tx.K != K:
        raise ValidationError(f"mismatched-dimensions: config has {tx.K} users, channel has {K}")
    if tx.n < 1:
        raise ValidationError(f"channel-uses: n must be >= 1, got {tx.n}")
    if len(tx.r) != tx.K:
        raise ValidationError("mismatched-dimensions: V and r describe different user counts")
    for k, (vk, rk) in enumerate(zip(tx.V, tx.r)):
        if vk.ndim != 2 or vk.shape[0] != tx.n:
            raise ValidationError(
                f"mismatched-dimensions: user {k} beamformers have shape {vk.shape}, "
                f"expected ({tx.n}, b)"
            )
        b_k = vk.shape[1]
        if b_k < 1:
            raise ValidationError(f"invalid-stream-count: user {k} has no streams")
        if b_k > tx.n:
            raise ValidationError(
                f"invalid-stream-count: user {k} has {b_k} streams over {tx.n} channel uses"
            )
        if rk.shape != (b_k,):
            raise ValidationError(
                f"mismatched-dimensions: user {k} has {b_k} streams but {rk.shape} exponents"
            )
        norms = np.linalg.norm(vk, axis=0)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            raise ValidationError(
                f"unit-norm: user {k} beamformer norms {norms} deviate beyond {UNIT_NORM_TOL}"
            )
        if not np.all(np.isfinite(rk)):
            raise ValidationError(f"non-finite-exponent: user {k} power exponents must be finite")
        if np.any(rk > UNIT_NORM_TOL):
            raise ValidationError(
                f"positive-power-exponent: user {k} exponents {rk} violate the unit power constraint"
            )


@dataclass(frozen=True)
class RxConfig:
    """Receive side: per-stream unit-norm vectors plus cancellation order.

    ``U[k][:, l]`` is the receive vector for user k's stream l; ``sc_order[k]``
    is the order in which user k's own streams are decoded and cancelled.
    ``fallback`` lists streams whose receive vector degenerated to the
    transmit beamformer itself (no usable zero-forcing direction).
    """

    U: tuple[np.ndarray, ...]
    sc_order: tuple[tuple[int, ...], ...]
    fallback: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        U = tuple(_frozen(np.array(u, dtype=complex)) for u in self.U)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "sc_order", tuple(tuple(int(i) for i in o) for o in self.sc_order))
        object.__setattr__(self, "fallback", tuple((int(a), int(b)) for a, b in self.fallback))


def validate_rx(rx: RxConfig, tx: TxConfig) -> None:
    if len(rx.U) != tx.K or len(rx.sc_order) != tx.K:
        raise ValidationError("mismatched-dimensions: receive config user count differs from transmit")
    for k, (uk, order) in enumerate(zip(rx.U, rx.sc_order)):
        if uk.shape != tx.V[k].shape:
            raise ValidationError(
                f"mismatched-dimensions: user {k} receive vectors {uk.shape} vs {tx.V[k].shape}"
            )
        if sorted(order) != list(range(tx.b[k])):
            raise ValidationError(f"sc-order: user {k} order {order} is not a permutation")
        norms = np.linalg.norm(uk, axis=0)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValidationError(f"unit-norm: user {k} receive vector norms {norms}")


def lex_orders(b: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(range(bk)) for bk in b)


def reverse_lex_orders(b: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(reversed(range(bk))) for bk in b)


@dataclass(frozen=True)
class ExponentSet:
    """Vectors with their received power exponents, ready for the greedy scan."""

    vectors: np.ndarray
    exponents: np.ndarray

    def __post_init__(self):
        vecs = np.atleast_2d(np.array(self.vectors, dtype=complex))
        exps = np.atleast_1d(np.array(self.exponents, dtype=float))
        if vecs.size == 0:
            vecs = vecs.reshape(0, vecs.shape[-1] if vecs.ndim == 2 else 0)
        if vecs.shape[0] != exps.shape[0]:
            raise ValidationError(
                f"mismatched-dimensions: {vecs.shape[0]} vectors vs {exps.shape[0]} exponents"
            )
        if exps.size and (not np.all(np.isfinite(exps)) or np.any(exps < 0)):
            raise ValidationError("negative-exponent: exponent-set entries must be finite and >= 0")
        object.__setattr__(self, "vectors", _frozen(vecs))
        object.__setattr__(self, "exponents", _frozen(exps))


def _greedy_scan(vectors: np.ndarray, exponents: np.ndarray, n: int, tol: float):
    """Greedy independent-family scan in descending-exponent order.

    Returns (gamma, sum of kept exponents, kept indices in scan order,
    orthonormal basis of the kept span).  Ties in exponent keep the input
    order, which is the user-major build order everywhere in this module.
    """
    order = np.argsort(-exponents, kind="stable")
    basis = np.zeros((n, 0), dtype=complex)
    kept: list[int] = []
    total = 0.0
    for i in order:
        if basis.shape[1] == n:
            break
        v = vectors[i]
        resid = v - basis @ (basis.conj().T @ v)
        resid = resid - basis @ (basis.conj().T @ resid)
        nrm = np.linalg.norm(resid)
        if nrm > tol:
            basis = np.concatenate([basis, (resid / nrm)[:, None]], axis=1)
            kept.append(int(i))
            total += float(exponents[i])
    return len(kept), total, kept, basis


def dominant_exponent_sum(exponent_set: ExponentSet, tol: float = 1e-9):
    """Dominant-exponent sum of a stream family.

    Walks the vectors in descending-exponent order (stable on ties) and keeps
    each one whose residual against the span of previously kept vectors has
    norm above ``tol``.  Returns ``(gamma, total, selected)``: the number of
    kept vectors, the sum of their exponents, and their indices into the
    input in scan order.
    """
    if not tol > 0:
        raise ValidationError(f"tolerance-nonpositive: tol must be > 0, got {tol}")
    vecs = exponent_set.vectors
    exps = exponent_set.exponents
    if exps.size == 0:
        return 0, 0.0, []
    n = vecs.shape[1]
    gamma, total, kept, _ = _greedy_scan(vecs, exps, n, tol)
    return gamma, total, kept


class _StreamTable:
    """Flat user-major view of a configuration's streams."""

    def __init__(self, spec: ChannelSpec, tx: TxConfig):
        owners = []
        sidx = []
        vecs = []
        for k in range(tx.K):
            for l in range(tx.b[k]):
                owners.append(k)
                sidx.append(l)
                vecs.append(tx.V[k][:, l])
        self.owner = np.array(owners, dtype=int)
        self.sidx = np.array(sidx, dtype=int)
        self.vectors = np.array(vecs) if vecs else np.zeros((0, tx.n), dtype=complex)
        self.r = np.concatenate(tx.r) if tx.r else np.zeros(0)
        self.alpha = spec.alpha
        self.B = len(owners)
        offsets = np.cumsum([0] + list(tx.b))
        self._offset = offsets

    def flat_index(self, k: int, l: int) -> int:
        return int(self._offset[k] + l)

    def kappa_at(self, k: int) -> np.ndarray:
        """Received power exponents of every stream at receiver k."""
        return self.r + self.alpha[k, self.owner]


def _check_pair(spec: ChannelSpec, tx: TxConfig) -> None:
    validate_channel(spec)
    validate_tx(tx, K=spec.K)


def gdof_of_config(spec: ChannelSpec, tx: TxConfig, tol: float = 1e-9) -> np.ndarray:
    """Achieved GDoF of each user under optimal receivers.

    For receiver k the desired-plus-interference family and the
    interference-only family are scanned separately; the difference of the
    two dominant-exponent sums, divided by the number of channel uses, is
    user k's GDoF.
    """
    _check_pair(spec, tx)
    table = _StreamTable(spec, tx)
    d = np.zeros(spec.K)
    for k in range(spec.K):
        kappa = table.kappa_at(k)
        audible = kappa >= 0
        _, s_full, _, _ = _greedy_scan(table.vectors[audible], kappa[audible], tx.n, tol)
        noise = audible & (table.owner != k)
        _, s_int, _, _ = _greedy_scan(table.vectors[noise], kappa[noise], tx.n, tol)
        d[k] = (s_full - s_int) / tx.n
    return np.maximum(d, 0.0)


def _completion_vector(basis: np.ndarray, n: int) -> np.ndarray:
    """Deterministic unit vector orthogonal to the span of ``basis`` columns."""
    best = None
    best_norm = -1.0
    for i in range(n):
        e = np.zeros(n, dtype=complex)
        e[i] = 1.0
        resid = e - basis @ (basis.conj().T @ e)
        resid = resid - basis @ (basis.conj().T @ resid)
        nrm = np.linalg.norm(resid)
        if nrm > best_norm + 1e-12:
            best, best_norm = resid, nrm
    return best / best_norm


def _orthonormal(columns: np.ndarray) -> np.ndarray:
    if columns.shape[1] == 0:
        return columns
    q, _ = np.linalg.qr(columns)
    return q[:, : np.linalg.matrix_rank(columns, tol=1e-12)]


def zfsc_receivers(
    spec: ChannelSpec,
    tx: TxConfig,
    sc_order: tuple[tuple[int, ...], ...] | None = None,
    tol: float = 1e-9,
) -> RxConfig:
    """Zero-forcing successive-cancellation receive vectors for a configuration.

    For each stream, in cancellation order: own already-cancelled streams are
    removed, the dominant family of what remains is scanned, and the receive
    vector nulls every other member of that family when the desired
    beamformer belongs to it.  When the desired beamformer is redundant
    (stream GDoF 0) the receive vector is a deterministic direction
    orthogonal to the whole family if a spare dimension exists; otherwise the
    strongest family members are nulled within the n-1 budget and the
    desired beamformer's residual is used, falling back to the beamformer
    itself if even that residual vanishes.
    """
    _check_pair(spec, tx)
    if sc_order is None:
        sc_order = lex_orders(tx.b)
    table = _StreamTable(spec, tx)
    U = []
    fallback: list[tuple[int, int]] = []
    for k in range(spec.K):
        kappa = table.kappa_at(k)
        uk = np.zeros((tx.n, tx.b[k]), dtype=complex)
        cancelled: list[int] = []
        for l in sc_order[k]:
            own_flat = table.flat_index(k, l)
            active = kappa >= 0
            for s in cancelled:
                active[table.flat_index(k, s)] = False
            idx = np.nonzero(active)[0]
            _, _, kept_rel, _ = _greedy_scan(table.vectors[idx], kappa[idx], tx.n, tol)
            kept = [int(idx[j]) for j in kept_rel]
            v = table.vectors[own_flat]
            if own_flat in kept:
                null_cols = table.vectors[[g for g in kept if g != own_flat]].T
                q = _orthonormal(null_cols)
                resid = v - q @ (q.conj().T @ v)
                resid = resid - q @ (q.conj().T @ resid)
                nrm = np.linalg.norm(resid)
                if nrm > UNIT_NORM_TOL:
                    u = resid / nrm
                else:  # defensive: cannot happen for an independent family
                    u = v
                    fallback.append((k, l))
            else:
                q = _orthonormal(table.vectors[kept].T)
                if q.shape[1] < tx.n:
                    u = _completion_vector(q, tx.n)
                else:
                    strongest = kept[: tx.n - 1]
                    q = _orthonormal(table.vectors[strongest].T)
                    resid = v - q @ (q.conj().T @ v)
                    resid = resid - q @ (q.conj().T @ resid)
                    nrm = np.linalg.norm(resid)
                    if nrm > tol:
                        u = resid / nrm
                    else:
                        u = v
                        fallback.append((k, l))
            uk[:, l] = u
            cancelled.append(l)
        U.append(uk)
    return RxConfig(U=tuple(U), sc_order=tuple(tuple(o) for o in sc_order), fallback=tuple(fallback))


def stream_gdof(
    spec: ChannelSpec,
    tx: TxConfig,
    rx: RxConfig,
    indicator_tol: float = 1e-7,
) -> list[np.ndarray]:
    """Per-stream GDoF under fixed receive vectors and cancellation order.

    A stream's value is ``max(0, own exponent - strongest surviving
    interference exponent) / n`` where surviving means: audible (exponent
    >= 0), not an own stream already cancelled, and not orthogonal to the
    stream's receive vector.  Own streams decoded later still count as
    interference.  A stream whose receive vector is orthogonal to its own
    beamformer, or whose received exponent is negative, gets 0.  Values are
    returned indexed by stream, not by decode position.
    """
    _check_pair(spec, tx)
    validate_rx(rx, tx)
    table = _StreamTable(spec, tx)
    out = []
    for k in range(spec.K):
        kappa = table.kappa_at(k)
        values = np.zeros(tx.b[k])
        cancelled: list[int] = []
        for l in rx.sc_order[k]:
            own_flat = table.flat_index(k, l)
            own_kappa = kappa[own_flat]
            u = rx.U[k][:, l]
            if own_kappa >= 0 and abs(np.vdot(u, table.vectors[own_flat])) > indicator_tol:
                active = kappa >= 0
                active[own_flat] = False
                for s in cancelled:
                    active[table.flat_index(k, s)] = False
                gains = np.abs(table.vectors[active] @ u.conj())
                surviving = kappa[active][gains > indicator_tol]
                floor = max(0.0, float(surviving.max()) if surviving.size else 0.0)
                values[l] = max(0.0, own_kappa - floor) / tx.n
            cancelled.append(l)
        out.append(values)
    return out


def per_user_gdof(stream_values: list[np.ndarray]) -> np.ndarray:
    """Sum per-stream GDoF values into a per-user tuple."""
    return np.array([float(np.sum(v)) for v in stream_values])


def finite_snr_rates(spec: ChannelSpec, tx: TxConfig, P: float | None = None) -> np.ndarray:
    """Exact per-user achievable rates (bits per channel use) at power P.

    Builds the received desired and interference-plus-noise covariances from
    the complex effective channels and evaluates the log-det rate; no
    high-SNR approximation is involved.
    """
    _check_pair(spec, tx)
    if spec.theta is None:
        raise ValidationError("missing-phases: finite-SNR rates need theta on the channel")
    if P is None:
        P = spec.P
    if P is None or not P > 1:
        raise ValidationError(f"nominal-power: P must exceed 1, got {P}")
    n = tx.n
    rates = np.zeros(spec.K)
    gains = np.sqrt(linear_gain_matrix(spec, P)) * np.exp(1j * spec.theta)
    # Per-stream transmitted matrices scaled by sqrt of linear power.
    scaled = [tx.V[k] * np.power(P, tx.r[k] / 2.0)[None, :] for k in range(tx.K)]
    for k in range(spec.K):
        q_ni = np.eye(n, dtype=complex)
        for j in range(tx.K):
            if j == k:
                continue
            x = gains[k, j] * scaled[j]
            q_ni = q_ni + x @ x.conj().T
        x = gains[k, k] * scaled[k]
        q_d = x @ x.conj().T
        _, logdet_full = np.linalg.slogdet(q_d + q_ni)
        _, logdet_ni = np.linalg.slogdet(q_ni)
        rates[k] = (logdet_full - logdet_ni) / (n * np.log(2.0))
    return rates


def gdof_slope(spec: ChannelSpec, tx: TxConfig, P_lo: float, P_hi: float) -> np.ndarray:
    """Two-point numeric slope of the rate against log2(P); estimates GDoF."""
    r_lo = finite_snr_rates(spec, tx, P_lo)
    r_hi = finite_snr_rates(spec, tx, P_hi)
    return (r_hi - r_lo) / (np.log2(P_hi) - np.log2(P_lo))


def txconfig_to_dict(tx: TxConfig) -> dict:
    """Serialize a TxConfig; complex entries become [re, im] pairs."""
    return {
        "n": tx.n,
        "b": list(tx.b),
        "r": [rk.tolist() for rk in tx.r],
        "V": [
            [[[float(z.real), float(z.imag)] for z in vk[:, l]] for l in range(vk.shape[1])]
            for vk in tx.V
        ],
    }


def load_txconfig(path) -> TxConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read transmit-config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"transmit-config file {path} is not valid JSON: {exc}") from exc
    return txconfig_from_dict(doc)


def save_txconfig(path, tx: TxConfig) -> None:
    with open(path, "w") as fh:
        json.dump(txconfig_to_dict(tx), fh, indent=2)
        fh.write("\n")


def txconfig_from_dict(doc: dict) -> TxConfig:
    if not isinstance(doc, dict):
        raise ValidationError("transmit-config document must be a key/value mapping")
    unknown = set(doc) - {"n", "b", "r", "V"}
    if unknown:
        raise ValidationError(f"unknown key {sorted(unknown)[0]!r} in transmit-config document")
    for key in ("n", "r", "V"):
        if key not in doc:
            raise ValidationError(f"transmit-config document missing required key {key!r}")
    try:
        V = []
        for vk in doc["V"]:
            streams = [np.array([complex(re, im) for re, im in stream]) for stream in vk]
            V.append(np.column_stack(streams))
        tx = TxConfig(n=doc["n"], V=tuple(V), r=tuple(np.asarray(rk, dtype=float) for rk in doc["r"]))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"malformed transmit-config document: {exc}") from exc
    if "b" in doc and tuple(doc["b"]) != tx.b:
        raise ValidationError(f"mismatched-dimensions: declared b {doc['b']} vs vectors {tx.b}")
    validate_tx(tx)
    return tx
