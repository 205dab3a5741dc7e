"""Split-processing machinery: power-control feasibility, vector-assignment
solutions for supported topologies, and their product composition.

A decomposition partitions the nonzero cross links of a network into a
vector-processed part (interference resolved by beamformer alignment over a
few channel uses) and a power-controlled part (interference pushed under the
effective noise floor by transmit power exponents).  The two parts are
solved independently — the power part by difference-constraint feasibility,
the vector part from a registry of recognized topologies — and composed into
a single transmit configuration whose GDoF is the product of the two
symmetric values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import NegativeCycleError, bellman_ford

from .channel import ChannelSpec, channel_from_dict, channel_to_dict, gen_neighboring, validate as validate_channel
from .errors import UnsupportedTopologyError, ValidationError, VerificationError
from .gdof import TxConfig, gdof_of_config, validate_tx

__all__ = [
    "Decomposition",
    "decomposition_by_threshold",
    "tin_subnetwork",
    "tin_feasible",
    "tin_symmetric_gdof",
    "tin_optimal",
    "TinSolution",
    "TimSolution",
    "ComposedScheme",
    "tim_solution_for",
    "compose",
    "verify_scheme",
    "factor_bound",
    "neighboring_sym_gdof",
    "smallest_feasible_ring",
    "neighboring_achievability",
    "decomposition_from_dict",
    "decomposition_to_dict",
    "load_decomposition",
    "save_decomposition",
]


def _cross_pairs(spec: ChannelSpec):
    return {
        (k, j)
        for k in range(spec.K)
        for j in range(spec.K)
        if j != k and spec.alpha[k, j] > 0.0
    }


@dataclass(frozen=True)
class Decomposition:
    """Partition of a network's nonzero cross links into vector-processed
    (``tim_links``) and power-controlled (``tin_links``) sets.

    Pairs are (receiver, transmitter), zero-based.  An optional explicit
    vector assignment (``tim_n`` channel uses, one unit vector per user)
    overrides the topology registry when composing.
    """

    tim_links: frozenset
    tin_links: frozenset
    tim_n: int | None = None
    tim_vectors: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "tim_links", frozenset((int(a), int(b)) for a, b in self.tim_links))
        object.__setattr__(self, "tin_links", frozenset((int(a), int(b)) for a, b in self.tin_links))
        if self.tim_vectors is not None:
            vecs = tuple(np.array(v, dtype=complex) for v in self.tim_vectors)
            for v in vecs:
                v.setflags(write=False)
            object.__setattr__(self, "tim_vectors", vecs)


def validate_decomposition(spec: ChannelSpec, decomp: Decomposition) -> None:
    """Check the partition invariants of a decomposition against a network."""
    cross = _cross_pairs(spec)
    for name, links in (("tim_links", decomp.tim_links), ("tin_links", decomp.tin_links)):
        for k, j in links:
            if not (0 <= k < spec.K and 0 <= j < spec.K):
                raise ValidationError(f"link-out-of-range: {name} pair ({k}, {j})")
            if k == j:
                raise ValidationError(f"diagonal-link: {name} pair ({k}, {j}) is a direct link")
            if (k, j) not in cross:
                raise ValidationError(
                    f"zero-strength-link: {name} pair ({k}, {j}) has no positive cross strength"
                )
    overlap = decomp.tim_links & decomp.tin_links
    if overlap:
        raise ValidationError(f"overlapping-links: {sorted(overlap)[0]} assigned to both parts")
    missing = cross - decomp.tim_links - decomp.tin_links
    if missing:
        raise ValidationError(
            f"uncovered-links: cross pair {sorted(missing)[0]} assigned to neither part"
        )
    if decomp.tim_vectors is not None:
        if decomp.tim_n is None:
            raise ValidationError("explicit vectors given without their channel-use count")
        if len(decomp.tim_vectors) != spec.K:
            raise ValidationError(
                f"mismatched-dimensions: {len(decomp.tim_vectors)} vectors for {spec.K} users"
            )
        for k, v in enumerate(decomp.tim_vectors):
            if v.shape != (decomp.tim_n,):
                raise ValidationError(
                    f"mismatched-dimensions: user {k} vector has shape {v.shape}, "
                    f"expected ({decomp.tim_n},)"
                )


def decomposition_by_threshold(spec: ChannelSpec, threshold: float) -> Decomposition:
    """Assign cross links at or below ``threshold`` to power control, the
    rest to vector processing."""
    validate_channel(spec)
    if not np.isfinite(threshold) or threshold < 0:
        raise ValidationError(f"threshold: must be finite and >= 0, got {threshold}")
    cross = _cross_pairs(spec)
    tin = frozenset(p for p in cross if spec.alpha[p] <= threshold)
    return Decomposition(tim_links=frozenset(cross - tin), tin_links=tin)


def tin_subnetwork(spec: ChannelSpec, decomp: Decomposition) -> ChannelSpec:
    """Network seen by the power-control stage: vector-processed cross links
    removed, everything else kept."""
    alpha = np.array(spec.alpha)
    for k, j in decomp.tim_links:
        alpha[k, j] = 0.0
    return ChannelSpec(K=spec.K, alpha=alpha, theta=spec.theta, P=spec.P)


def tin_feasible(spec: ChannelSpec, d) -> tuple[bool, np.ndarray | None]:
    """Decide whether power control alone can give each user its target GDoF.

    Feasibility of ``alpha_kk + r_k - max(0, max_j(alpha_kj + r_j)) >= d_k``
    over exponents ``r <= 0`` is a system of difference constraints, solved
    as a shortest-path problem on K+1 nodes: a negative cycle means
    infeasible, otherwise the distances from the reference node are a
    feasible exponent vector.
    """
    validate_channel(spec)
    d = np.atleast_1d(np.asarray(d, dtype=float))
    if d.shape != (spec.K,):
        raise ValidationError(f"mismatched-dimensions: {d.shape} targets for {spec.K} users")
    if not np.all(np.isfinite(d)) or np.any(d < 0):
        raise ValidationError("gdof-target: targets must be finite and >= 0")
    K = spec.K
    # Node 0 is the zero reference; node k+1 carries r_k.  Edge i -> j with
    # weight w encodes x_j - x_i <= w.
    edges: dict[tuple[int, int], float] = {}

    def add(i: int, j: int, w: float) -> None:
        key = (i, j)
        if key not in edges or w < edges[key]:
            edges[key] = w

    for k in range(K):
        add(0, k + 1, 0.0)  # r_k <= 0
        add(k + 1, 0, float(spec.alpha[k, k] - d[k]))  # alpha_kk + r_k >= d_k
        for j in range(K):
            if j != k:  # alpha_kk + r_k - (alpha_kj + r_j) >= d_k
                add(k + 1, j + 1, float(spec.alpha[k, k] - spec.alpha[k, j] - d[k]))
    rows = np.array([i for i, _ in edges], dtype=int)
    cols = np.array([j for _, j in edges], dtype=int)
    data = np.array(list(edges.values()), dtype=float)
    graph = csr_matrix((data, (rows, cols)), shape=(K + 1, K + 1))
    try:
        dist = bellman_ford(graph, directed=True, indices=0)
    except NegativeCycleError:
        return False, None
    r = np.minimum(np.asarray(dist).ravel()[1:], 0.0)
    return True, r


def tin_symmetric_gdof(
    spec: ChannelSpec, tol: float = 1e-8
) -> tuple[float, np.ndarray | None]:
    """Largest symmetric GDoF achievable by power control alone, by bisection.

    Returns the value and a witnessing exponent vector; ``(0.0, None)`` when
    even the zero target fails the per-user condition.
    """
    validate_channel(spec)
    if not tol > 0:
        raise ValidationError(f"tolerance-nonpositive: tol must be > 0, got {tol}")
    ok, r = tin_feasible(spec, np.zeros(spec.K))
    if not ok:
        return 0.0, None
    lo, r_lo = 0.0, r
    hi = float(np.min(np.diag(spec.alpha)))
    ok, r = tin_feasible(spec, np.full(spec.K, hi))
    if ok:
        return hi, r
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        ok, r = tin_feasible(spec, np.full(spec.K, mid))
        if ok:
            lo, r_lo = mid, r
        else:
            hi = mid
    return lo, r_lo


def tin_optimal(spec: ChannelSpec) -> bool:
    """Sufficient condition for power control to achieve the full GDoF
    region: each direct link dominates its strongest incoming plus strongest
    outgoing cross link."""
    validate_channel(spec)
    a = spec.alpha
    off = ~np.eye(spec.K, dtype=bool)
    for k in range(spec.K):
        incoming = a[k, :][off[k]].max() if spec.K > 1 else 0.0
        outgoing = a[:, k][off[:, k]].max() if spec.K > 1 else 0.0
        if a[k, k] < incoming + outgoing:
            return False
    return True


@dataclass(frozen=True)
class TinSolution:
    """Symmetric power-control value with a witnessing exponent vector."""

    d_sym: float
    r: np.ndarray | None

    def __post_init__(self):
        if self.r is not None:
            r = np.array(self.r, dtype=float)
            r.setflags(write=False)
            object.__setattr__(self, "r", r)


@dataclass(frozen=True)
class TimSolution:
    """One unit vector per user over ``n`` channel uses, resolving every
    vector-processed link; the symmetric value is 1/n."""

    n: int
    vectors: tuple[np.ndarray, ...]
    d_sym: float

    def __post_init__(self):
        vecs = tuple(np.array(v, dtype=complex) for v in self.vectors)
        for v in vecs:
            v.setflags(write=False)
        object.__setattr__(self, "vectors", vecs)


@dataclass(frozen=True)
class ComposedScheme:
    """A transmit configuration built from a vector solution and a power
    solution, with the per-user GDoF the product construction promises."""

    tx: TxConfig
    predicted: np.ndarray
    decomposition: Decomposition
    tim: TimSolution
    tin: TinSolution

    def __post_init__(self):
        p = np.array(self.predicted, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "predicted", p)


# --- vector-assignment registry -------------------------------------------

_FIVE_CYCLE_BASE = frozenset(
    [(0, 3), (1, 0), (2, 1), (2, 4), (3, 0), (4, 3)]
)
_FIVE_CYCLE_IMPROVED = frozenset(
    [(0, 3), (1, 0), (1, 2), (2, 1), (2, 4), (3, 0), (4, 3)]
)


def _unit2(deg: float) -> np.ndarray:
    t = np.deg2rad(deg)
    return np.array([np.cos(t), np.sin(t)], dtype=complex)


def _circulant_half_width(spec: ChannelSpec, links: frozenset) -> int | None:
    """Half-width W if the link set is exactly the ring neighborhoods
    {k +/- 1 .. k +/- W mod K} at every receiver, else None."""
    K = spec.K
    by_rx = [set() for _ in range(K)]
    for k, j in links:
        by_rx[k].add((j - k) % K)
    offsets = by_rx[0]
    if any(o != offsets for o in by_rx[1:]):
        return None
    for W in range(1, (K - 1) // 2 + 1):
        expected = {w % K for w in range(1, W + 1)} | {(-w) % K for w in range(1, W + 1)}
        if offsets == expected:
            return W
    return None


def tim_solution_for(spec: ChannelSpec, decomp: Decomposition) -> TimSolution:
    """Vector assignment resolving the vector-processed links, from the
    registry of supported topologies.

    Supported: explicit vectors carried by the decomposition; no links at
    all; the two five-user cycle patterns; symmetric ring neighborhoods of
    half-width W (round-robin basis vectors over W+1 uses, requiring
    (W+1) | K).  Anything else raises UnsupportedTopologyError.
    """
    validate_channel(spec)
    validate_decomposition(spec, decomp)
    links = decomp.tim_links
    if decomp.tim_vectors is not None:
        n = decomp.tim_n
        vecs = []
        for k, v in enumerate(decomp.tim_vectors):
            nrm = np.linalg.norm(v)
            if nrm <= 0:
                raise ValidationError(f"zero-vector: user {k} explicit vector has zero norm")
            vecs.append(v / nrm)
        sol = TimSolution(n=n, vectors=tuple(vecs), d_sym=1.0 / n)
        _check_tim_solution(spec, decomp, sol)
        return sol
    if not links:
        return TimSolution(n=1, vectors=tuple(np.ones(1, dtype=complex) for _ in range(spec.K)), d_sym=1.0)
    if spec.K == 5 and links == _FIVE_CYCLE_BASE:
        angles = (0.0, 30.0, 60.0, 120.0, 30.0)
        sol = TimSolution(n=2, vectors=tuple(_unit2(a) for a in angles), d_sym=0.5)
        _check_tim_solution(spec, decomp, sol)
        return sol
    if spec.K == 5 and links == _FIVE_CYCLE_IMPROVED:
        angles = (0.0, 30.0, 0.0, 120.0, 30.0)
        sol = TimSolution(n=2, vectors=tuple(_unit2(a) for a in angles), d_sym=0.5)
        _check_tim_solution(spec, decomp, sol)
        return sol
    W = _circulant_half_width(spec, links)
    if W is not None:
        n = W + 1
        if spec.K % n != 0:
            raise UnsupportedTopologyError(
                f"ring-divisibility: half-width {W} needs K divisible by {n}, got K={spec.K}"
            )
        basis = np.eye(n, dtype=complex)
        vecs = tuple(basis[:, k % n] for k in range(spec.K))
        sol = TimSolution(n=n, vectors=vecs, d_sym=1.0 / n)
        _check_tim_solution(spec, decomp, sol)
        return sol
    raise UnsupportedTopologyError(
        "no vector assignment known for this link pattern; supply explicit vectors"
    )


def _check_tim_solution(spec: ChannelSpec, decomp: Decomposition, sol: TimSolution) -> None:
    """Every vector-processed interferer must be separable from the desired
    vector at its receiver: the desired vector may not lie in the span the
    interfering vectors leave it, i.e. each pair must be linearly
    independent, and jointly the interferers must not cover the desired
    direction."""
    for k in range(spec.K):
        interferers = sorted({j for (rx, j) in decomp.tim_links if rx == k})
        if not interferers:
            continue
        cols = np.column_stack([sol.vectors[j] for j in interferers])
        q, _ = np.linalg.qr(cols)
        rank = np.linalg.matrix_rank(cols, tol=1e-9)
        q = q[:, :rank]
        v = sol.vectors[k]
        resid = v - q @ (q.conj().T @ v)
        if np.linalg.norm(resid) <= 1e-9:
            raise VerificationError(
                f"vector-collision: user {k}'s vector lies in its interference span"
            )


def compose(
    spec: ChannelSpec,
    decomp: Decomposition,
    tim: TimSolution,
    tin: TinSolution,
) -> ComposedScheme:
    """Combine a vector assignment and a power allocation into one transmit
    configuration; predicted per-user GDoF is the product of the two
    symmetric values."""
    if tin.r is None:
        raise ValidationError("power-control solution carries no exponent witness")
    V = tuple(np.asarray(v, dtype=complex)[:, None] for v in tim.vectors)
    r = tuple(np.array([float(tin.r[k])]) for k in range(spec.K))
    tx = TxConfig(n=tim.n, V=V, r=r)
    validate_tx(tx, K=spec.K)
    predicted = np.full(spec.K, tin.d_sym * tim.d_sym)
    return ComposedScheme(tx=tx, predicted=predicted, decomposition=decomp, tim=tim, tin=tin)


def verify_scheme(spec: ChannelSpec, scheme: ComposedScheme) -> np.ndarray:
    """Recompute the composed configuration's GDoF on the full network and
    check it delivers at least the predicted value per user."""
    achieved = gdof_of_config(spec, scheme.tx)
    short = achieved < scheme.predicted - 1e-9
    if np.any(short):
        k = int(np.nonzero(short)[0][0])
        raise VerificationError(
            f"gdof-shortfall: user {k} achieves {achieved[k]:.12g}, "
            f"predicted {scheme.predicted[k]:.12g}"
        )
    return achieved


def factor_bound(
    spec: ChannelSpec, decomp: Decomposition
) -> tuple[float, float, float]:
    """(achieved symmetric GDoF, outer bound, ratio) for a decomposition.

    Achieved is the product of the two symmetric values; the outer bound is
    the smaller of the two; the ratio outer/achieved is the optimality gap
    factor of the split approach.
    """
    tim = tim_solution_for(spec, decomp)
    d_tin, r = tin_symmetric_gdof(tin_subnetwork(spec, decomp))
    achieved = d_tin * tim.d_sym
    outer = min(tim.d_sym, d_tin)
    if achieved <= 0:
        raise ValidationError("degenerate-decomposition: achieved symmetric GDoF is zero")
    return achieved, outer, outer / achieved


def neighboring_sym_gdof(S: int, M: int) -> float:
    """Closed-form symmetric GDoF of the neighborhood interference model
    with S strong and M medium neighbors per side."""
    S, M = int(S), int(M)
    if S < 0 or M < 0:
        raise ValidationError(f"neighborhood-widths: S, M must be >= 0, got ({S}, {M})")
    if M <= S:
        return 1.0 / (S + M + 1)
    return 1.0 / (2 * (S + 1))


def smallest_feasible_ring(S: int, M: int, K_min: int | None = None) -> int:
    """Smallest ring size at or above ``K_min`` (default 2(S+M)+3) on which
    the closed form is achievable by the round-robin construction.

    The construction colors users round-robin with period S+M+1 (medium
    treated as strong) or S+1 (medium handled by power control), so the
    ring size must be a multiple of that period.
    """
    S, M = int(S), int(M)
    if K_min is None:
        K_min = 2 * (S + M) + 3
    period = (S + M + 1) if M <= S else (S + 1)
    K = max(K_min, 2 * (S + M) + 2)
    while K % period != 0:
        K += 1
    return K


def neighboring_achievability(S: int, M: int, K: int) -> tuple[ChannelSpec, ComposedScheme]:
    """Composed scheme achieving the closed form on a K-user ring.

    For M <= S every cross link goes to vector processing with full power;
    for M > S the strong ring is vector-processed and the medium links are
    pushed to the noise floor with uniform exponent -1/2.  Either way the
    ring size must be a multiple of the vector assignment's period.
    """
    spec = gen_neighboring(K, S, M, variant="ring")
    target = neighboring_sym_gdof(S, M)
    if M <= S:
        decomp = Decomposition(tim_links=frozenset(_cross_pairs(spec)), tin_links=frozenset())
        tin = TinSolution(d_sym=1.0, r=np.zeros(K))
    else:
        strong = {p for p in _cross_pairs(spec) if spec.alpha[p] >= 1.0}
        decomp = Decomposition(
            tim_links=frozenset(strong),
            tin_links=frozenset(_cross_pairs(spec) - strong),
        )
        tin = TinSolution(d_sym=0.5, r=np.full(K, -0.5))
    tim = tim_solution_for(spec, decomp)
    scheme = compose(spec, decomp, tim, tin)
    if abs(float(scheme.predicted[0]) - target) > 1e-12:
        raise VerificationError(
            f"construction-mismatch: predicted {scheme.predicted[0]:.12g} vs closed form {target:.12g}"
        )
    return spec, scheme


# --- document I/O ----------------------------------------------------------


def decomposition_to_dict(spec: ChannelSpec, decomp: Decomposition) -> dict:
    doc = channel_to_dict(spec)
    doc["tim_links"] = [list(p) for p in sorted(decomp.tim_links)]
    doc["tin_links"] = [list(p) for p in sorted(decomp.tin_links)]
    if decomp.tim_vectors is not None:
        doc["tim_n"] = decomp.tim_n
        doc["tim_vectors"] = [
            [[float(z.real), float(z.imag)] for z in v] for v in decomp.tim_vectors
        ]
    return doc


def decomposition_from_dict(doc: dict) -> tuple[ChannelSpec, Decomposition]:
    spec = channel_from_dict(doc)
    for key in ("tim_links", "tin_links"):
        if key not in doc:
            raise ValidationError(f"decomposition document missing required key {key!r}")

    def pairs(key):
        try:
            return frozenset((int(a), int(b)) for a, b in doc[key])
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"malformed {key}: expected [receiver, transmitter] pairs") from exc

    tim_n = doc.get("tim_n")
    tim_vectors = None
    if "tim_vectors" in doc:
        try:
            tim_vectors = tuple(
                np.array([complex(re, im) for re, im in v]) for v in doc["tim_vectors"]
            )
        except (TypeError, ValueError) as exc:
            raise ValidationError("malformed tim_vectors: expected [re, im] entries") from exc
        if tim_n is None:
            raise ValidationError("tim_vectors given without tim_n")
    decomp = Decomposition(
        tim_links=pairs("tim_links"),
        tin_links=pairs("tin_links"),
        tim_n=None if tim_n is None else int(tim_n),
        tim_vectors=tim_vectors,
    )
    validate_decomposition(spec, decomp)
    return spec, decomp


def load_decomposition(path) -> tuple[ChannelSpec, Decomposition]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read decomposition file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"decomposition file {path} is not valid JSON: {exc}") from exc
    return decomposition_from_dict(doc)


def save_decomposition(path, spec: ChannelSpec, decomp: Decomposition) -> None:
    with open(path, "w") as fh:
        json.dump(decomposition_to_dict(spec, decomp), fh, indent=2)
        fh.write("\n")
