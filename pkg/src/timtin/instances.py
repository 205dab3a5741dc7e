"""Small named channel instances and configurations used by tests and docs.

Each builder returns concrete objects with exactly the values analysed by
hand in the test suite; nothing here is randomized.
"""

from __future__ import annotations

import numpy as np

from .channel import ChannelSpec
from .gdof import TxConfig, tx_config

__all__ = [
    "unit2",
    "two_tier_demo",
    "two_tier_links",
    "two_tier_scheme",
    "two_tier_improved_links",
    "alignment_demo",
    "alignment_demo_init",
    "stream_demo",
]


def unit2(deg: float) -> np.ndarray:
    """Real unit vector in the plane at the given angle in degrees."""
    t = np.deg2rad(deg)
    return np.array([np.cos(t), np.sin(t)], dtype=complex)


def two_tier_demo() -> ChannelSpec:
    """Five-user network mixing unit-strength and half-strength cross links.

    Direct links have exponent 1; each receiver sees a handful of strong
    (exponent 1) and mild (exponent 0.5) interferers.  The strong links
    admit an aligned vector solution while the mild ones are best left as
    noise, which makes this the canonical split-processing example.
    """
    alpha = np.array(
        [
            [1.0, 0.5, 0.0, 1.0, 0.0],
            [1.0, 1.0, 0.5, 0.0, 0.5],
            [0.0, 1.0, 1.0, 0.5, 1.0],
            [1.0, 0.0, 0.0, 1.0, 0.5],
            [0.0, 0.0, 0.0, 1.0, 1.0],
        ]
    )
    return ChannelSpec(K=5, alpha=alpha)


def two_tier_links():
    """(strong, mild) cross-link index pairs of :func:`two_tier_demo`.

    Pairs are (receiver, transmitter), zero-based, diagonal excluded.
    """
    alpha = two_tier_demo().alpha
    strong = [(k, j) for k in range(5) for j in range(5) if j != k and alpha[k, j] == 1.0]
    mild = [(k, j) for k in range(5) for j in range(5) if j != k and alpha[k, j] == 0.5]
    return strong, mild


def two_tier_scheme() -> TxConfig:
    """Hand-built configuration achieving GDoF 0.3 per user on the demo.

    Vectors align transmitter 5 with transmitter 2 so their combined
    interference occupies one dimension at receiver 3; the power taper
    keeps every mild interferer exactly at each receiver's noise floor.
    """
    V = [unit2(0.0), unit2(30.0), unit2(60.0), unit2(120.0), unit2(30.0)]
    r = [[0.0], [-0.1], [-0.2], [-0.3], [-0.4]]
    return tx_config(2, V, r)


def two_tier_improved_links():
    """Variant split of the demo links: receiver 2's mild link to
    transmitter 3 handled by vector processing instead of power control."""
    strong, mild = two_tier_links()
    strong = sorted(strong + [(1, 2)])
    mild = [p for p in mild if p != (1, 2)]
    return strong, mild


def alignment_demo() -> ChannelSpec:
    """Five-user network whose cross links are all unit strength.

    Receiver k hears transmitters {3,4}, {3,4}, {1,5}, {1,5}, {2}
    (one-based) besides its own.  With two channel uses, distributed
    vector/power updates on this network climb from a poor start to the
    half-GDoF-per-user point in one full cycle.
    """
    alpha = np.array(
        [
            [1.0, 0.0, 1.0, 1.0, 0.0],
            [0.0, 1.0, 1.0, 1.0, 0.0],
            [1.0, 0.0, 1.0, 0.0, 1.0],
            [1.0, 0.0, 0.0, 1.0, 1.0],
            [0.0, 1.0, 0.0, 0.0, 1.0],
        ]
    )
    return ChannelSpec(K=5, alpha=alpha)


def alignment_demo_init() -> TxConfig:
    """Deliberately misaligned starting point for :func:`alignment_demo`.

    Transmitters 1 and 4 are orthogonal, the rest sit at intermediate
    angles, and the power exponents are staggered so the first forward
    evaluation leaves two users at zero GDoF.
    """
    V = [unit2(0.0), unit2(25.0), unit2(55.0), unit2(90.0), unit2(70.0)]
    r = [[-0.1], [-0.3], [-0.7], [-0.5], [-0.2]]
    return tx_config(2, V, r)


def stream_demo():
    """Three-user channel with a multi-stream configuration for user 1.

    Returns ``(spec, tx)`` where users carry (2, 2, 1) streams over two
    channel uses.  At receiver 1 the five streams have received exponents
    (1.0, 0.9, 0.7, 0.5, 0.4) and the per-stream values under lexicographic
    cancellation are (0.15, 0.25), totalling 0.4.
    """
    alpha = np.array(
        [
            [1.0, 0.6, 0.8],
            [0.5, 1.0, 0.5],
            [0.5, 0.5, 1.0],
        ]
    )
    spec = ChannelSpec(K=3, alpha=alpha)
    V = [
        np.column_stack([unit2(0.0), unit2(40.0)]),
        np.column_stack([unit2(65.0), unit2(110.0)]),
        unit2(65.0)[:, None],
    ]
    r = [[0.0, -0.1], [-0.1, -0.2], [-0.1]]
    return spec, tx_config(2, V, r)
