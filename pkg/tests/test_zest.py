"""Tests for the alternating-direction beamforming/power iteration."""

import csv

import numpy as np
import pytest

from timtin.channel import ChannelSpec, gen_cyclic_random
from timtin.errors import ValidationError
from timtin.gdof import RxConfig, TxConfig, gdof_of_config, lex_orders, tx_config
from timtin.instances import alignment_demo, alignment_demo_init
from timtin.zest import (
    EffectiveStrengthMatrix,
    dual_power_update,
    effective_strengths,
    flatten_r,
    multi_init_best,
    run_zest,
    select_best,
    split_r,
    write_trace_csv,
    zest_init,
)

from conftest import random_spec


CHAIN_SLACK = 1e-9


# ------------------------------------------------------------------- init


def test_init_deterministic_and_in_range():
    spec = gen_cyclic_random(5, 0.5, seed=1)
    a = zest_init(spec, n=2, b=1, seed=9)
    b = zest_init(spec, n=2, b=1, seed=9)
    for k in range(5):
        assert np.array_equal(a.V[k], b.V[k])
        assert np.array_equal(a.r[k], b.r[k])
        assert np.linalg.norm(a.V[k][:, 0]) == pytest.approx(1.0, abs=1e-12)
        assert -1.0 <= a.r[k][0] <= 0.0
    c = zest_init(spec, n=2, b=1, seed=10)
    assert not np.array_equal(a.V[0], c.V[0])


def test_init_full_stream_count_allowed():
    spec = ChannelSpec(K=2, alpha=[[1.0, 0.5], [0.5, 1.0]])
    tx = zest_init(spec, n=3, b=3, seed=0)
    assert tx.b == (3, 3)


def test_init_rejects_wrong_stream_count_list():
    spec = ChannelSpec(K=2, alpha=[[1.0, 0.5], [0.5, 1.0]])
    with pytest.raises(ValidationError, match="mismatched-dimensions"):
        zest_init(spec, n=2, b=[1, 1, 1], seed=0)


def test_flatten_split_round_trip():
    tx = zest_init(ChannelSpec(K=3, alpha=np.eye(3) + 0.1), n=2, b=[1, 2, 1], seed=4)
    flat = flatten_r(tx)
    parts = split_r(flat, tx.b)
    for rk, pk in zip(tx.r, parts):
        assert np.array_equal(rk, pk)


# ------------------------------------------------------- effective strengths


def test_effective_strengths_indicator():
    spec = ChannelSpec(K=2, alpha=[[1.0, 0.7], [0.4, 1.0]])
    tx = tx_config(2, V=[[1.0, 0.0], [0.0, 1.0]], r=[0.0, 0.0])
    # receiver 1 listens along its own beam (deaf to v2), receiver 2 listens
    # along v1 (deaf to its own beam)
    rx = RxConfig(U=(np.array([[1.0], [0.0]]), np.array([[1.0], [0.0]])), sc_order=((0,), (0,)))
    esm = effective_strengths(spec, tx, rx)
    assert esm.G[0, 0] == 1.0
    assert esm.G[0, 1] == 0.0  # u1 orthogonal to v2
    assert esm.G[1, 0] == 0.4
    assert esm.G[1, 1] == 0.0


def test_effective_strengths_entries_are_zero_or_alpha():
    rng = np.random.default_rng(6)
    for _ in range(20):
        K = int(rng.integers(2, 5))
        spec = random_spec(rng, K)
        tx = zest_init(spec, n=2, b=1, seed=int(rng.integers(1000)))
        from timtin.gdof import zfsc_receivers

        rx = zfsc_receivers(spec, tx)
        esm = effective_strengths(spec, tx, rx)
        alpha_pairs = spec.alpha[np.ix_(esm.owner, esm.owner)]
        ok = (esm.G == 0.0) | (esm.G == alpha_pairs)
        assert np.all(ok)


def test_effective_strengths_sc_zeroing():
    spec = ChannelSpec(K=1, alpha=[[1.0]])
    v = np.array([[1.0, 0.0], [0.0, 1.0]])
    tx = tx_config(2, V=[v], r=[[0.0, -0.1]])
    # receivers hear both streams
    u = np.array([[np.sqrt(0.5), np.sqrt(0.5)], [np.sqrt(0.5), -np.sqrt(0.5)]])
    rx = RxConfig(U=(u,), sc_order=((0, 1),))
    esm = effective_strengths(spec, tx, rx)
    # stream 0 was cancelled before stream 1 is decoded
    assert esm.G[1, 0] == 0.0
    assert esm.G[0, 1] == 1.0


# ------------------------------------------------------------ power update


def test_dual_update_floor_values():
    G = np.array([[1.0, 0.3], [0.5, 1.0]])
    esm = EffectiveStrengthMatrix(G=G, owner=(0, 1), b=(1, 1))
    r = np.array([0.0, 0.0])
    out = dual_power_update(esm, r)
    assert out == pytest.approx([-0.3, -0.5])


def test_dual_update_no_surviving_interference():
    esm = EffectiveStrengthMatrix(G=np.diag([1.0, 1.0]), owner=(0, 1), b=(1, 1))
    out = dual_power_update(esm, np.array([-0.4, 0.0]))
    assert out == pytest.approx([0.0, 0.0])


def test_dual_update_outputs_nonpositive():
    rng = np.random.default_rng(8)
    for _ in range(50):
        B = int(rng.integers(1, 7))
        G = rng.uniform(0, 1.5, (B, B))
        esm = EffectiveStrengthMatrix(G=G, owner=tuple(range(B)), b=(1,) * B)
        out = dual_power_update(esm, rng.uniform(-1, 0, B))
        assert np.all(out <= 0.0)


def test_dual_update_dimension_check():
    esm = EffectiveStrengthMatrix(G=np.eye(2), owner=(0, 1), b=(1, 1))
    with pytest.raises(ValidationError, match="mismatched-dimensions"):
        dual_power_update(esm, np.zeros(3))


# ------------------------------------------------------------ worked example


def test_worked_example_first_cycle_tuples():
    res = run_zest(alignment_demo(), init_tx=alignment_demo_init())
    row = res.rows[0]
    assert row.d == pytest.approx((0.3, 0.2, 0.0, 0.0, 0.4), abs=1e-9)
    assert row.d_switch_rev == pytest.approx((0.35, 0.35, 0.0, 0.1, 0.4), abs=1e-9)
    assert row.d_rev == pytest.approx((0.35, 0.35, 0.1, 0.1, 0.5), abs=1e-9)
    assert row.d_switch_fwd == pytest.approx((0.5, 0.5, 0.5, 0.5, 0.5), abs=1e-9)


def test_worked_example_converges_to_optimum():
    res = run_zest(alignment_demo(), init_tx=alignment_demo_init())
    assert res.converged
    assert res.sum_gdof == pytest.approx(2.5, abs=1e-9)
    assert res.d == pytest.approx([0.5] * 5, abs=1e-9)


def test_single_user_reaches_one_within_first_cycle():
    spec = ChannelSpec(K=1, alpha=[[1.0]])
    res = run_zest(spec, n=1, b=1, seed=3)
    # the random power exponent is restored to 0 by the first dual update
    assert res.rows[0].sum_switch_rev == pytest.approx(1.0, abs=1e-12)
    assert res.converged and res.sum_gdof == pytest.approx(1.0)


def test_interference_free_network():
    spec = ChannelSpec(K=2, alpha=[[1.0, 0.0], [0.0, 1.0]])
    res = run_zest(spec, n=1, b=1, seed=0)
    assert res.converged
    assert res.d == pytest.approx([1.0, 1.0], abs=1e-12)


# ---------------------------------------------------------------- monotone


def test_monotone_chain_random_runs():
    rng = np.random.default_rng(12)
    for _ in range(60):
        K = int(rng.integers(3, 6))
        n = int(rng.integers(1, 4))
        b = int(rng.integers(1, min(n, 2) + 1))
        spec = random_spec(rng, K)
        res = run_zest(spec, n=n, b=b, seed=int(rng.integers(10_000)))
        prev_end = None
        for row in res.rows:
            assert row.sum_fwd <= row.sum_switch_rev + CHAIN_SLACK
            assert row.sum_switch_rev <= row.sum_rev + CHAIN_SLACK
            assert row.sum_rev <= row.sum_switch_fwd + CHAIN_SLACK
            if prev_end is not None:
                assert prev_end <= row.sum_fwd + CHAIN_SLACK
            prev_end = row.sum_switch_fwd


def test_converged_point_is_fixed():
    rng = np.random.default_rng(14)
    for _ in range(10):
        spec = random_spec(rng, 4)
        res = run_zest(spec, n=2, b=1, seed=int(rng.integers(100)))
        assert res.converged
        again = run_zest(spec, init_tx=res.tx, max_iter=2)
        assert again.rows[0].sum_fwd >= res.sum_gdof - CHAIN_SLACK
        assert again.rows[0].sum_fwd <= res.sum_gdof + 1e-6 + CHAIN_SLACK


def test_trace_row_d_matches_kept_config():
    spec = gen_cyclic_random(5, 0.5, seed=2)
    res = run_zest(spec, n=2, b=1, seed=5, keep_configs=True)
    assert len(res.configs) == res.iterations
    for row, tx in zip(res.rows, res.configs):
        assert gdof_of_config(spec, tx) == pytest.approx(row.d, abs=1e-9)


# ------------------------------------------------------------- run controls


def test_run_zest_rejects_bad_controls():
    spec = ChannelSpec(K=1, alpha=[[1.0]])
    with pytest.raises(ValidationError, match="max-iterations"):
        run_zest(spec, max_iter=0)
    with pytest.raises(ValidationError, match="tolerance-nonpositive"):
        run_zest(spec, tol=0.0)


def test_max_iter_bound_respected():
    spec = gen_cyclic_random(5, 0.5, seed=4)
    res = run_zest(spec, n=2, b=1, seed=0, max_iter=1)
    assert res.iterations == 1
    assert not res.converged


# ---------------------------------------------------------------- multi-init


def test_multi_init_singleton_matches_run():
    spec = gen_cyclic_random(5, 0.5, seed=6)
    best, results = multi_init_best(spec, n=2, b=1, seeds=[7])
    solo = run_zest(spec, n=2, b=1, seed=7)
    assert len(results) == 1
    assert best.sum_gdof == solo.sum_gdof
    assert best.d == pytest.approx(solo.d)


def test_multi_init_duplicate_seeds_keep_first():
    spec = gen_cyclic_random(5, 0.5, seed=6)
    best, results = multi_init_best(spec, n=2, b=1, seeds=[3, 3])
    assert len(results) == 2
    assert best is results[0]


def test_multi_init_returns_argmax():
    spec = gen_cyclic_random(5, 0.5, seed=11)
    best, results = multi_init_best(spec, n=2, b=1, seeds=range(8))
    assert best.sum_gdof == max(r.sum_gdof for r in results)


def test_multi_init_rejects_empty_seed_list():
    spec = ChannelSpec(K=1, alpha=[[1.0]])
    with pytest.raises(ValidationError, match="empty-seed-list"):
        multi_init_best(spec, n=1, b=1, seeds=[])


def test_select_best_rate_tie_break():
    spec = gen_cyclic_random(5, 0.5, seed=11)
    r0 = run_zest(spec, n=2, b=1, seed=0)
    # duplicate run: exact gdof tie, rate tie-break must still keep one
    chosen = select_best(spec, [r0, r0], P=1e5)
    assert chosen is r0


# --------------------------------------------------------------- trace file


def test_write_trace_csv(tmp_path):
    spec = alignment_demo()
    res = run_zest(spec, init_tx=alignment_demo_init())
    path = tmp_path / "trace.csv"
    write_trace_csv(str(path), res.rows, K=5)
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == [
        "iter",
        "sum_fwd",
        "sum_switch_rev",
        "sum_rev",
        "sum_switch_fwd",
        "d_1",
        "d_2",
        "d_3",
        "d_4",
        "d_5",
    ]
    assert len(rows) == 1 + res.iterations
    assert float(rows[1][1]) == pytest.approx(0.9, abs=1e-9)
    assert float(rows[-1][1]) == pytest.approx(2.5, abs=1e-9)
