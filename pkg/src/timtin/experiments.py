"""Config-driven experiment runners: sweeps, convergence traces, reports.

All experiments are seed-deterministic: a master seed is expanded into
independent per-realization seed sequences up front, work items fan out
across a thread pool (capped by the ``TIMTIN_THREADS`` environment
variable), and results are aggregated positionally, so the emitted CSV is
byte-identical regardless of worker count.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .baselines import full_power_rates, igpc, max_sinr, sapc, tdma_rates
from .channel import (
    ChannelSpec,
    gen_cyclic_random,
    gen_neighboring,
    load_channel,
    validate as validate_channel,
    with_phases,
)
from .decomposition import (
    compose,
    decomposition_by_threshold,
    factor_bound,
    load_decomposition,
    neighboring_achievability,
    neighboring_sym_gdof,
    tim_solution_for,
    tin_subnetwork,
    tin_symmetric_gdof,
    TinSolution,
    verify_scheme,
)
from .errors import ValidationError
from .gdof import TxConfig, finite_snr_rates
from .zest import ZestResult, run_zest, select_best

__all__ = [
    "ALGORITHMS",
    "ExperimentConfig",
    "parse_config",
    "config_from_dict",
    "snr_to_power",
    "worker_count",
    "run_sweep",
    "run_converge",
    "run_decompose",
    "run_neighboring",
    "format_rows",
    "write_rows",
]

ALGORITHMS = ("zest", "tdma", "full_power", "max_sinr", "sapc", "igpc")

_KINDS = ("sweep", "converge", "decompose", "neighboring", "gdof")

_DEFAULT_SNR_DB = (10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0)
_DEFAULT_ALGORITHMS = ("zest", "tdma", "full_power", "max_sinr", "sapc")


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed experiment description with every default resolved."""

    kind: str
    channel_file: str | None = None
    generator: dict | None = None
    snr_db: tuple[float, ...] = _DEFAULT_SNR_DB
    realizations: int = 200
    seed: int = 0
    algorithms: tuple[str, ...] = _DEFAULT_ALGORITHMS
    n: int = 2
    b: int = 1
    zest_max_iter: int = 100
    zest_tol: float = 1e-6
    inits_low: int = 30
    inits_high: int = 10
    init_threshold_db: float = 30.0
    max_sinr_max_iter: int = 500
    max_sinr_tol: float = 1e-6
    sapc_max_iter: int = 500
    sapc_tol: float = 1e-6
    igpc_max_iter: int = 100
    igpc_tol: float = 1e-6
    output: str | None = None
    decomposition_file: str | None = None
    threshold: float | None = None
    txconfig_file: str | None = None
    S: int | None = None
    M: int | None = None
    K: int | None = None


_CONFIG_KEYS = {f.name for f in dataclasses.fields(ExperimentConfig)}

_GENERATOR_KEYS = {
    "cyclic": {"K", "x"},
    "neighboring": {"K", "S", "M", "variant", "strong_value", "medium_value"},
}


def config_from_dict(doc: dict, where: str = "config") -> ExperimentConfig:
    """Validate a key/value document and fill in defaults."""
    if not isinstance(doc, dict):
        raise ValidationError(f"{where}: document must be a key/value mapping")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ValidationError(f"{where}: unknown key {sorted(unknown)[0]!r}")
    if "kind" not in doc:
        raise ValidationError(f"{where}: missing required key 'kind'")
    kind = doc["kind"]
    if kind not in _KINDS:
        raise ValidationError(f"{where}: field 'kind' must be one of {_KINDS}, got {kind!r}")

    fields = dict(doc)
    if "snr_db" in fields:
        try:
            snr = tuple(float(v) for v in fields["snr_db"])
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{where}: field 'snr_db' must be a list of numbers") from exc
        if not snr:
            raise ValidationError(f"{where}: field 'snr_db' must not be empty")
        if any(b <= a for a, b in zip(snr, snr[1:])):
            raise ValidationError(f"{where}: field 'snr_db' must be strictly ascending")
        fields["snr_db"] = snr
    if "algorithms" in fields:
        algs = tuple(fields["algorithms"])
        if not algs:
            raise ValidationError(f"{where}: field 'algorithms' must not be empty")
        for a in algs:
            if a not in ALGORITHMS:
                raise ValidationError(
                    f"{where}: field 'algorithms' contains unknown algorithm {a!r}"
                )
        fields["algorithms"] = algs
    for int_key in (
        "realizations",
        "seed",
        "n",
        "b",
        "zest_max_iter",
        "inits_low",
        "inits_high",
        "max_sinr_max_iter",
        "sapc_max_iter",
        "igpc_max_iter",
        "S",
        "M",
        "K",
    ):
        if int_key in fields and fields[int_key] is not None:
            v = fields[int_key]
            if not isinstance(v, int) or isinstance(v, bool):
                raise ValidationError(f"{where}: field {int_key!r} must be an integer, got {v!r}")
    if "realizations" in fields and fields["realizations"] < 1:
        raise ValidationError(f"{where}: field 'realizations' must be >= 1")
    for pos_key in ("zest_tol", "max_sinr_tol", "sapc_tol", "igpc_tol"):
        if pos_key in fields and not fields[pos_key] > 0:
            raise ValidationError(f"{where}: field {pos_key!r} must be > 0")
    for count_key in ("inits_low", "inits_high"):
        if count_key in fields and fields[count_key] < 1:
            raise ValidationError(f"{where}: field {count_key!r} must be >= 1")
    gen = fields.get("generator")
    if gen is not None:
        if not isinstance(gen, dict) or "type" not in gen:
            raise ValidationError(f"{where}: field 'generator' needs a 'type' entry")
        gtype = gen["type"]
        if gtype not in _GENERATOR_KEYS:
            raise ValidationError(
                f"{where}: generator type must be one of {sorted(_GENERATOR_KEYS)}, got {gtype!r}"
            )
        extra = set(gen) - _GENERATOR_KEYS[gtype] - {"type"}
        if extra:
            raise ValidationError(
                f"{where}: generator key {sorted(extra)[0]!r} not valid for type {gtype!r}"
            )
        if gtype == "neighboring":
            for req in ("K", "S", "M"):
                if req not in gen:
                    raise ValidationError(
                        f"{where}: generator type 'neighboring' needs key {req!r}"
                    )
    if fields.get("channel_file") is not None and gen is not None:
        raise ValidationError(f"{where}: give either 'channel_file' or 'generator', not both")
    try:
        return ExperimentConfig(**fields)
    except TypeError as exc:
        raise ValidationError(f"{where}: {exc}") from exc


def parse_config(path) -> ExperimentConfig:
    """Read and validate an experiment config file (JSON key/value)."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(
            f"config file {path} is not valid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}"
        ) from exc
    return config_from_dict(doc, where=str(path))


def snr_to_power(snr_db: float) -> float:
    return float(10.0 ** (snr_db / 10.0))


def worker_count(n_tasks: int) -> int:
    """Thread-pool size: cpu count, capped by TIMTIN_THREADS and the task
    count."""
    cap = os.environ.get("TIMTIN_THREADS")
    if cap is not None:
        try:
            cap_n = int(cap)
        except ValueError as exc:
            raise ValidationError(f"TIMTIN_THREADS must be an integer, got {cap!r}") from exc
        if cap_n < 1:
            raise ValidationError(f"TIMTIN_THREADS must be >= 1, got {cap_n}")
    else:
        cap_n = os.cpu_count() or 1
    return max(1, min(cap_n, n_tasks))


def _parallel_map(fn, items):
    workers = worker_count(len(items))
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class _Realization:
    """One channel draw with all the seeds its algorithm runs will use."""

    index: int
    spec: ChannelSpec
    zest_seeds: tuple
    max_sinr_seeds: tuple


def _realize(cfg: ExperimentConfig, n_realizations: int) -> list[_Realization]:
    """Expand the master seed into per-realization channels and seed pools."""
    root = np.random.SeedSequence(cfg.seed)
    children = root.spawn(n_realizations)
    base_spec = None
    if cfg.channel_file is not None:
        base_spec = load_channel(cfg.channel_file)
    gen = cfg.generator or {"type": "cyclic", "K": 5, "x": 0.5}
    n_inits = max(cfg.inits_low, cfg.inits_high)
    out = []
    for i, child in enumerate(children):
        chan_ss, theta_ss, zest_ss, msinr_ss = child.spawn(4)
        if base_spec is not None:
            spec = base_spec if base_spec.theta is not None else with_phases(base_spec, theta_ss)
        elif gen["type"] == "cyclic":
            spec = gen_cyclic_random(gen.get("K", 5), gen.get("x", 0.5), seed=chan_ss)
        else:
            spec = gen_neighboring(
                gen["K"],
                gen["S"],
                gen["M"],
                variant=gen.get("variant", "ring"),
                strong_value=gen.get("strong_value", 1.0),
                medium_value=gen.get("medium_value", 0.5),
            )
            spec = with_phases(spec, theta_ss)
        out.append(
            _Realization(
                index=i,
                spec=spec,
                zest_seeds=tuple(zest_ss.spawn(n_inits)),
                max_sinr_seeds=tuple(msinr_ss.spawn(n_inits)),
            )
        )
    return out


def _zest_pool(cfg: ExperimentConfig, real: _Realization, n_needed: int) -> list[ZestResult]:
    return [
        run_zest(
            real.spec,
            n=cfg.n,
            b=cfg.b,
            seed=s,
            max_iter=cfg.zest_max_iter,
            tol=cfg.zest_tol,
        )
        for s in real.zest_seeds[:n_needed]
    ]


def _sweep_one(cfg: ExperimentConfig, real: _Realization) -> dict:
    """Sum rate of each requested algorithm at each SNR for one channel."""
    sums: dict[tuple[float, str], float] = {}
    needs_all = any(s < cfg.init_threshold_db for s in cfg.snr_db)
    zest_runs = None
    if "zest" in cfg.algorithms:
        zest_runs = _zest_pool(cfg, real, cfg.inits_low if needs_all else cfg.inits_high)
    for snr in cfg.snr_db:
        P = snr_to_power(snr)
        n_inits = cfg.inits_low if snr < cfg.init_threshold_db else cfg.inits_high
        for alg in cfg.algorithms:
            if alg == "zest":
                best = select_best(real.spec, zest_runs[:n_inits], P)
                val = float(finite_snr_rates(real.spec, best.tx, P).sum())
            elif alg == "tdma":
                val = tdma_rates(real.spec, P).sum_rate
            elif alg == "full_power":
                val = full_power_rates(real.spec, P).sum_rate
            elif alg == "sapc":
                val = sapc(real.spec, P, max_iter=cfg.sapc_max_iter, tol=cfg.sapc_tol).sum_rate
            elif alg == "max_sinr":
                runs = [
                    max_sinr(
                        real.spec,
                        n=cfg.n,
                        b=cfg.b,
                        P=P,
                        seed=s,
                        max_iter=cfg.max_sinr_max_iter,
                        tol=cfg.max_sinr_tol,
                    )
                    for s in real.max_sinr_seeds[:n_inits]
                ]
                val = max(r.sum_rate for r in runs)
            elif alg == "igpc":
                pw, _ = igpc(real.spec, max_iter=cfg.igpc_max_iter, tol=cfg.igpc_tol)
                tx = TxConfig(
                    n=1,
                    V=tuple(np.ones((1, 1), dtype=complex) for _ in range(real.spec.K)),
                    r=tuple(np.array([x]) for x in pw),
                )
                val = float(finite_snr_rates(real.spec, tx, P).sum())
            else:  # pragma: no cover - guarded by config validation
                raise ValidationError(f"unknown algorithm {alg!r}")
            sums[(snr, alg)] = val
    return sums


def run_sweep(cfg: ExperimentConfig) -> list[tuple]:
    """Mean/std sum-rate of each algorithm across random realizations.

    Returns rows ``(snr_db, algorithm, mean_sum_rate, std_sum_rate,
    n_realizations)`` sorted by (snr, algorithm).
    """
    if cfg.kind != "sweep":
        raise ValidationError(f"config kind {cfg.kind!r} is not 'sweep'")
    reals = _realize(cfg, cfg.realizations)
    per_real = _parallel_map(lambda r: _sweep_one(cfg, r), reals)
    rows = []
    for snr in cfg.snr_db:
        for alg in sorted(cfg.algorithms):
            vals = np.array([p[(snr, alg)] for p in per_real])
            rows.append((snr, alg, float(vals.mean()), float(vals.std()), len(vals)))
    rows.sort(key=lambda row: (row[0], row[1]))
    return rows


def _converge_power(cfg: ExperimentConfig) -> float:
    return snr_to_power(max(cfg.snr_db))


def run_converge(cfg: ExperimentConfig) -> tuple[list[tuple], dict]:
    """Per-iteration traces of each algorithm on a single realization.

    Returns rows ``(algorithm, iter, sum_rate, sum_gdof)`` — sum_rate is
    None for GDoF-level algorithms on phase-less channels, sum_gdof is None
    for algorithms that do not compute one — plus a dict of final transmit
    configurations for the algorithms that have them.  Rate evaluations use
    the highest configured SNR.
    """
    if cfg.kind != "converge":
        raise ValidationError(f"config kind {cfg.kind!r} is not 'converge'")
    real = _realize(cfg, 1)[0]
    spec = real.spec
    P = _converge_power(cfg)
    has_phases = spec.theta is not None
    rows: list[tuple] = []
    finals: dict[str, object] = {}
    for alg in cfg.algorithms:
        if alg == "zest":
            res = run_zest(
                spec,
                n=cfg.n,
                b=cfg.b,
                seed=real.zest_seeds[0],
                max_iter=cfg.zest_max_iter,
                tol=cfg.zest_tol,
                keep_configs=True,
            )
            for row, tx in zip(res.rows, res.configs):
                rate = float(finite_snr_rates(spec, tx, P).sum()) if has_phases else None
                rows.append((alg, row.iter, rate, row.sum_fwd))
            finals[alg] = res
        elif alg == "igpc":
            res = igpc(spec, max_iter=cfg.igpc_max_iter, tol=cfg.igpc_tol)
            # trace holds half-iteration tuples [start, rev 1, fwd 1, ...]
            for m in range(1, res.iterations + 1):
                d_sum = float(sum(res.trace[2 * m]))
                rows.append((alg, m, None, d_sum))
            finals[alg] = res
        elif alg == "tdma":
            rows.append((alg, 1, tdma_rates(spec, P).sum_rate, None))
        elif alg == "full_power":
            if not has_phases:
                raise ValidationError(
                    "missing-phases: full_power needs theta for a convergence trace"
                )
            rows.append((alg, 1, full_power_rates(spec, P).sum_rate, None))
        elif alg == "sapc":
            res = sapc(spec, P, max_iter=cfg.sapc_max_iter, tol=cfg.sapc_tol)
            for i, s in enumerate(res.trace[1:], start=1):
                rows.append((alg, i, s, None))
            finals[alg] = res
        elif alg == "max_sinr":
            res = max_sinr(
                spec,
                n=cfg.n,
                b=cfg.b,
                P=P,
                seed=real.max_sinr_seeds[0],
                max_iter=cfg.max_sinr_max_iter,
                tol=cfg.max_sinr_tol,
            )
            for i, s in enumerate(res.trace[1:], start=1):
                rows.append((alg, i, s, None))
            finals[alg] = res
    return rows, finals


def run_decompose(cfg_or_spec, decomp=None) -> dict:
    """Decomposition report: the two symmetric values, their product, the
    outer bound, and the gap factor, with the composed scheme verified on
    the full network."""
    if isinstance(cfg_or_spec, ExperimentConfig):
        cfg = cfg_or_spec
        if cfg.kind != "decompose":
            raise ValidationError(f"config kind {cfg.kind!r} is not 'decompose'")
        if cfg.decomposition_file is not None:
            spec, decomp = load_decomposition(cfg.decomposition_file)
        elif cfg.channel_file is not None and cfg.threshold is not None:
            spec = load_channel(cfg.channel_file)
            decomp = decomposition_by_threshold(spec, cfg.threshold)
        else:
            raise ValidationError(
                "decompose needs 'decomposition_file', or 'channel_file' with 'threshold'"
            )
    else:
        spec = cfg_or_spec
        if decomp is None:
            raise ValidationError("decompose needs a decomposition")
    validate_channel(spec)
    tim = tim_solution_for(spec, decomp)
    d_tin, r = tin_symmetric_gdof(tin_subnetwork(spec, decomp))
    achieved, outer, factor = factor_bound(spec, decomp)
    scheme = compose(spec, decomp, tim, TinSolution(d_sym=d_tin, r=r))
    verified = verify_scheme(spec, scheme)
    return {
        "tin_sym": d_tin,
        "tim_sym": tim.d_sym,
        "product": achieved,
        "outer": outer,
        "factor": factor,
        "verified_min": float(verified.min()),
    }


def run_neighboring(S: int, M: int, K: int) -> dict:
    """Closed-form vs verified achieved symmetric GDoF on a K-user ring."""
    spec, scheme = neighboring_achievability(S, M, K)
    achieved = verify_scheme(spec, scheme)
    return {
        "S": S,
        "M": M,
        "K": K,
        "d_sym": neighboring_sym_gdof(S, M),
        "achieved_min": float(achieved.min()),
    }


def format_rows(header: tuple[str, ...], rows) -> str:
    """Render rows as CSV text; floats use 10 significant digits, None is
    an empty cell."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        out = []
        for v in row:
            if v is None:
                out.append("")
            elif isinstance(v, float):
                out.append(f"{v:.10g}")
            else:
                out.append(v)
        w.writerow(out)
    return buf.getvalue()


def write_rows(path, header: tuple[str, ...], rows) -> None:
    text = format_rows(header, rows)
    with open(path, "w", newline="") as fh:
        fh.write(text)
