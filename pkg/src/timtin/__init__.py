"""GDoF tools for interference networks.

Channel instances live in :mod:`timtin.channel`; the dominant-exponent
machinery, configurations and rate formulas in :mod:`timtin.gdof`; the
distributed vector/power iteration in :mod:`timtin.zest`; split-processing
decompositions in :mod:`timtin.decomposition`; finite-SNR comparison
algorithms in :mod:`timtin.baselines`; config-driven experiment runners in
:mod:`timtin.experiments`; and the ``timtin`` command in :mod:`timtin.cli`.
"""

from .channel import (
    ChannelSpec,
    QuantizationScheme,
    classify_links,
    gen_cyclic_random,
    gen_neighboring,
    linear_gain_matrix,
    load_channel,
    reciprocal,
    save_channel,
    with_phases,
)
from .decomposition import (
    ComposedScheme,
    Decomposition,
    TimSolution,
    TinSolution,
    compose,
    decomposition_by_threshold,
    factor_bound,
    load_decomposition,
    neighboring_achievability,
    neighboring_sym_gdof,
    save_decomposition,
    smallest_feasible_ring,
    tim_solution_for,
    tin_feasible,
    tin_optimal,
    tin_subnetwork,
    tin_symmetric_gdof,
    verify_scheme,
)
from .baselines import (
    BaselineResult,
    IgpcResult,
    full_power_rates,
    igpc,
    max_sinr,
    sapc,
    tdma_rates,
)
from .errors import UnsupportedTopologyError, ValidationError, VerificationError
from .experiments import (
    ExperimentConfig,
    parse_config,
    run_converge,
    run_decompose,
    run_neighboring,
    run_sweep,
)
from .gdof import (
    ExponentSet,
    RxConfig,
    TxConfig,
    dominant_exponent_sum,
    finite_snr_rates,
    gdof_of_config,
    gdof_slope,
    load_txconfig,
    save_txconfig,
    stream_gdof,
    tx_config,
    zfsc_receivers,
)
from .zest import (
    ZestResult,
    dual_power_update,
    effective_strengths,
    multi_init_best,
    run_zest,
    zest_init,
)

__version__ = "0.1.0"
