"""Quantized and one-bit low-rank matrix completion toolkit.

Layers, bottom-up: ``core`` (matrices, masks, ground truth), ``quantize``
(scalar/dithered/stochastic quantizers), ``onebit`` (sign observations and
the constraint polyhedron), ``solvers`` (nuclear-norm programs), ``bounds``
(closed-form recovery guarantees), ``harness`` (seeded Monte Carlo
experiments and CSV reports).
"""

from .bounds import (
    BoundInputs,
    BoundValue,
    TightnessResult,
    bound_inconsistent,
    bound_noisy,
    bound_quantized,
    bound_statistics_only,
    bound_subgaussian,
    bound_uniform,
    compare_tightness,
    epsilon_decay_rate,
)
from .core import (
    Dims,
    GroundTruth,
    SampleMask,
    generate_low_rank,
    load_matrix_csv,
    project,
    sample_mask_uniform,
    save_matrix_csv,
    scatter_vector,
    select_vector,
)
from .harness import ExperimentConfig, TrialRecord, emit_report, fit_rate, load_config, run_experiment
from .onebit import (
    ConsistencyReport,
    NoiseSpec,
    OneBitObservation,
    PolyhedronSystem,
    UnsupportedModeError,
    build_polyhedron,
    consistency_report,
    hamming,
    observe_one_bit,
    strip_thresholds,
    surrogate_data,
    t_ave,
    violation_measure,
)
from .quantize import (
    DitherSpec,
    DitherTensor,
    QuantizerSpec,
    dithered_quantize,
    generate_dither_tensor,
    one_bit,
    quantize_matrix,
    scalar_quantize,
    stochastic_quantize,
)
from .solvers import (
    ProxParams,
    SolverReport,
    prox_nuclear,
    solve_one_bit_mc,
    solve_quantized_mc,
    solve_statistics_only,
)

__version__ = "0.1.0"
