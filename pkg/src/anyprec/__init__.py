"""Bit-accurate functional model and analytic cost model of a
flexible-precision bit-parallel GEMM accelerator."""

from .archsim import (
    AcceleratorConfig,
    GemmWorkload,
    SimReport,
    TilePlan,
    best_dataflow,
    load_machine,
    packing_ablation,
    pe_throughput,
    plan_tiles,
    simulate,
    simulate_baseline,
)
from .bitpack import PackedBuffer, PaddedStream, metadata, pack, unpack
from .codec import (
    ExactNumber,
    FormatSpec,
    Kind,
    MxBlock,
    Rounding,
    ScalarValue,
    add_ref,
    decode,
    encode,
    mul_ref,
    mx_dot_ref,
    parse_format,
)
from .control import ControlBundle, PEConfig, SwitchMode, compile_bundle
from .cost import EnergyTable, edp, energy, load_energy_table, perf_per_area
from .datapath import (
    accumulate,
    apply_implicit_one,
    concat_shift,
    normalize_exponents,
    pe_mac_tile,
    pe_multiply,
    run_reduction_tree,
    segmented_add,
)
from .errors import (
    AnyprecError,
    CapacityError,
    ConfigError,
    ControlError,
    FormatError,
    ShapeError,
)
from .workloads import ModelSpec, expand, load_model, precision_sweep, total_macs

__version__ = "0.1.0"
