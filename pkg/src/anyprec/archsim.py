"""Accelerator-level analytic cycle model.

Roofline-style: compute cycles from the PE-array mapping and per-PE rate,
memory cycles from packed traffic over off-chip and on-chip bandwidths,
overall latency = max of the bound resources plus a fixed reconfiguration
cost. Weight- and output-stationary dataflows differ in their array
mapping and reuse structure. Baselines (fixed-format tensor-core style and
power-of-two fusion style) run the same skeleton at their upcast formats
with padded storage.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

from .codec import FormatSpec, Kind, parse_format
from .control import PEConfig
from .errors import ConfigError

WS = "ws"
OS = "os"
DATAFLOWS = (WS, OS)


@dataclass(frozen=True)
class AcceleratorConfig:
    """Machine description: PE array, buffers, interconnect, clocking."""

    name: str
    num_pes: int
    array_x: int
    array_y: int
    reg_width: int = 24
    wgt_glb_bytes: int = 2 * 2**20
    act_out_glb_bytes: int = 1 * 2**20
    local_buf_bytes_per_pe: int = 184
    noc_w_gbps: float = 32.0
    noc_a_gbps: float = 32.0
    offchip_gbps: float = 16.0
    clock_hz: float = 1.0e9
    reconfig_cycles: int = 64

    def __post_init__(self):
        if self.num_pes != self.array_x * self.array_y:
            raise ConfigError(
                f"{self.name}: num_pes {self.num_pes} != {self.array_x}x{self.array_y}"
            )
        if min(self.wgt_glb_bytes, self.act_out_glb_bytes, self.local_buf_bytes_per_pe) <= 0:
            raise ConfigError(f"{self.name}: buffers must be positive")


@dataclass(frozen=True)
class GemmWorkload:
    m: int
    n: int
    k: int
    fmt_a: FormatSpec
    fmt_w: FormatSpec
    fmt_o: FormatSpec
    label: str = ""

    def __post_init__(self):
        if min(self.m, self.n, self.k) < 1:
            raise ConfigError(f"{self.label}: GEMM dims must be positive")

    @property
    def macs(self) -> int:
        return self.m * self.n * self.k


@dataclass(frozen=True)
class TilePlan:
    dataflow: str
    tile_m: int
    tile_n: int
    tile_k: int
    n_mt: int
    n_nt: int
    n_kt: int
    wgt_reuse: float   # times each weight bit is used per fetch
    out_reuse: float   # k-steps accumulated per output residency


@dataclass
class SimReport:
    """Observable metrics of one simulated GEMM."""

    machine: str
    workload: str
    dataflow: str
    cycles: int
    seconds: float
    macs: int
    macs_per_cycle: float
    pe_util: float
    dram_bits_read: int
    dram_bits_written: int
    noc_bits: int
    sram_read_bits: int
    sram_write_bits: int
    precision_loss_events: int = 0
    energy_j: float = 0.0
    breakdowns: dict = field(default_factory=dict)


def pe_throughput(fmt_a: FormatSpec, fmt_w: FormatSpec, cfg: PEConfig | None = None) -> int:
    """Peak MACs per cycle per PE: element pairs per register load, capped
    by the primitive-register capacity."""
    cfg = cfg or PEConfig()
    pairs = (cfg.reg_width // fmt_a.total_bits) * (cfg.reg_width // fmt_w.total_bits)
    prims = max(1, fmt_a.man_bits * fmt_w.man_bits)
    return min(pairs, cfg.prim_reg_bits // prims)


def _elems(reg_width: int, width: int) -> int:
    n = reg_width // width
    if n < 1:
        raise ConfigError(f"{width}-bit element exceeds the {reg_width}-bit register")
    return n


def _halving_ladder(n: int) -> list[int]:
    out = []
    v = n
    while v >= 1:
        out.append(v)
        if v == 1:
            break
        v = -(-v // 2)
    return out


def plan_tiles(
    w: GemmWorkload,
    acc: AcceleratorConfig,
    dataflow: str,
    store_a: int | None = None,
    store_w: int | None = None,
    store_o: int | None = None,
) -> TilePlan:
    """Choose the largest-reuse GLB tiling for the dataflow: candidate tile
    splits are enumerated on a halving ladder and the one with the least
    modeled DRAM traffic wins. Store widths default to the packed element
    widths."""
    if dataflow not in DATAFLOWS:
        raise ConfigError(f"unknown dataflow {dataflow!r}")
    pa = store_a or w.fmt_a.total_bits
    pw = store_w or w.fmt_w.total_bits
    po = store_o or w.fmt_o.total_bits
    wgt_bits = acc.wgt_glb_bytes * 8
    ao_bits = acc.act_out_glb_bytes * 8
    bits_a = w.m * w.k * pa
    bits_w = w.k * w.n * pw
    bits_o = w.m * w.n * po

    best = None
    if dataflow == WS:
        # weights resident (tile_k x tile_n); act strip + psum strip share
        # the act/out buffer; shallower weight tiles widen tile_n (fewer
        # activation rereads) at the cost of partial-sum spills
        for tile_k in _halving_ladder(w.k):
            tile_n = min(w.n, wgt_bits // (tile_k * pw))
            if tile_n < 1:
                continue
            tile_m = min(w.m, ao_bits // (tile_k * pa + tile_n * po))
            if tile_m < 1:
                continue
            n_nt = _ceil_div(w.n, tile_n)
            n_kt = _ceil_div(w.k, tile_k)
            traffic = bits_w + n_nt * bits_a + (2 * n_kt - 1) * bits_o
            cand = (traffic, -tile_k, tile_n, tile_m)
            if best is None or cand < best[0]:
                best = (cand, (tile_m, tile_n, tile_k))
    else:
        # outputs resident across the whole K loop; acts stream through a
        # one-deep strip of the same buffer
        for tile_m in _halving_ladder(w.m):
            tile_n = min(w.n, (ao_bits - tile_m * pa) // max(1, tile_m * po))
            if tile_n < 1 or tile_m * pa + tile_m * tile_n * po > ao_bits:
                continue
            if wgt_bits < pw:  # must hold at least one weight element
                continue
            n_mt = _ceil_div(w.m, tile_m)
            n_nt = _ceil_div(w.n, tile_n)
            traffic = n_mt * bits_w + n_nt * bits_a + bits_o
            cand = (traffic, -tile_m, tile_n)
            if best is None or cand < best[0]:
                best = (cand, (tile_m, tile_n, w.k))
    if best is None:
        raise ConfigError(f"{acc.name}: buffers cannot hold a unit tile of {w.label}")

    tile_m, tile_n, tile_k = best[1]
    n_mt = _ceil_div(w.m, tile_m)
    n_nt = _ceil_div(w.n, tile_n)
    n_kt = _ceil_div(w.k, tile_k)
    if dataflow == WS:
        wgt_reuse = w.m / tile_m
        out_reuse = tile_k
    else:
        wgt_reuse = 1.0
        out_reuse = w.k
    return TilePlan(dataflow, tile_m, tile_n, tile_k, n_mt, n_nt, n_kt, wgt_reuse, out_reuse)


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def simulate(
    w: GemmWorkload,
    acc: AcceleratorConfig,
    dataflow: str = WS,
    pe_cfg: PEConfig | None = None,
    padded: bool = False,
    throughput: int | None = None,
    store_widths: tuple[int, int, int] | None = None,
) -> SimReport:
    """Analytic cycle/traffic model of one GEMM on one machine.

    `padded` stores every element in byte-aligned containers end to end
    (no packing unit); `throughput` and `store_widths` let baselines
    override the PE rate and storage widths.
    """
    pe_cfg = pe_cfg or PEConfig(reg_width=acc.reg_width)
    if store_widths is not None:
        pa, pw, po = store_widths
    else:
        pa, pw, po = (f.total_bits for f in (w.fmt_a, w.fmt_w, w.fmt_o))
    if padded:
        pa, pw, po = (8 * _ceil_div(x, 8) for x in (pa, pw, po))

    tput = throughput if throughput is not None else pe_throughput(w.fmt_a, w.fmt_w, pe_cfg)
    pe_a = _elems(pe_cfg.reg_width, pa)
    pe_w = _elems(pe_cfg.reg_width, pw)
    tput = min(tput, pe_a * pe_w)
    cyc_per_step = _ceil_div(pe_a * pe_w, tput)

    plan = plan_tiles(w, acc, dataflow, pa, pw, po)

    # array mapping
    if dataflow == OS:
        um = acc.array_x * pe_a
        un = acc.array_y * pe_w
        waves = _ceil_div(w.m, um) * _ceil_div(w.n, un)
        compute_cycles = waves * w.k * cyc_per_step
    else:
        uk = acc.array_x
        un = acc.array_y * pe_w
        waves = _ceil_div(w.k, uk) * _ceil_div(w.n, un)
        compute_cycles = waves * _ceil_div(w.m, pe_a) * cyc_per_step

    # DRAM traffic (bits)
    bits_a = w.m * w.k * pa
    bits_w = w.k * w.n * pw
    bits_o = w.m * w.n * po
    if dataflow == WS:
        dram_rd = bits_w + plan.n_nt * bits_a + (plan.n_kt - 1) * bits_o
        dram_wr = plan.n_kt * bits_o
    else:
        dram_rd = plan.n_mt * bits_w + plan.n_nt * bits_a
        dram_wr = bits_o

    # NoC traffic (bits over the weight and act/out networks)
    if dataflow == WS:
        k_pe = max(1, (acc.local_buf_bytes_per_pe * 8 // 2) // max(1, pe_w * pw))
        noc_w = bits_w
        noc_a_in = _ceil_div(w.n, un) * bits_a
        noc_out = _ceil_div(w.k, acc.array_x * k_pe) * bits_o
    else:
        noc_w = _ceil_div(w.m, acc.array_x * pe_a) * bits_w
        noc_a_in = _ceil_div(w.n, acc.array_y * pe_w) * bits_a
        noc_out = bits_o
    noc_a = noc_a_in + noc_out

    # bandwidths in bits per cycle
    def _bpc(gbps: float) -> float:
        return gbps * 8e9 / acc.clock_hz

    dram_cycles = math.ceil((dram_rd + dram_wr) / _bpc(acc.offchip_gbps))
    noc_w_cycles = math.ceil(noc_w / _bpc(acc.noc_w_gbps))
    noc_a_cycles = math.ceil(noc_a / _bpc(acc.noc_a_gbps))

    cycles = max(compute_cycles, dram_cycles, noc_w_cycles, noc_a_cycles) + acc.reconfig_cycles
    ideal = w.macs / (acc.num_pes * tput)
    util = min(1.0, ideal / cycles)

    # SRAM traffic: GLB fills/reads plus PE register loads from local buffers
    pe_steps = _ceil_div(w.macs, pe_a * pe_w)
    local_reads = pe_steps * (pe_a * pa + pe_w * pw)
    glb_reads = noc_w + noc_a_in
    glb_writes = dram_rd + noc_out

    add_width = max(w.fmt_a.exp_bits, w.fmt_w.exp_bits)
    report = SimReport(
        machine=acc.name,
        workload=w.label,
        dataflow=dataflow,
        cycles=int(cycles),
        seconds=cycles / acc.clock_hz,
        macs=w.macs,
        macs_per_cycle=w.macs / cycles,
        pe_util=util,
        dram_bits_read=int(dram_rd),
        dram_bits_written=int(dram_wr),
        noc_bits=int(noc_w + noc_a),
        sram_read_bits=int(glb_reads + local_reads),
        sram_write_bits=int(glb_writes),
        breakdowns={
            "cycles": {
                "compute": int(compute_cycles),
                "dram": int(dram_cycles),
                "noc_w": int(noc_w_cycles),
                "noc_a": int(noc_a_cycles),
                "reconfig": acc.reconfig_cycles,
            },
            "counts": {
                "prim_bit_ops": w.macs * max(1, w.fmt_a.man_bits * w.fmt_w.man_bits),
                "tree_node_bits": 2 * w.macs * max(1, w.fmt_a.man_bits * w.fmt_w.man_bits),
                "exp_add_bits": w.macs * (add_width + 1 if add_width else 0),
            },
            "plan": {
                "tile_m": plan.tile_m,
                "tile_n": plan.tile_n,
                "tile_k": plan.tile_k,
                "throughput": tput,
            },
        },
    )
    return report


def best_dataflow(w: GemmWorkload, acc: AcceleratorConfig, pe_cfg: PEConfig | None = None) -> SimReport:
    """Pick the lower-cycle dataflow for this point."""
    ws = simulate(w, acc, WS, pe_cfg)
    os_ = simulate(w, acc, OS, pe_cfg)
    return ws if ws.cycles <= os_.cycles else os_


# --------------------------------------------------------------------------
# Baselines
# --------------------------------------------------------------------------

TENSOR_CORE = "tensorcore"
BIT_FUSION = "bitfusion"
_TC_FLOATS = (parse_format("e4m3"), parse_format("e5m10"))


def _pow2ceil(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


def upcast_tensor_core(fmt: FormatSpec) -> FormatSpec:
    """Nearest supported fixed format: e4m3, e5m10, or int8."""
    if fmt.kind is Kind.INT:
        if fmt.total_bits <= 8:
            return parse_format("int8")
        raise ConfigError(f"{fmt} unsupported after upcast (int wider than 8)")
    for cand in _TC_FLOATS:
        if fmt.exp_bits <= cand.exp_bits and fmt.man_bits <= cand.man_bits:
            return cand
    raise ConfigError(f"{fmt} unsupported after upcast (beyond e5m10)")


def upcast_bit_fusion(fmt: FormatSpec) -> tuple[int, int]:
    """(storage width, fused multiplier operand width), powers of two."""
    store = _pow2ceil(fmt.total_bits)
    if store > 16:
        raise ConfigError(f"{fmt} unsupported: fused units stop at 16 bits")
    if fmt.kind is Kind.INT:
        mult = max(2, _pow2ceil(fmt.total_bits))
    else:
        mult = max(2, _pow2ceil(fmt.man_bits + 1))
    return store, mult


def simulate_baseline(
    w: GemmWorkload,
    acc: AcceleratorConfig,
    kind: str,
    pe_cfg: PEConfig | None = None,
) -> SimReport:
    """Iso-PE baselines sharing the roofline skeleton.

    The tensor-core style machine upcasts to its fixed formats and stores
    container-padded data. The fusion style machine supports power-of-two
    operand widths with fused-unit throughput scaling (256 bit-products
    per cycle, the capacity a 16x16 significand multiply needs).
    """
    pe_cfg = pe_cfg or PEConfig(reg_width=acc.reg_width)
    if kind == TENSOR_CORE:
        up_a = upcast_tensor_core(w.fmt_a)
        up_w = upcast_tensor_core(w.fmt_w)
        up_o = upcast_tensor_core(w.fmt_o)
        tput = pe_throughput(up_a, up_w, pe_cfg)
        report = simulate(
            w, acc, WS, pe_cfg,
            throughput=tput,
            store_widths=(up_a.total_bits, up_w.total_bits, up_o.total_bits),
        )
    elif kind == BIT_FUSION:
        sa, ma = upcast_bit_fusion(w.fmt_a)
        sw, mw = upcast_bit_fusion(w.fmt_w)
        so, _ = upcast_bit_fusion(w.fmt_o)
        pairs = (pe_cfg.reg_width // sa) * (pe_cfg.reg_width // sw)
        tput = min(pairs, 256 // (ma * mw))
        report = simulate(
            w, acc, WS, pe_cfg, throughput=tput, store_widths=(sa, sw, so)
        )
    else:
        raise ConfigError(f"unknown baseline {kind!r}")
    report.machine = f"{acc.name}:{kind}"
    return report


def packing_ablation(
    w: GemmWorkload,
    acc: AcceleratorConfig,
    dataflow: str = WS,
    pe_cfg: PEConfig | None = None,
) -> tuple[SimReport, SimReport]:
    """Identical machines, one with packed layout, one padded to byte
    containers end to end. Returns (packed, padded)."""
    packed = simulate(w, acc, dataflow, pe_cfg)
    padded = simulate(w, acc, dataflow, pe_cfg, padded=True)
    padded.machine = f"{acc.name}:padded"
    return packed, padded


# --------------------------------------------------------------------------
# Machine presets
# --------------------------------------------------------------------------


def load_machine(source) -> AcceleratorConfig:
    """Load a machine description from a JSON file (path or name of a
    shipped preset)."""
    if isinstance(source, AcceleratorConfig):
        return source
    text = None
    name = str(source)
    if name.endswith(".json"):
        with open(name) as fh:
            text = fh.read()
    else:
        ref = resources.files("anyprec").joinpath(f"data/machines/{name}.json")
        if not ref.is_file():
            raise ConfigError(f"unknown machine {name!r}")
        text = ref.read_text()
    try:
        raw = json.loads(text)
        return AcceleratorConfig(
            name=raw["name"],
            num_pes=raw["num_pes"],
            array_x=raw["array_x"],
            array_y=raw["array_y"],
            reg_width=raw.get("reg_width", 24),
            wgt_glb_bytes=int(raw["wgt_glb_mb"] * 2**20),
            act_out_glb_bytes=int(raw["act_out_glb_mb"] * 2**20),
            local_buf_bytes_per_pe=int(raw.get("local_buf_kb_per_pe", 0.18) * 1024),
            noc_w_gbps=raw["noc_w_gbps"],
            noc_a_gbps=raw["noc_a_gbps"],
            offchip_gbps=raw["offchip_gbps"],
            clock_hz=raw.get("clock_ghz", 1.0) * 1e9,
            reconfig_cycles=raw.get("reconfig_cycles", 64),
        )
    except KeyError as exc:
        raise ConfigError(f"machine config {name!r} missing key {exc}") from exc


def builtin_machines() -> list[str]:
    base = resources.files("anyprec").joinpath("data/machines")
    return sorted(p.name[:-5] for p in base.iterdir() if p.name.endswith(".json"))
