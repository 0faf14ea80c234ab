"""Cycle/traffic model: throughput, tiling, roofline, baselines, ablation."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anyprec.archsim import (
    BIT_FUSION,
    OS,
    TENSOR_CORE,
    WS,
    AcceleratorConfig,
    GemmWorkload,
    best_dataflow,
    builtin_machines,
    load_machine,
    packing_ablation,
    pe_throughput,
    plan_tiles,
    simulate,
    simulate_baseline,
    upcast_bit_fusion,
    upcast_tensor_core,
)
from anyprec.codec import parse_format
from anyprec.errors import ConfigError

FP4 = parse_format("e2m1")
FP6 = parse_format("e2m3")
FP8 = parse_format("e4m3")
FP16 = parse_format("e5m10")


def gemm(m, n, k, fa=FP6, fw=FP6, fo=None, label="g"):
    return GemmWorkload(m, n, k, fa, fw, fo or fa, label)


class TestThroughput:
    def test_reference_points(self):
        assert pe_throughput(FP6, FP6) == 16
        assert pe_throughput(FP8, FP8) == 9
        assert pe_throughput(FP16, FP16) == 1

    def test_full_width_operands(self):
        wide = parse_format("e11m12")  # 24 bits
        assert pe_throughput(wide, wide) == 1

    def test_prim_register_caps(self):
        # e2m5 x e2m5: 3x3 register pairs but 25 prims/op caps at 5
        f = parse_format("e2m5")
        assert pe_throughput(f, f) == min(9, 144 // 25)

    def test_monotone_in_precision(self):
        # decreasing either operand precision never lowers the rate
        fmts = [parse_format(f"e2m{m}") for m in range(1, 9)]
        rates = [pe_throughput(f, FP6) for f in fmts]
        assert all(a >= b for a, b in zip(rates, rates[1:]))


class TestMachines:
    def test_builtin_presets(self):
        names = builtin_machines()
        assert names == ["cloud_a", "cloud_b", "mobile_a", "mobile_b"]
        ma = load_machine("mobile_a")
        assert (ma.num_pes, ma.array_x, ma.array_y) == (1024, 32, 32)
        assert ma.offchip_gbps == 16 and ma.wgt_glb_bytes == 2 * 2**20
        ca = load_machine("cloud_a")
        assert (ca.noc_w_gbps, ca.noc_a_gbps) == (128, 64)
        cb = load_machine("cloud_b")
        assert cb.num_pes == 16384 and cb.array_x == cb.array_y == 128

    def test_pe_grid_must_match(self):
        with pytest.raises(ConfigError):
            AcceleratorConfig("bad", 100, 8, 8)

    def test_reconfiguration_cost_under_100_cycles(self):
        for name in builtin_machines():
            acc = load_machine(name)
            assert 0 < acc.reconfig_cycles < 100
        r = simulate(gemm(64, 64, 64), load_machine("mobile_a"), WS)
        assert r.breakdowns["cycles"]["reconfig"] < 100


class TestPlan:
    def test_tiny_gemm_single_tile(self):
        plan = plan_tiles(gemm(8, 8, 8), load_machine("mobile_a"), WS)
        assert (plan.n_mt, plan.n_nt, plan.n_kt) == (1, 1, 1)

    def test_bert_qkv_fits_capacity(self):
        acc = load_machine("mobile_a")
        plan = plan_tiles(gemm(2048, 2304, 768), acc, WS)
        assert plan.tile_k * plan.tile_n * 6 <= acc.wgt_glb_bytes * 8
        assert plan.tile_m * plan.tile_k * 6 + plan.tile_m * plan.tile_n * 6 <= acc.act_out_glb_bytes * 8

    def test_dataflows_change_traffic(self):
        acc = load_machine("mobile_a")
        g = gemm(2048, 11008, 4096, label="ffn")
        ws = simulate(g, acc, WS)
        os_ = simulate(g, acc, OS)
        assert ws.dram_bits_read != os_.dram_bits_read

    def test_impossible_tile_raises(self):
        tiny = AcceleratorConfig("tiny", 1, 1, 1, wgt_glb_bytes=1, act_out_glb_bytes=1)
        with pytest.raises(ConfigError):
            plan_tiles(gemm(64, 64, 64), tiny, WS)


class TestSimulate:
    def test_compute_bound_square_matches_closed_form(self):
        acc = AcceleratorConfig("tiny64", 64, 8, 8)
        g = gemm(2048, 2048, 2048)
        r = simulate(g, acc, OS)
        ideal = g.macs / (64 * 16)
        assert r.breakdowns["cycles"]["compute"] == max(r.breakdowns["cycles"].values())
        assert abs(r.cycles - ideal) / ideal < 0.05

    def test_unit_gemm(self):
        r = simulate(gemm(1, 1, 1), load_machine("mobile_a"), WS)
        assert r.cycles >= 1
        assert r.seconds == r.cycles / 1e9

    def test_determinism(self):
        acc = load_machine("mobile_a")
        g = gemm(512, 512, 512)
        a = simulate(g, acc, WS)
        b = simulate(g, acc, WS)
        assert a == b

    def test_conservation_reads_cover_unique_bits(self):
        acc = load_machine("mobile_a")
        for df in (WS, OS):
            g = gemm(1024, 1024, 1024)
            r = simulate(g, acc, df)
            unique = g.m * g.k * 6 + g.k * g.n * 6
            assert r.dram_bits_read >= unique
        # equality when one tile covers everything
        g = gemm(64, 64, 64)
        r = simulate(g, acc, OS)
        assert r.dram_bits_read == 64 * 64 * 6 * 2

    @given(
        bw=st.floats(min_value=1.0, max_value=512.0),
        bigger=st.floats(min_value=1.0, max_value=4.0),
    )
    @settings(max_examples=30, deadline=None)
    def test_bandwidth_monotonicity(self, bw, bigger):
        base = AcceleratorConfig("m", 256, 16, 16, offchip_gbps=bw)
        more = AcceleratorConfig("m", 256, 16, 16, offchip_gbps=bw * bigger)
        g = gemm(512, 768, 640)
        assert simulate(g, more, WS).cycles <= simulate(g, base, WS).cycles

    def test_buffer_monotonicity(self):
        g = gemm(2048, 11008, 4096)
        small = load_machine("mobile_a")
        big = AcceleratorConfig(
            "mobile_a+", 1024, 32, 32,
            wgt_glb_bytes=8 * 2**20, act_out_glb_bytes=4 * 2**20,
        )
        assert simulate(g, big, WS).cycles <= simulate(g, small, WS).cycles

    def test_precision_monotonicity_compute(self):
        acc = AcceleratorConfig("tiny64", 64, 8, 8, offchip_gbps=10000, noc_w_gbps=10000, noc_a_gbps=10000)
        cycles = [
            simulate(gemm(512, 512, 512, f, f), acc, OS).cycles
            for f in (FP16, FP8, FP6, FP4)
        ]
        assert all(a >= b for a, b in zip(cycles, cycles[1:]))


class TestBaselines:
    def test_upcast_rules(self):
        assert upcast_tensor_core(FP6) == FP8
        assert upcast_tensor_core(parse_format("e3m2")) == FP8
        assert upcast_tensor_core(parse_format("e5m2")) == FP16
        assert upcast_tensor_core(FP16) == FP16
        assert upcast_tensor_core(parse_format("int4")).render() == "int8"
        with pytest.raises(ConfigError):
            upcast_tensor_core(parse_format("e6m10"))

    def test_bit_fusion_widths(self):
        assert upcast_bit_fusion(FP6) == (8, 4)
        assert upcast_bit_fusion(FP16) == (16, 16)
        assert upcast_bit_fusion(FP4) == (4, 2)
        assert upcast_bit_fusion(parse_format("int4")) == (4, 4)
        with pytest.raises(ConfigError):
            upcast_bit_fusion(parse_format("e5m12"))

    def test_fp16_near_parity(self):
        acc = load_machine("mobile_a")
        g = gemm(2048, 2304, 768, FP16, FP16)
        flex = best_dataflow(g, acc)
        tc = simulate_baseline(g, acc, TENSOR_CORE)
        assert abs(1 - flex.cycles / tc.cycles) <= 0.10

    def test_fp6_pays_upcast_inflation(self):
        acc = load_machine("mobile_a")
        g = gemm(2048, 2304, 768, FP6, FP6)
        tc = simulate_baseline(g, acc, TENSOR_CORE)
        flex = best_dataflow(g, acc)
        assert flex.cycles < tc.cycles
        # storage inflation is exactly 8/6
        assert tc.dram_bits_read / simulate(g, acc, WS).dram_bits_read == pytest.approx(8 / 6)

    def test_fp4_native_on_fusion(self):
        acc = load_machine("mobile_a")
        g = gemm(2048, 2304, 768, FP4, FP4)
        bf = simulate_baseline(g, acc, BIT_FUSION)
        flex = simulate(g, acc, WS)
        assert flex.cycles <= bf.cycles
        assert bf.cycles <= simulate_baseline(g, acc, TENSOR_CORE).cycles

    def test_dominance_over_default_pairs(self):
        from anyprec.workloads import DEFAULT_SWEEP_PAIRS

        acc = load_machine("mobile_a")
        for pair in DEFAULT_SWEEP_PAIRS:
            a, w = (parse_format(t) for t in pair.split(":"))
            g = gemm(2048, 2304, 768, a, w, a, label=pair)
            assert best_dataflow(g, acc).cycles <= simulate_baseline(g, acc, TENSOR_CORE).cycles


class TestPackingAblation:
    def test_fp6_traffic_ratio_exact_when_tiles_match(self):
        acc = load_machine("mobile_a")
        packed, padded = packing_ablation(gemm(256, 256, 256), acc)
        r = (packed.dram_bits_read + packed.dram_bits_written) / (
            padded.dram_bits_read + padded.dram_bits_written
        )
        assert r == 6 / 8

    def test_fp8_no_delta(self):
        acc = load_machine("mobile_a")
        packed, padded = packing_ablation(gemm(512, 512, 512, FP8, FP8), acc)
        assert packed.cycles == padded.cycles
        assert packed.dram_bits_read == padded.dram_bits_read

    def test_memory_bound_improvement_band(self):
        # attention-context shape: DRAM-bound, single-tile reuse parity
        acc = load_machine("mobile_a")
        g = gemm(24576, 64, 2048, label="ctx")
        packed, padded = packing_ablation(g, acc)
        assert packed.breakdowns["cycles"]["dram"] == max(packed.breakdowns["cycles"].values())
        imp = 1 - packed.cycles / padded.cycles
        assert 0 < imp <= 0.30
