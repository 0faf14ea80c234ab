"""Bit-level functional model of one processing element.

Every stage operates on numpy bit arrays whose last axis is the register
width, so a single code path serves both one-shot calls (batch of 1) and
the exhaustive verification sweeps (large batches). Mantissa products are
built from bit-product primitives reduced by the compiled tree plan;
exponents travel through the segmented carry-chain adder; results encode
through truncation with saturation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bitpack import PackedBuffer
from .codec import ExactNumber, FormatSpec, Kind, ScalarValue, decode, encode
from .control import ControlBundle
from .errors import CapacityError, ControlError, ShapeError


@dataclass
class PERegisters:
    """Register state of one PE (batched along leading axes). Accumulator
    contents are held exactly and truncate once at tile finalization."""

    act_reg: np.ndarray
    wgt_reg: np.ndarray
    act_sign: np.ndarray | None = None
    act_exp: np.ndarray | None = None
    act_man: np.ndarray | None = None
    wgt_sign: np.ndarray | None = None
    wgt_exp: np.ndarray | None = None
    wgt_man: np.ndarray | None = None
    prim_reg: np.ndarray | None = None
    acc_reg: dict | None = None
    mx_scale_act: ScalarValue | None = None
    mx_scale_wgt: ScalarValue | None = None


def words_to_bits(words: np.ndarray, width: int) -> np.ndarray:
    """Expand packed words (..., n) into a bit register (..., n*width),
    each word MSB-first."""
    words = np.asarray(words, dtype=np.int64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    bits = (words[..., :, None] >> shifts) & 1
    return bits.reshape(*words.shape[:-1], words.shape[-1] * width).astype(np.int8)


def load_registers(bundle: ControlBundle, words_a, words_w) -> PERegisters:
    """Fill the packed act/wgt registers from element words (zero-padded to
    the element capacity)."""
    cfg = bundle.cfg
    words_a = np.asarray(words_a, dtype=np.int64)
    words_w = np.asarray(words_w, dtype=np.int64)
    if words_a.shape[-1] > bundle.n_acts or words_w.shape[-1] > bundle.n_wgts:
        raise CapacityError(
            f"load of {words_a.shape[-1]}x{words_w.shape[-1]} exceeds "
            f"{bundle.n_acts}x{bundle.n_wgts} element capacity"
        )

    def _reg(words, fmt, cap):
        pad = cap - words.shape[-1]
        if pad:
            words = np.concatenate(
                [words, np.zeros(words.shape[:-1] + (pad,), dtype=np.int64)], axis=-1
            )
        bits = words_to_bits(words, fmt.total_bits)
        tail = cfg.reg_width - bits.shape[-1]
        if tail > 0:
            bits = np.concatenate(
                [bits, np.zeros(bits.shape[:-1] + (tail,), dtype=np.int8)], axis=-1
            )
        return bits

    return PERegisters(
        act_reg=_reg(words_a, bundle.fmt_a, bundle.n_acts),
        wgt_reg=_reg(words_w, bundle.fmt_w, bundle.n_wgts),
    )


def separate(regs: PERegisters, bundle: ControlBundle) -> PERegisters:
    """Route packed register bits into the sign/exponent/mantissa registers
    per the compiled crossbar routes. No bit is lost or duplicated."""
    for name, reg in (("act", regs.act_reg), ("wgt", regs.wgt_reg)):
        route = bundle.sep_routes[name]
        dests = {"sign": [], "exp": [], "man": []}
        for i, r in enumerate(route):
            if r is not None:
                dests[r[0]].append(i)
        picked = {}
        for kind, idxs in dests.items():
            picked[kind] = (
                reg[..., np.asarray(idxs, dtype=np.intp)]
                if idxs
                else np.zeros(reg.shape[:-1] + (0,), dtype=reg.dtype)
            )
        if name == "act":
            regs.act_sign, regs.act_exp, regs.act_man = picked["sign"], picked["exp"], picked["man"]
        else:
            regs.wgt_sign, regs.wgt_exp, regs.wgt_man = picked["sign"], picked["exp"], picked["man"]
    return regs


def gen_primitives(regs: PERegisters, bundle: ControlBundle, pass_idx: int = 0) -> np.ndarray:
    """AND each routed activation/weight mantissa bit pair into the
    primitive register; unrouted bits stay 0."""
    prim = bundle.prim
    out = np.zeros(regs.act_reg.shape[:-1] + (bundle.cfg.prim_reg_bits,), dtype=np.int8)
    if prim.num_prims == 0:
        return out
    base_op = pass_idx * prim.ops_per_pass
    bm_a, bm_w = bundle.fmt_a.man_bits, bundle.fmt_w.man_bits
    a_idx, w_idx, slots = [], [], []
    for slot, r in enumerate(prim.routes):
        if r is None:
            continue
        o_local = slot // prim.num_prims
        o = base_op + o_local
        if o >= bundle.ops_per_load:
            continue
        a, w = o % prim.n_acts, o // prim.n_acts
        within = slot % prim.num_prims
        j, i = within // bm_a, within % bm_a
        a_idx.append(a * bm_a + (bm_a - 1 - i))
        w_idx.append(w * bm_w + (bm_w - 1 - j))
        slots.append(slot)
    if slots:
        out[..., np.asarray(slots, dtype=np.intp)] = (
            regs.act_man[..., np.asarray(a_idx, dtype=np.intp)]
            & regs.wgt_man[..., np.asarray(w_idx, dtype=np.intp)]
        )
    regs.prim_reg = out
    return out


def run_reduction_tree(prim_reg, bundle: ControlBundle) -> list:
    """Reduce primitive bits to one raw mantissa product per operation
    (the product of the stored fields, without implicit ones)."""
    plan = bundle.tree_plan
    if plan.leaf_count == 0:
        return [0] * len(plan.outputs)
    prim = np.asarray(prim_reg)
    if prim.shape[-1] < plan.leaf_count:
        raise ControlError("primitive register narrower than the tree plan")
    leaves = [prim[..., k].astype(np.int64) for k in range(plan.leaf_count)]
    return plan.evaluate(leaves)


def apply_implicit_one(raw, a, w, p: int, q: int):
    """Correct a raw field product to the full significand product
    (2^p + a) * (2^q + w): add the shifted weight, then the shifted
    activation together with the always-set top bit."""
    step1 = raw + (w << p)
    return step1 + (a << q) + (1 << (p + q))


def segmented_add(x_bits: np.ndarray, y_bits: np.ndarray, breaks) -> np.ndarray:
    """Ripple-carry add two bit vectors; carries stop at break positions."""
    x = np.asarray(x_bits, dtype=np.int8)
    y = np.asarray(y_bits, dtype=np.int8)
    if x.shape != y.shape or x.shape[-1] != len(breaks):
        raise ShapeError("operand/break widths disagree")
    out = np.zeros_like(x)
    carry = np.zeros(x.shape[:-1], dtype=np.int8)
    for i in range(x.shape[-1]):
        s = x[..., i] + y[..., i] + carry
        out[..., i] = s & 1
        carry = s >> 1
        if breaks[i]:
            carry = np.zeros_like(carry)
    return out


def _field_values(reg_bits: np.ndarray, width: int, count: int) -> np.ndarray:
    """Collect per-element field values from an MSB-first field register."""
    if width == 0:
        return np.zeros(reg_bits.shape[:-1] + (count,), dtype=np.int64)
    vals = reg_bits[..., : count * width].astype(np.int64)
    vals = vals.reshape(*reg_bits.shape[:-1], count, width)
    weights = 1 << np.arange(width - 1, -1, -1, dtype=np.int64)
    return (vals * weights).sum(axis=-1)


def add_exponents(regs: PERegisters, bundle: ControlBundle) -> np.ndarray:
    """Sum activation and weight exponent fields per operation through the
    segmented adder; returns (..., ops_per_load) sums."""
    if bundle.add_width == 0:
        return np.zeros(regs.act_reg.shape[:-1] + (bundle.ops_per_load,), dtype=np.int64)
    seg = bundle.add_width + 1
    segs_per_pass = bundle.cfg.exp_adder_bits // seg
    e_a = _field_values(regs.act_exp, bundle.fmt_a.exp_bits, bundle.n_acts)
    e_w = _field_values(regs.wgt_exp, bundle.fmt_w.exp_bits, bundle.n_wgts)
    ops = bundle.ops_per_load
    sums = np.zeros(regs.act_reg.shape[:-1] + (ops,), dtype=np.int64)
    shifts = np.arange(seg, dtype=np.int64)
    for start in range(0, ops, segs_per_pass):
        chunk = list(range(start, min(start + segs_per_pass, ops)))
        x = np.zeros(regs.act_reg.shape[:-1] + (bundle.cfg.exp_adder_bits,), dtype=np.int8)
        y = np.zeros_like(x)
        for local, o in enumerate(chunk):
            a, w = o % bundle.n_acts, o // bundle.n_acts
            for t in range(bundle.fmt_a.exp_bits):
                x[..., local * seg + t] = (e_a[..., a] >> t) & 1
            for t in range(bundle.fmt_w.exp_bits):
                y[..., local * seg + t] = (e_w[..., w] >> t) & 1
        out = segmented_add(x, y, bundle.adder_breaks)
        for local, o in enumerate(chunk):
            lane = out[..., local * seg : (local + 1) * seg].astype(np.int64)
            sums[..., o] = (lane << shifts).sum(axis=-1)
    return sums


@dataclass
class RawProducts:
    """Per-operation cross products of one register load, before encoding."""

    sig: np.ndarray       # full significand product (float) or |a*w| (int)
    exp_sum: np.ndarray   # biased exponent-field sum (float mode)
    sign: np.ndarray
    zero: np.ndarray
    n_acts: int
    n_wgts: int

    def op_index(self, a: int, w: int) -> int:
        return w * self.n_acts + a


def run_cross_products(bundle: ControlBundle, words_a, words_w) -> RawProducts:
    """Drive one register load through every multiply stage, producing all
    n_acts x n_wgts products."""
    words_a = np.asarray(words_a, dtype=np.int64)
    words_w = np.asarray(words_w, dtype=np.int64)
    regs = separate(load_registers(bundle, words_a, words_w), bundle)
    prim = bundle.prim
    ops = bundle.ops_per_load

    raws = [None] * ops
    if prim.num_prims:
        for p in range(prim.serialization_factor):
            bits = gen_primitives(regs, bundle, pass_idx=p)
            outs = run_reduction_tree(bits, bundle)
            for o_local, val in enumerate(outs):
                o = p * prim.ops_per_pass + o_local
                if o < ops:
                    raws[o] = val
    base = np.zeros(words_a.shape[:-1], dtype=np.int64)
    raws = [base.copy() if r is None or np.isscalar(r) and r == 0 else r for r in raws]

    bm_a, bm_w = bundle.fmt_a.man_bits, bundle.fmt_w.man_bits
    a_val = _field_values(regs.act_man, bm_a, bundle.n_acts)
    w_val = _field_values(regs.wgt_man, bm_w, bundle.n_wgts)
    if bundle.fmt_a.signed:
        s_a = regs.act_sign[..., : bundle.n_acts].astype(np.int64)
    else:
        s_a = np.zeros(words_a.shape[:-1] + (bundle.n_acts,), dtype=np.int64)
    if bundle.fmt_w.signed:
        s_w = regs.wgt_sign[..., : bundle.n_wgts].astype(np.int64)
    else:
        s_w = np.zeros(words_w.shape[:-1] + (bundle.n_wgts,), dtype=np.int64)

    a_of = np.arange(ops) % bundle.n_acts
    w_of = np.arange(ops) // bundle.n_acts

    sig = np.stack(raws, axis=-1)
    if not bundle.int_mode:
        sig = apply_implicit_one(
            sig, a_val[..., a_of], w_val[..., w_of], bm_a, bm_w
        )
        exp_sum = add_exponents(regs, bundle)
    else:
        exp_sum = np.zeros_like(sig)

    # zero operands bypass the implicit-1 machinery: an all-zero float word
    # (or a zero int magnitude) marks the product zero
    pad_a = bundle.n_acts - words_a.shape[-1]
    pad_w = bundle.n_wgts - words_w.shape[-1]
    if bundle.int_mode:
        za_head = a_val[..., : words_a.shape[-1]] == 0
        zw_head = w_val[..., : words_w.shape[-1]] == 0
    else:
        za_head = words_a == 0
        zw_head = words_w == 0
    za = np.concatenate(
        [za_head, np.ones(words_a.shape[:-1] + (pad_a,), dtype=bool)], axis=-1
    )
    zw = np.concatenate(
        [zw_head, np.ones(words_w.shape[:-1] + (pad_w,), dtype=bool)], axis=-1
    )
    zero = za[..., a_of] | zw[..., w_of]

    sign = s_a[..., a_of] ^ s_w[..., w_of]
    return RawProducts(sig=sig, exp_sum=exp_sum, sign=sign, zero=zero,
                       n_acts=bundle.n_acts, n_wgts=bundle.n_wgts)


def encode_words(sign: np.ndarray, sig: np.ndarray, exp2: np.ndarray, fmt: FormatSpec) -> np.ndarray:
    """Vectorized truncating encode of (-1)^sign * sig * 2^exp2 into words.

    Mirrors codec.encode for values with significands below 2^53."""
    sig = np.asarray(sig, dtype=np.int64)
    zero = sig == 0
    safe = np.where(zero, 1, sig)
    if fmt.kind is Kind.INT:
        mag = np.where(exp2 >= 0, safe << np.maximum(exp2, 0), safe >> np.maximum(-exp2, 0))
        mag = np.minimum(mag, fmt.man_max)
        neg_unsigned = (sign == 1) & ~fmt.signed
        word = np.where(
            fmt.signed, (sign << fmt.man_bits) | mag, mag
        )
        word = np.where(zero | neg_unsigned | (mag == 0), 0, word)
        return word
    k = np.frexp(safe.astype(np.float64))[1].astype(np.int64) - 1
    unbiased = k + exp2
    drop = k - fmt.man_bits
    man_hi = (safe >> np.maximum(drop, 0)) & fmt.man_max
    man_lo = (safe << np.maximum(-drop, 0)) - (1 << fmt.man_bits)
    man = np.where(drop >= 0, man_hi, man_lo)
    e_field = unbiased + fmt.bias_value
    word = (sign << (fmt.exp_bits + fmt.man_bits)) | (e_field << fmt.man_bits) | man
    sat = (sign << (fmt.exp_bits + fmt.man_bits)) | (fmt.exp_max << fmt.man_bits) | fmt.man_max
    word = np.where(e_field > fmt.exp_max, sat, word)
    word = np.where(e_field < 0, 0, word)
    return np.where(zero, 0, word)


def products_to_words(raw: RawProducts, bundle: ControlBundle, out_fmt: FormatSpec) -> np.ndarray:
    """Encode every raw product into the output format."""
    if bundle.int_mode:
        exp2 = np.zeros_like(raw.sig)
    else:
        bias_off = (
            bundle.fmt_a.bias_value
            + bundle.fmt_w.bias_value
            + bundle.fmt_a.man_bits
            + bundle.fmt_w.man_bits
        )
        exp2 = raw.exp_sum - bias_off
    sig = np.where(raw.zero, 0, raw.sig)
    return encode_words(raw.sign, sig, exp2, out_fmt)


def pe_multiply(
    act_buf: PackedBuffer,
    wgt_buf: PackedBuffer,
    bundle: ControlBundle,
    out_fmt: FormatSpec | None = None,
) -> list[ScalarValue]:
    """Elementwise multiply of two equal-length packed buffers (one register
    load each); element k equals encode(mul_ref(decode(a_k), decode(w_k)))."""
    out_fmt = out_fmt or bundle.out_fmt
    if act_buf.elem_count != wgt_buf.elem_count:
        raise ShapeError("elementwise multiply needs equal-length buffers")
    n = act_buf.elem_count
    if n == 0:
        return []
    words_a = np.asarray(act_buf.words(), dtype=np.int64)[None, :]
    words_w = np.asarray(wgt_buf.words(), dtype=np.int64)[None, :]
    raw = run_cross_products(bundle, words_a, words_w)
    words = products_to_words(raw, bundle, out_fmt)
    diag = [raw.op_index(k, k) for k in range(n)]
    return [decode(int(words[0, d]), out_fmt) for d in diag]


# --------------------------------------------------------------------------
# Accumulation path
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AlignedOperand:
    """A signed product significand aligned to its group's reference
    exponent by a non-negative right shift."""

    significand: int
    ref_exp: int
    delta: int


def normalize_exponents(exponents) -> tuple[int, list[int]]:
    """Max-reference alignment: returns (ref, deltas) with delta_i >= 0."""
    if len(exponents) == 0:
        return 0, []
    ref = max(exponents)
    return ref, [ref - e for e in exponents]


def align_group(products) -> list[AlignedOperand]:
    """Normalize one group of (sign, magnitude, exponent) products to its
    max exponent."""
    ref, deltas = normalize_exponents([e for _, _, e in products])
    return [
        AlignedOperand(-m if s else m, ref, d)
        for (s, m, _), d in zip(products, deltas)
    ]


def concat_shift(magnitudes, deltas, lane_width: int, widths=None):
    """Shift each magnitude right by its delta inside an alignment lane.

    Values enter left-aligned (shifted up by the lane headroom); bits that
    fall off the lane bottom are dropped and counted as precision-loss
    events. A delta of at least the lane width flushes the value to zero.
    Returns (shifted values, events)."""
    events = 0
    shifted = []
    for idx, (mag, delta) in enumerate(zip(magnitudes, deltas)):
        w = widths[idx] if widths is not None else max(1, int(mag).bit_length())
        head = max(lane_width - w, 0)
        v = int(mag) << head
        kept = 0 if delta >= lane_width else v >> delta
        if (kept << delta) != v:
            events += 1
        shifted.append(kept)
    return shifted, events


def accumulate(shifted, signs, ref_scale: int, out_fmt: FormatSpec):
    """Sum aligned significands and encode once.

    ref_scale is the power-of-two scale of the aligned integers (already
    including lane headroom). Returns (ScalarValue, saturated flag)."""
    total = 0
    for v, s in zip(shifted, signs):
        total += -v if s else v
    exact = ExactNumber(1 if total < 0 else 0, abs(total), ref_scale) if total else ExactNumber.zero()
    out = encode(exact, out_fmt)
    saturated = False
    if not exact.is_zero and out_fmt.kind is Kind.FLOAT:
        if out.exp_field == out_fmt.exp_max and out.man_field == out_fmt.man_max:
            saturated = abs(exact.to_fraction()) > abs(out.to_fraction())
    return out, saturated


@dataclass
class TileStats:
    precision_loss_events: int = 0
    saturations: int = 0


def _group_reduce(products, bundle: ControlBundle, stats: TileStats) -> ExactNumber:
    """Reduce one group of (sign, sig, exp_sum) products: normalize to the
    max exponent, align in lanes, sum exactly, return the exact group value."""
    live = [(s, m, e) for s, m, e in products if m]
    if not live:
        return ExactNumber.zero()
    if bundle.int_mode:
        total = sum(-m if s else m for s, m, _ in live)
        return ExactNumber.from_int(total)
    pw = bundle.fmt_a.man_bits + bundle.fmt_w.man_bits + 2
    lane = bundle.cst.lane_width
    head = lane - pw
    aligned = align_group(live)
    shifted, events = concat_shift(
        [abs(op.significand) for op in aligned],
        [op.delta for op in aligned],
        lane,
        widths=[pw] * len(aligned),
    )
    stats.precision_loss_events += events
    bias_off = (
        bundle.fmt_a.bias_value + bundle.fmt_w.bias_value
        + bundle.fmt_a.man_bits + bundle.fmt_w.man_bits
    )
    scale = (aligned[0].ref_exp - bias_off) - head
    total = 0
    for v, op in zip(shifted, aligned):
        total += -v if op.significand < 0 else v
    if total == 0:
        return ExactNumber.zero()
    return ExactNumber(1 if total < 0 else 0, abs(total), scale)


def pe_mac_tile(
    a_tile: PackedBuffer,
    w_tile: PackedBuffer,
    m: int,
    n: int,
    k: int,
    bundle: ControlBundle,
    out_fmt: FormatSpec | None = None,
    mx_scales: tuple[ScalarValue, ScalarValue] | None = None,
) -> tuple[PackedBuffer, TileStats]:
    """Outer-product GEMM tile: A is m x k (row-major), W is k x n
    (row-major); returns m x n outputs packed row-major.

    Products for one output are reduced in groups of the alignment-lane
    count; group values combine exactly and truncate once at finalization,
    where microscaling factors are also applied.
    """
    out_fmt = out_fmt or bundle.out_fmt
    if a_tile.elem_count != m * k:
        raise ShapeError(f"A tile holds {a_tile.elem_count} elements, needs {m * k}")
    if w_tile.elem_count != k * n:
        raise ShapeError(f"W tile holds {w_tile.elem_count} elements, needs {k * n}")
    aw = a_tile.words()
    ww = w_tile.words()
    stats = TileStats()

    per_out: dict[tuple[int, int], list] = {(i, j): [] for i in range(m) for j in range(n)}
    for kk in range(k):
        for m0 in range(0, m, bundle.n_acts):
            ma = min(bundle.n_acts, m - m0)
            col = [aw[(m0 + mi) * k + kk] for mi in range(ma)]
            for n0 in range(0, n, bundle.n_wgts):
                nw = min(bundle.n_wgts, n - n0)
                row = [ww[kk * n + (n0 + nj)] for nj in range(nw)]
                raw = run_cross_products(
                    bundle,
                    np.asarray(col, dtype=np.int64)[None, :],
                    np.asarray(row, dtype=np.int64)[None, :],
                )
                for mi in range(ma):
                    for nj in range(nw):
                        o = raw.op_index(mi, nj)
                        if bool(raw.zero[0, o]):
                            continue
                        per_out[(m0 + mi, n0 + nj)].append(
                            (int(raw.sign[0, o]), int(raw.sig[0, o]), int(raw.exp_sum[0, o]))
                        )

    scale = ExactNumber(0, 1, 0)
    if mx_scales is not None:
        scale = mx_scales[0].to_exact().mul(mx_scales[1].to_exact())

    group = bundle.cst.lanes_per_pass
    out_words = []
    for i in range(m):
        for j in range(n):
            prods = per_out[(i, j)]
            acc = ExactNumber.zero()
            for g0 in range(0, len(prods), group):
                acc = acc.add(_group_reduce(prods[g0 : g0 + group], bundle, stats))
            acc = acc.mul(scale)
            out = encode(acc, out_fmt)
            if not acc.is_zero and out_fmt.kind is Kind.FLOAT:
                if (
                    out.exp_field == out_fmt.exp_max
                    and out.man_field == out_fmt.man_max
                    and abs(acc.to_fraction()) > abs(out.to_fraction())
                ):
                    stats.saturations += 1
            out_words.append(out.word())
    return PackedBuffer.from_words(out_words, out_fmt), stats


# --------------------------------------------------------------------------
# Trace dump for differential debugging
# --------------------------------------------------------------------------


def trace_multiply(bundle: ControlBundle, word_a: int, word_w: int) -> str:
    """Per-stage register dump for one operand pair, deterministic text."""
    regs = separate(load_registers(
        bundle,
        np.asarray([[word_a]], dtype=np.int64),
        np.asarray([[word_w]], dtype=np.int64),
    ), bundle)
    lines = [
        f"act_word: {word_a:0{bundle.fmt_a.total_bits}b}",
        f"wgt_word: {word_w:0{bundle.fmt_w.total_bits}b}",
        "act_reg:  " + "".join(map(str, regs.act_reg[0].tolist())),
        "wgt_reg:  " + "".join(map(str, regs.wgt_reg[0].tolist())),
        "act s/e/m: "
        + "".join(map(str, regs.act_sign[0].tolist()))
        + " / " + "".join(map(str, regs.act_exp[0].tolist()))
        + " / " + "".join(map(str, regs.act_man[0].tolist())),
        "wgt s/e/m: "
        + "".join(map(str, regs.wgt_sign[0].tolist()))
        + " / " + "".join(map(str, regs.wgt_exp[0].tolist()))
        + " / " + "".join(map(str, regs.wgt_man[0].tolist())),
    ]
    bits = gen_primitives(regs, bundle, 0)
    lines.append("prim_reg: " + "".join(map(str, bits[0].tolist())))
    outs = run_reduction_tree(bits, bundle)
    lines.append("tree_out[0]: " + str(int(np.asarray(outs[0]).reshape(-1)[0])))
    raw = run_cross_products(
        bundle,
        np.asarray([[word_a]], dtype=np.int64),
        np.asarray([[word_w]], dtype=np.int64),
    )
    o = raw.op_index(0, 0)
    lines.append(f"significand: {int(raw.sig[0, o])}")
    lines.append(f"exp_sum: {int(raw.exp_sum[0, o])}")
    lines.append(f"sign: {int(raw.sign[0, o])}  zero: {bool(raw.zero[0, o])}")
    word = int(products_to_words(raw, bundle, bundle.out_fmt)[0, o])
    lines.append(f"out_word: {word:0{bundle.out_fmt.total_bits}b}")
    return "\n".join(lines) + "\n"
