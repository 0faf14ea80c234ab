"""Command-line front end: validate, run, pack, ablate.

Exit codes: 0 success, 1 validation mismatch, 2 configuration error.
Sweep points may run on a thread pool; rows are canonically ordered
before writing so parallelism never changes the output bytes.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import archsim, bitpack, cost, validate, workloads
from .codec import parse_format
from .errors import AnyprecError, ConfigError, FormatError

SCHEMA_VERSION = "anyprec-csv-v1"
RUN_COLUMNS = (
    "model", "layer", "pair", "arch", "dataflow",
    "m", "n", "k",
    "cycles", "seconds", "macs", "macs_per_cycle", "pe_util",
    "dram_bits_read", "dram_bits_written", "noc_bits",
    "sram_read_bits", "sram_write_bits",
    "energy_j", "edp_js", "latency_vs_tensorcore",
)
ABLATE_COLUMNS = (
    "model", "layer", "pair", "layout", "dataflow",
    "cycles", "seconds", "dram_bits_read", "dram_bits_written",
    "noc_bits", "bound", "improvement_vs_padded", "latency_vs_tensorcore",
)


@dataclass
class RunManifest:
    machine: str
    models: list
    pairs: list
    dataflow: str = "best"
    energy_table: str = "default_synthetic"
    out_dir: str = "."
    seed: int = 0
    jobs: int = 1
    include_attention: bool = True

    def describe(self) -> str:
        return (
            f"machine={self.machine} models={','.join(self.models)} "
            f"pairs={','.join(self.pairs)} dataflow={self.dataflow} "
            f"energy={self.energy_table} seed={self.seed}"
        )


def _fmt_num(x) -> str:
    if isinstance(x, float):
        return f"{x:.9g}"
    return str(x)


def _simulate_point(machine, g, dataflow, table):
    if dataflow == "best":
        flex = archsim.best_dataflow(g, machine)
    else:
        flex = archsim.simulate(g, machine, dataflow)
    tc = archsim.simulate_baseline(g, machine, archsim.TENSOR_CORE)
    bf = archsim.simulate_baseline(g, machine, archsim.BIT_FUSION)
    rows = []
    for arch, rep in (("flexible", flex), ("tensorcore", tc), ("bitfusion", bf)):
        total, _ = cost.energy(rep, table)
        rows.append(
            {
                "arch": arch,
                "dataflow": rep.dataflow,
                "cycles": rep.cycles,
                "seconds": rep.seconds,
                "macs": rep.macs,
                "macs_per_cycle": rep.macs_per_cycle,
                "pe_util": rep.pe_util,
                "dram_bits_read": rep.dram_bits_read,
                "dram_bits_written": rep.dram_bits_written,
                "noc_bits": rep.noc_bits,
                "sram_read_bits": rep.sram_read_bits,
                "sram_write_bits": rep.sram_write_bits,
                "energy_j": total,
                "edp_js": cost.edp(rep.seconds, total),
                "norm": rep.cycles / tc.cycles,
            }
        )
    return rows


def cmd_run(manifest: RunManifest, stdout=None) -> int:
    stdout = stdout or sys.stdout
    machine = archsim.load_machine(manifest.machine)
    table = cost.load_energy_table(manifest.energy_table)
    points = []
    for model_name in manifest.models:
        model = workloads.load_model(model_name)
        for pa, pw, gemms in workloads.precision_sweep(
            model, manifest.pairs, include_attention=manifest.include_attention
        ):
            for g in gemms:
                points.append((model.name, f"{pa}:{pw}", g))

    def work(point):
        model_name, pair, g = point
        return (model_name, g.label, pair), g, _simulate_point(
            machine, g, manifest.dataflow, table
        )

    if manifest.jobs > 1:
        with ThreadPoolExecutor(max_workers=manifest.jobs) as pool:
            results = list(pool.map(work, points))
    else:
        results = [work(p) for p in points]
    results.sort(key=lambda kv: kv[0])

    out_dir = os.environ.get("ANYPREC_OUTPUT_DIR", manifest.out_dir)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "run.csv")
    lines = [
        f"# {SCHEMA_VERSION} {manifest.describe()}",
        ",".join(RUN_COLUMNS),
    ]
    for (model_name, label, pair), g_dims, rows in results:
        _, layer = label.split(".", 1)
        for row in rows:
            lines.append(
                ",".join(
                    [
                        model_name, layer, pair, row["arch"], row["dataflow"],
                        str(g_dims.m), str(g_dims.n), str(g_dims.k),
                        str(row["cycles"]), _fmt_num(row["seconds"]),
                        str(row["macs"]), _fmt_num(row["macs_per_cycle"]),
                        _fmt_num(row["pe_util"]),
                        str(row["dram_bits_read"]), str(row["dram_bits_written"]),
                        str(row["noc_bits"]), str(row["sram_read_bits"]),
                        str(row["sram_write_bits"]),
                        _fmt_num(row["energy_j"]), _fmt_num(row["edp_js"]),
                        _fmt_num(row["norm"]),
                    ]
                )
            )
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")

    flex_rows = [r for _, _, rows in results for r in rows if r["arch"] == "flexible"]
    if flex_rows:
        total_s = sum(r["seconds"] for r in flex_rows)
        total_e = sum(r["energy_j"] for r in flex_rows)
        print(
            f"{len(results)} points -> {path}\n"
            f"flexible total: {total_s:.6g} s, {total_e:.6g} J",
            file=stdout,
        )
    else:
        print(f"0 points -> {path}", file=stdout)
    return 0


def cmd_ablate(manifest: RunManifest, stdout=None) -> int:
    stdout = stdout or sys.stdout
    machine = archsim.load_machine(manifest.machine)
    rows = []
    for model_name in manifest.models:
        model = workloads.load_model(model_name)
        for pa, pw, gemms in workloads.precision_sweep(
            model, manifest.pairs, include_attention=manifest.include_attention
        ):
            for g in gemms:
                df = manifest.dataflow if manifest.dataflow != "best" else archsim.WS
                packed, padded = archsim.packing_ablation(g, machine, df)
                tc = archsim.simulate_baseline(g, machine, archsim.TENSOR_CORE)
                imp = 1 - packed.cycles / padded.cycles
                for layout, rep in (("packed", packed), ("padded", padded)):
                    bound = max(
                        rep.breakdowns["cycles"],
                        key=lambda k: rep.breakdowns["cycles"][k],
                    )
                    rows.append(
                        [
                            model.name, g.label.split(".", 1)[1], f"{pa}:{pw}",
                            layout, rep.dataflow, str(rep.cycles),
                            _fmt_num(rep.seconds), str(rep.dram_bits_read),
                            str(rep.dram_bits_written), str(rep.noc_bits),
                            bound, _fmt_num(imp if layout == "packed" else 0.0),
                            _fmt_num(rep.cycles / tc.cycles),
                        ]
                    )
    rows.sort()
    out_dir = os.environ.get("ANYPREC_OUTPUT_DIR", manifest.out_dir)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "ablate.csv")
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# {SCHEMA_VERSION} ablation {manifest.describe()}\n")
        fh.write(",".join(ABLATE_COLUMNS) + "\n")
        for r in rows:
            fh.write(",".join(r) + "\n")
    print(f"{len(rows)} rows -> {path}", file=stdout)
    return 0


def cmd_validate(scope: str, max_bits: int, samples: int, seed: int, stdout=None) -> int:
    stdout = stdout or sys.stdout
    failures = 0

    def report(name, mismatches, cases, detail=None):
        nonlocal failures
        status = "ok" if mismatches == 0 else "FAIL"
        print(f"{name}: {mismatches} mismatches / {cases} cases [{status}]", file=stdout)
        if mismatches:
            failures += 1
            if detail:
                print(detail, file=stdout)

    if scope in ("codec", "all"):
        from .codec import decode, encode
        cases = mism = 0
        for fmt in validate.float_formats(min(max_bits, 12)):
            for word in range(1 << fmt.total_bits):
                cases += 1
                if encode(decode(word, fmt).to_exact(), fmt).word() != word:
                    mism += 1
        report("codec round-trip", mism, cases)

    if scope in ("pack", "all"):
        import random as _random
        rng = _random.Random(seed)
        fp6 = parse_format("e2m3")
        cases = mism = 0
        idx = [bitpack.packed_index(i, 8, 6) for i in range(8, 14)]
        cases += 1
        if idx != list(range(6, 12)):
            mism += 1
        for _ in range(1000):
            n = rng.randrange(0, 64)
            words = [rng.randrange(64) for _ in range(n)]
            stream = bitpack.PaddedStream.from_elements(words, fp6, 8)
            buf = bitpack.pack(stream)
            cases += 1
            if bitpack.unpack(buf, 8).words != stream.words:
                mism += 1
        report("packing round-trip", mism, cases)

    if scope in ("pe", "all"):
        checked = validate.oracle_self_check(500, seed)
        report("oracle self-check", 0, checked)
        detail = None
        cases = mism = 0
        for r in validate.sweep_all_pairs(
            max_bits=max_bits, exhaustive_bits=min(8, max_bits), samples=samples, seed=seed
        ):
            cases += r.cases
            mism += r.mismatches
            if r.first_failure and detail is None:
                detail = r.first_failure
        report("datapath vs reference", mism, cases, detail)

    return 1 if failures else 0


def cmd_pack(args) -> int:
    fmt = parse_format(args.fmt)
    if args.container % 8:
        raise FormatError("file packing needs a byte-aligned container")
    cbytes = args.container // 8
    if args.unpack:
        buf = bitpack.read_packed_file(args.input)
        stream = bitpack.unpack(buf, args.container)
        with open(args.output, "wb") as fh:
            for w in stream.words:
                fh.write(w.to_bytes(cbytes, "big"))
        print(f"{buf.elem_count} elements -> {args.output}")
    else:
        with open(args.input, "rb") as fh:
            raw = fh.read()
        if len(raw) % cbytes:
            raise FormatError(f"input not a multiple of {cbytes}-byte containers")
        words = [
            int.from_bytes(raw[i : i + cbytes], "big") for i in range(0, len(raw), cbytes)
        ]
        stream = bitpack.PaddedStream(words, args.container, fmt)
        buf = bitpack.pack(stream, args.start_idx)
        bitpack.write_packed_file(args.output, buf)
        print(f"{buf.elem_count} elements -> {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="anyprec",
        description="Flexible-precision accelerator functional model and cost model",
    )
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="datapath-vs-reference sweeps")
    v.add_argument("--scope", choices=["codec", "pe", "pack", "all"], default="all")
    v.add_argument("--max-bits", type=int, default=12)
    v.add_argument("--samples", type=int, default=10_000)
    v.add_argument("--seed", type=int, default=0)

    r = sub.add_parser("run", help="simulate models across machines and precisions")
    r.add_argument("--machine", default="mobile_a")
    r.add_argument("--models", nargs="+", default=["bert_base"])
    r.add_argument("--pairs", default=",".join(workloads.DEFAULT_SWEEP_PAIRS))
    r.add_argument("--dataflow", choices=["ws", "os", "best"], default="best")
    r.add_argument("--energy-table", default="default_synthetic")
    r.add_argument("--out", default=".")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--no-attention", action="store_true")

    a = sub.add_parser("ablate", help="packed vs padded layout comparison")
    a.add_argument("--machine", default="mobile_a")
    a.add_argument("--models", nargs="+", default=["bert_base"])
    a.add_argument("--pairs", default="e2m3:e2m3")
    a.add_argument("--dataflow", choices=["ws", "os"], default="ws")
    a.add_argument("--out", default=".")
    a.add_argument("--no-attention", action="store_true")

    k = sub.add_parser("pack", help="pack or unpack a container-padded file")
    k.add_argument("input")
    k.add_argument("output")
    k.add_argument("--fmt", required=True)
    k.add_argument("--container", type=int, default=8)
    k.add_argument("--start-idx", type=int, default=0)
    k.add_argument("--unpack", action="store_true")
    return p


def _manifest_from_args(args) -> RunManifest:
    pairs = [s for s in args.pairs.split(",") if s]
    return RunManifest(
        machine=args.machine,
        models=args.models,
        pairs=pairs,
        dataflow=args.dataflow,
        energy_table=getattr(args, "energy_table", "default_synthetic"),
        out_dir=args.out,
        seed=getattr(args, "seed", 0),
        jobs=getattr(args, "jobs", 1),
        include_attention=not getattr(args, "no_attention", False),
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return cmd_validate(args.scope, args.max_bits, args.samples, args.seed)
        if args.command == "run":
            return cmd_run(_manifest_from_args(args))
        if args.command == "ablate":
            return cmd_ablate(_manifest_from_args(args))
        if args.command == "pack":
            return cmd_pack(args)
    except (ConfigError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AnyprecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
