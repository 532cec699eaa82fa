# Command-line runner: execute scenarios (optionally sweeping seeds), emit
# metrics CSV and property reports, measure fault-free message-count scaling,
# and run the crypto microbenchmarks.

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor

from . import bench
from .simnet import Scenario, SimConfig, assert_properties, load_scenario, run_scenario

CSV_COLUMNS = [
    "scenario",
    "kind",
    "n",
    "t",
    "seed",
    "gst",
    "delta",
    "adversary",
    "final_step",
    "total_messages",
    "total_bytes",
    "decide_step",
    "vector_size",
    "properties_ok",
    "msg_init",
    "msg_echo",
    "msg_ready",
    "msg_est",
    "msg_aux",
    "msg_coord",
    "msg_ones",
    "msg_decs",
]

_KIND_COLS = {
    "msg_init": "InitMsg",
    "msg_echo": "EchoMsg",
    "msg_ready": "ReadyMsg",
    "msg_est": "EstMsg",
    "msg_aux": "AuxMsg",
    "msg_coord": "CoordMsg",
    "msg_ones": "OnesMsg",
    "msg_decs": "DecsMsg",
}


def metrics_row(path, result, report) -> dict:
    sc = result.scenario
    cfg = sc.config
    outs = result.outputs
    honest = result.honest_pids()
    decide_step = ""
    vector_size = ""
    if sc.kind == "aarbp":
        steps = [s for pid in honest for s in outs[pid]["deliver_steps"].values()]
        decide_step = max(steps) if steps else ""
        vector_size = max((len(outs[pid]["delivered"]) for pid in honest), default="")
    elif sc.kind == "bincons":
        steps = [outs[pid]["decide_step"] for pid in honest if "decide_step" in outs[pid]]
        decide_step = max(steps) if steps else ""
    elif sc.kind == "avcp":
        steps = [outs[pid]["vector_step"] for pid in honest if "vector_step" in outs[pid]]
        decide_step = max(steps) if steps else ""
        vector_size = len(outs[honest[0]].get("vector", ()))
    elif sc.kind == "election":
        steps = [outs[pid]["ballots_step"] for pid in honest if "ballots_step" in outs[pid]]
        decide_step = max(steps) if steps else ""
        vector_size = len(outs[honest[0]].get("ballots", ()))
    row = {
        "scenario": path,
        "kind": sc.kind,
        "n": cfg.n,
        "t": cfg.t,
        "seed": cfg.seed,
        "gst": cfg.gst,
        "delta": cfg.delta,
        "adversary": cfg.adversary,
        "final_step": result.final_step,
        "total_messages": result.sim.total_messages,
        "total_bytes": result.sim.total_bytes,
        "decide_step": decide_step,
        "vector_size": vector_size,
        "properties_ok": int(report.all_ok) if report is not None else "",
    }
    for col, kind in _KIND_COLS.items():
        row[col] = result.sim.kind_counts.get(kind, 0)
    return row


def _write_csv(rows, out):
    fh = sys.stdout if out in (None, "-") else open(out, "w")
    try:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(str(row.get(c, "")) for c in CSV_COLUMNS) + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()


def _parse_seeds(args):
    if args.seeds:
        lo, _, hi = args.seeds.partition("..")
        return range(int(lo), int(hi) + 1)
    return [args.seed]


def _run_one_seed(path: str, seed: int, check: bool, want_trace: bool):
    scenario = load_scenario(path, seed_override=seed)
    result = run_scenario(scenario, record_trace=want_trace)
    report = assert_properties(result) if check else None
    row = metrics_row(path, result, report)
    trace = result.sim.export_trace() if want_trace else None
    return seed, row, report.all_ok if report else True, str(report) if report else "", trace


def cmd_run(args) -> int:
    try:
        load_scenario(args.scenario)
    except (OSError, KeyError, ValueError) as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    seeds = list(_parse_seeds(args))
    want_trace = bool(args.trace_out) and len(seeds) == 1
    if args.jobs > 1 and len(seeds) > 1:
        # Each worker owns its simulation wholly; results are re-ordered by
        # seed so the sweep output is independent of scheduling.
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(
                pool.map(
                    _run_one_seed,
                    [args.scenario] * len(seeds),
                    seeds,
                    [args.check_properties] * len(seeds),
                    [False] * len(seeds),
                )
            )
        results.sort(key=lambda item: item[0])
    else:
        results = [_run_one_seed(args.scenario, seed, args.check_properties, want_trace) for seed in seeds]
    rows = []
    all_ok = True
    for seed, row, ok, report_text, trace in results:
        if args.check_properties:
            print(f"seed {seed}:")
            print("  " + report_text.replace("\n", "\n  "))
            all_ok &= ok
        rows.append(row)
        if trace is not None and args.trace_out:
            with open(args.trace_out, "w") as fh:
                fh.write(trace)
    _write_csv(rows, args.out or "-")
    return 0 if all_ok else 1


def cmd_scaling(args) -> int:
    sizes = [int(x) for x in args.n.split(",")]
    rows = []
    for n in sizes:
        t = (n - 1) // 3 if args.t == "max" else int(args.t)
        cfg = SimConfig(n=n, t=t, seed=args.seed)
        result = run_scenario(Scenario(kind=args.kind, config=cfg))
        rows.append((n, t, result.sim.total_messages, result.sim.total_bytes))
        print(f"n={n} t={t} faults=0 messages={rows[-1][2]} bytes={rows[-1][3]}")
    if len(rows) >= 2:
        base_n, _, base_m, _ = rows[0]
        for n, _, m, _ in rows[1:]:
            print(f"ratio {n}/{base_n}: messages x{m / base_m:.2f} (cubic would be x{(n / base_n) ** 3:.2f})")
    return 0


def cmd_bench(args) -> int:
    sizes = [int(x) for x in args.n.split(",")] if args.n else [10, 30, 50, 70, 90, 110]
    op = args.bench
    if op in ("trs_sign", "trs_verify", "trs"):
        rows = bench.bench_trs(sizes, iters=args.iters)
        print("n,sign_ms,verify_ms")
        for row in rows:
            print(f"{row['n']},{row['sign_ns'] / 1e6:.3f},{row['verify_ns'] / 1e6:.3f}")
        for op_name in ("sign_ns", "verify_ns"):
            slope, intercept, r2 = bench.linear_fit([r["n"] for r in rows], [r[op_name] for r in rows])
            print(f"# {op_name} linear fit: slope={slope / 1e6:.4f} ms/member, r2={r2:.4f}")
    elif op == "trs_trace":
        rows = bench.bench_trs_trace(sizes, iters=max(3, args.iters // 3))
        print("n,verify_trace_ms")
        for row in rows:
            print(f"{row['n']},{row['verify_trace_ns'] / 1e6:.3f}")
    elif op == "tenc":
        table = bench.bench_tenc(iters=args.iters)
        print("op,ms")
        for key, ns in table.items():
            print(f"{key[:-3]},{ns / 1e6:.3f}")
    elif op == "combine":
        ks = [int(x) for x in args.n.split(",")] if args.n else [4, 8, 16, 24, 34]
        rows = bench.bench_combine(ks, iters=max(3, args.iters // 3))
        print("k,combine_ms")
        for row in rows:
            print(f"{row['k']},{row['combine_ns'] / 1e6:.3f}")
    else:
        print(f"unknown bench op {op!r}", file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ringvote", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a scenario file")
    run_p.add_argument("--scenario", required=True)
    run_p.add_argument("--seed", type=int, default=1)
    run_p.add_argument("--seeds", help="inclusive range A..B, overrides --seed")
    run_p.add_argument("--out", help="metrics CSV path ('-' for stdout)")
    run_p.add_argument("--trace-out", help="write the event trace to this path")
    run_p.add_argument(
        "--check-properties",
        type=lambda v: v.lower() not in ("0", "false", "no"),
        default=True,
        metavar="BOOL",
    )
    run_p.add_argument("--jobs", type=int, default=1, help="parallel workers for seed sweeps")
    run_p.set_defaults(func=cmd_run)

    scale_p = sub.add_parser("scaling", help="fault-free message-count scaling")
    scale_p.add_argument("--n", required=True, help="comma-separated sizes, e.g. 4,8")
    scale_p.add_argument("--t", default="max", help="'max' or an integer")
    scale_p.add_argument("--kind", default="avcp", choices=["aarbp", "avcp", "election"])
    scale_p.add_argument("--seed", type=int, default=1)
    scale_p.set_defaults(func=cmd_scaling)

    bench_p = sub.add_parser("bench", help="crypto microbenchmarks")
    bench_p.add_argument("--bench", required=True, help="trs | trs_trace | tenc | combine")
    bench_p.add_argument("--n", help="comma-separated ring sizes / thresholds")
    bench_p.add_argument("--iters", type=int, default=30)
    bench_p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
