"""Command-line harness: ``run`` experiments, ``approx`` fits and ``bound`` reports."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .analysis import (
    CSV_COLUMNS,
    heuristic_B_bound,
    heuristic_loss_bits,
    hetal_level_estimate,
    measure_errors,
    sample_inputs,
    summarize,
    theorem_bound,
)
from .errors import HEModelError
from .layout import PackingLayout
from .packing import softmax_instances
from .polyapprox import ApproxSpec, fit_to_bits
from .slotvm import VmConfig
from .softmax_core import SoftmaxParams, build_plans, softmax_exact

# levels kept below the usable range for the bootstrap circuit itself
BTS_RESERVE = 3
EXTRA_COLUMNS = ("bootstraps_main", "bootstraps_aux", "avg_abs_bits", "std_abs_bits")
ALGOS = {"a": "A", "b": "B", "naive": "naive"}


@dataclass(frozen=True)
class RunConfig:
    algo: str = "a"
    n: int = 16
    M: float = 32.0
    m: int = 1
    N0: int = 2**10
    p: int = 29
    p_bts: Optional[float] = 22.0
    top_level: int = 9
    trials: int = 100
    dist: str = "normal"
    seed: int = 0
    mode: str = "fixedpoint"
    out_path: str = "-"
    format: str = "csv"
    k: Optional[int] = None
    workers: int = 1

    def validate(self) -> None:
        if self.algo not in ALGOS:
            raise ValueError(f"algo must be one of {sorted(ALGOS)}")
        if self.n < 1 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two, got {self.n}")
        if self.mode not in ("exact", "fixedpoint"):
            raise ValueError("mode must be exact or fixedpoint")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be csv or json")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.top_level < 2:
            raise ValueError("top-level must be >= 2")
        self.layout()
        self.vm_config(0)

    def layout(self) -> PackingLayout:
        if self.m == 1:
            return PackingLayout.single(self.N0, self.n)
        return PackingLayout.many(self.N0, self.n, self.m)

    def vm_config(self, seed: int) -> VmConfig:
        return VmConfig(
            n_slots=self.N0,
            p=self.p,
            p_bts=self.p_bts,
            top_level=self.top_level + BTS_RESERVE,
            bts_floor=BTS_RESERVE,
            exact=self.mode == "exact",
            seed=seed,
        )

    def params(self) -> SoftmaxParams:
        return SoftmaxParams(M=self.M, n=self.n, k=self.k)


def _trial(cfg: RunConfig, index: int, child: np.random.SeedSequence) -> dict:
    layout = cfg.layout()
    input_seed, vm_seed = child.generate_state(2)
    x = sample_inputs(cfg.dist, cfg.M, cfg.n, layout.L, int(input_seed))
    params = cfg.params()
    vmc = cfg.vm_config(int(vm_seed))
    plans = build_plans(params, ALGOS[cfg.algo], vmc.exact, vmc.cycle_levels)
    y, ledger = softmax_instances(x, params, vmc, ALGOS[cfg.algo], cfg.m, plans)
    res = measure_errors(
        y, softmax_exact(x), seed=index, ledger=ledger,
        n=cfg.n, M=cfg.M, k=plans.k, p=cfg.p, p_bts=cfg.p_bts, algo=cfg.algo,
    )
    row = res.to_row()
    row["bootstraps_main"] = ledger.bootstraps_main
    row["bootstraps_aux"] = ledger.bootstraps_aux
    row["avg_abs_bits"] = ""
    row["std_abs_bits"] = ""
    row["_err_abs"] = res.err_abs
    return row


def _summary_row(rows: list, cfg: RunConfig) -> dict:
    abs_stats = summarize([r["_err_abs"] for r in rows])
    rel_worst = min(r["err_rel_bits"] for r in rows)
    out = {c: "" for c in CSV_COLUMNS + EXTRA_COLUMNS}
    out.update(
        seed="summary", n=cfg.n, M=cfg.M, k=rows[0]["k"], p=cfg.p, p_bts=cfg.p_bts, algo=cfg.algo,
        err_abs_bits=abs_stats["worst_bits"], err_rel_bits=rel_worst,
        avg_abs_bits=abs_stats["average_bits"], std_abs_bits=abs_stats["std_bits"],
    )
    for c in ("levels_main", "levels_aux", "ct_mults", "rotations", "bootstraps",
              "bootstraps_main", "bootstraps_aux"):
        out[c] = max(r[c] for r in rows)
    return out


def _fmt(v):
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("inf" if v > 0 else "-inf")
    return "" if v is None else str(v)


def _render(rows: list, fmt: str) -> str:
    cols = CSV_COLUMNS + EXTRA_COLUMNS
    if fmt == "json":
        clean = [
            {c: (None if isinstance(r[c], float) and not math.isfinite(r[c]) else r[c]) for c in cols}
            for r in rows
        ]
        return json.dumps(clean, indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in cols])
    return buf.getvalue()


def cmd_run(cfg: RunConfig) -> int:
    cfg.validate()
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.trials)
    rows, failed = [], 0
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            futures = [pool.submit(_trial, cfg, i, c) for i, c in enumerate(children)]
            outcomes = []
            for f in futures:
                try:
                    outcomes.append(f.result())
                except (HEModelError, ValueError) as exc:
                    outcomes.append(exc)
    else:
        outcomes = []
        for i, c in enumerate(children):
            try:
                outcomes.append(_trial(cfg, i, c))
            except (HEModelError, ValueError) as exc:
                outcomes.append(exc)
    for i, o in enumerate(outcomes):
        if isinstance(o, Exception):
            failed += 1
            print(f"trial {i} failed: {type(o).__name__}: {o}", file=sys.stderr)
        else:
            rows.append(o)
    if rows:
        rows.append(_summary_row(rows, cfg))
    text = _render(rows, cfg.format)
    if cfg.out_path == "-":
        sys.stdout.write(text)
    else:
        with open(cfg.out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return 0 if failed == 0 else 1


def _interval(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("interval must be 'a,b'")
    return float(parts[0]), float(parts[1])


def _p_bts(text: str):
    return None if text.lower() in ("none", "inf", "off") else float(text)


def cmd_approx(args) -> int:
    spec = ApproxSpec(args.func, args.interval, args.bits, weighted=args.weighted, power=args.power)
    poly = fit_to_bits(spec)
    print(f"degree {poly.degree}  depth {poly.depth}  verified_err {poly.verified_err:.6e}", file=sys.stderr)
    text = poly.to_json() + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return 0


def cmd_bound(args) -> int:
    b = theorem_bound(args.n, args.k, args.p)
    lines = [
        f"n={args.n} k={args.k} p={args.p} epsilon={b.epsilon:.6e}",
        f"theorem bound: {b.bound:.6e} ({b.marker})",
        f"A_k recurrence: {b.a_k:.6e}  closed form: {b.a_closed:.6e}",
    ]
    if args.n >= 2:
        lines.append(f"heuristic loss: {heuristic_loss_bits(args.k, args.n):.3f} bits")
        lines.append(f"amplification bound n*2^k: {heuristic_B_bound(args.k, args.n):g}")
        est = hetal_level_estimate(args.M, args.n)
        lines.append(
            f"max-subtraction levels (M={args.M:g}): single {est['single']:.2f}, "
            f"amortized {est['amortized']:.2f} [{est['label']}]"
        )
    print("\n".join(lines))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hesoftmax", description="Homomorphic Softmax experiments on a simulated CKKS model.")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run seeded Softmax trials and write one row per trial")
    r.add_argument("--algo", choices=sorted(ALGOS), default="a")
    r.add_argument("--n", type=int, default=16)
    r.add_argument("--M", type=float, default=32.0)
    r.add_argument("--m", "--ciphertexts", dest="m", type=int, default=1)
    r.add_argument("--N0", type=int, default=2**10)
    r.add_argument("--p", type=int, default=29)
    r.add_argument("--p-bts", "--p_bts", dest="p_bts", type=_p_bts, default=22.0)
    r.add_argument("--top-level", "--top_level", dest="top_level", type=int, default=9,
                   help="levels usable between bootstraps")
    r.add_argument("--trials", type=int, default=100)
    r.add_argument("--dist", choices=("normal", "uniform"), default="normal")
    r.add_argument("--seed", type=int, default=None, help="defaults to $HESOFTMAX_SEED, then 0")
    r.add_argument("--mode", choices=("exact", "fixedpoint"), default="fixedpoint")
    r.add_argument("--out-path", "--out_path", dest="out_path", default="-")
    r.add_argument("--format", choices=("csv", "json"), default="csv")
    r.add_argument("--k", type=int, default=None, help="override the number of rounds")
    r.add_argument("--workers", type=int, default=1)

    a = sub.add_parser("approx", help="fit a polynomial to a target accuracy")
    a.add_argument("--func", choices=("exp", "invsqrt"), required=True)
    a.add_argument("--interval", type=_interval, required=True)
    a.add_argument("--bits", type=float, required=True)
    a.add_argument("--weighted", action="store_true")
    a.add_argument("--power", type=float, default=0.5)
    a.add_argument("--out", default="-")

    b = sub.add_parser("bound", help="print the fixed-point error bound and estimates")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--k", type=int, required=True)
    b.add_argument("--p", type=float, required=True)
    b.add_argument("--M", type=float, default=256.0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            seed = args.seed
            if seed is None:
                seed = int(os.environ.get("HESOFTMAX_SEED", "0"))
            fields = {k: v for k, v in vars(args).items() if k in RunConfig.__dataclass_fields__}
            fields["seed"] = seed
            return cmd_run(RunConfig(**fields))
        if args.command == "approx":
            return cmd_approx(args)
        return cmd_bound(args)
    except (HEModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
