from __future__ import annotations

import argparse
import logging
import math
from dataclasses import replace
from importlib import resources
from pathlib import Path
from typing import Callable, Dict, List, Sequence

import numpy as np
import pandas as pd

from .core.ablation import DEFAULT_SEEDS, run_ablation
from .core.attention import attention_param_count
from .core.config import VARIANTS, ModelConfig, RunSpec, load_run_spec
from .core.errors import ScvfpError
from .core.gradcheck import model_grad_check, tiny_model_config
from .core.model import param_count, rollout
from .core.objective import PSNR_PEAK, error_map
from .core.report import metric_report_frame, step_cosine_frame, write_csv, write_pgm
from .core.synthetic import SyntheticConfig, generate_synthetic
from .core.tensor import inject_backward_fault
from .core.trainer import evaluate, predict_windows, splits_for, train
from .core.windows import SPLIT_NAMES
from .storage.checkpoint_format import load_checkpoint
from .storage.csv_import import import_csv_files
from .storage.eseq_format import write_eseq
from .storage.local_strategy import LocalStrategy
from .storage.strategy_loader import load_sequences
from .utils.logging_setup import configure_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_ERROR = 2
ERROR_MAP_WINDOWS = 8
FIXTURES = {"benchmark": "benchmark_mse_psnr.csv", "ablation": "ablation_mse_psnr.csv"}


def _setup_logging(verbose: bool, log_file: Path | None) -> None:
    configure_logging("DEBUG" if verbose else "INFO", log_file=log_file)


def _data_path(arg: Path | None, spec: RunSpec) -> Path:
    if arg is not None:
        return arg
    if spec.data.path:
        return Path(spec.data.path)
    raise ValueError("no data given: pass --data or set data.path in the run config")


def _spec_with_data(spec: RunSpec, path: Path) -> RunSpec:
    return replace(spec, data=replace(spec.data, path=str(path)))


def cmd_gen_data(args: argparse.Namespace) -> int:
    cfg = SyntheticConfig(
        d=args.d, num_sequences=args.sequences, length=args.length,
        sigma=args.sigma, seed=args.seed, theta_max=args.theta_max,
    )
    digest = write_eseq(generate_synthetic(cfg), args.out)
    print(digest)
    return EXIT_OK


def cmd_import_csv(args: argparse.Namespace) -> int:
    paths: List[Path] = []
    for item in args.inputs:
        paths.extend(LocalStrategy({"base_path": str(item)}).csv_files())
    digest = write_eseq(import_csv_files(paths), args.out)
    print(digest)
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    spec = load_run_spec(args.config)
    path = _data_path(args.data, spec)
    spec = _spec_with_data(spec, path)
    result = train(spec, load_sequences(path), out_dir=args.out_dir)
    last = result.history.records[-1] if result.history.records else None
    if last is not None:
        print(f"final val_mse={last.val_mse:.6g} val_psnr={last.val_psnr:.4f}")
    print(f"runspec sha256={spec.sha256()}")
    return EXIT_OK


def _grid_cols(d: int) -> int:
    """Largest divisor of d not above sqrt(d)."""
    return max(c for c in range(1, math.isqrt(d) + 1) if d % c == 0)


def cmd_eval(args: argparse.Namespace) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    spec = ckpt.spec
    data = load_sequences(_data_path(args.data, spec))
    windows = splits_for(spec, data).window_set(args.split)
    if windows is None:
        logger.error("Split '%s' has no windows", args.split)
        return EXIT_ERROR
    batch = spec.train.eval_batch or spec.train.batch
    report = evaluate(ckpt.state, spec.model, windows, data, spec.train.rollout_steps, batch)
    digest = spec.sha256()
    write_csv(metric_report_frame(report, args.split), args.report, digest)
    stem = args.report.with_suffix("")
    write_csv(step_cosine_frame(report.step_cosines), Path(f"{stem}_steps.csv"), digest)

    cols = args.grid_cols or _grid_cols(spec.model.d)
    first = windows.take(range(min(ERROR_MAP_WINDOWS, len(windows))))
    preds = predict_windows(ckpt.state, spec.model, first, batch)
    for i, (label, pred) in enumerate(zip(first.labels, preds)):
        _, image = error_map(label, pred, cols)
        write_pgm(Path(f"{stem}_error_maps") / f"window_{i:02d}.pgm", image)
    print(
        f"{args.split}: windows={report.windows} mse={report.mse:.6g} psnr={report.psnr:.4f} "
        f"cosine={report.mean_cosine:.4f} persistence_mse={report.persistence_mse:.6g}"
    )
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    spec = load_run_spec(args.config)
    path = _data_path(args.data, spec)
    spec = _spec_with_data(spec, path)
    result = run_ablation(spec, load_sequences(path), seeds=args.seeds, out_dir=args.out_dir)
    print(result.summary.to_string(index=False))
    return EXIT_OK


def cmd_rollout(args: argparse.Namespace) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    spec = ckpt.spec
    data = load_sequences(_data_path(args.data, spec))
    windows = splits_for(spec, data).window_set(args.split)
    if windows is None or not 0 <= args.window < len(windows):
        logger.error("Split '%s' has no window %d", args.split, args.window)
        return EXIT_ERROR
    preds = rollout(windows.inputs[args.window], args.steps, ckpt.state, spec.model)
    frame = pd.DataFrame(preds, columns=[f"dim_{j}" for j in range(spec.model.d)])
    write_csv(frame, args.out, spec.sha256())
    print(f"wrote {preds.shape[0]}x{preds.shape[1]} rollout to {args.out}")
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    overrides: Dict[str, object] = {}
    if args.config is not None:
        model = load_run_spec(args.config).model
        overrides = {
            "d": model.d, "seq_len": model.seq_len, "heads": model.heads, "d_head": model.d_head,
            "blocks": model.blocks, "ffn_width": model.ffn_width, "head_hidden": model.head_hidden,
        }
    variants = VARIANTS if args.variant == "both" else (args.variant,)
    inject_backward_fault(args.break_backward)
    worst = 0.0
    try:
        for variant in variants:
            report = model_grad_check(tiny_model_config(variant, **overrides), seed=args.seed)
            print(f"[{variant}] checked={report.checked} skipped={report.skipped}")
            for name, err in report.per_tensor.items():
                print(f"  {name:<28} {err:.3e}")
            if report.worst is not None:
                print(f"  worst: {report.worst[0]}{list(report.worst[1])} rel_error={report.max_rel_error:.3e}")
            worst = max(worst, report.max_rel_error)
    finally:
        inject_backward_fault(False)
    passed = worst < args.tolerance
    print(f"max rel error {worst:.3e} {'<' if passed else '>='} tolerance {args.tolerance:g}")
    return EXIT_OK if passed else EXIT_VERIFY_FAILED


def params_report(model: ModelConfig) -> str:
    lines = []
    totals = {}
    for variant in VARIANTS:
        if variant == "mhsa_baseline" and model.d % model.heads != 0:
            lines.append("mhsa_baseline: heads do not divide d, skipped")
            continue
        cfg = replace(model, variant=variant)
        table = param_count(cfg)
        totals[variant] = table.total
        lines.append(f"{variant}:")
        lines.extend(f"  {name:<18} {count:>14,}" for name, count in table.rows)
        lines.append(f"  {'total':<18} {table.total:>14,}")
    if len(totals) == 2:
        ratio = totals["scmhsa"] / totals["mhsa_baseline"]
        lines.append(f"model ratio scmhsa/mhsa_baseline = {ratio:.3f}")
        sc = attention_param_count("scmhsa", model.d, model.heads, replace(model, variant="scmhsa").head_width)
        base = attention_param_count("mhsa_baseline", model.d, model.heads, model.d // model.heads)
        lines.append(
            f"per-block attention ratio = {sc / base:.4f} "
            f"(4N/(N+3) = {4 * model.heads / (model.heads + 3):.4f})"
        )
    return "\n".join(lines)


def cmd_params(args: argparse.Namespace) -> int:
    print(params_report(load_run_spec(args.config).model))
    return EXIT_OK


def psnr_deviations(table: pd.DataFrame) -> pd.Series:
    mse = table["mse"].astype(float)
    if (mse <= 0).any():
        raise ValueError("every mse must be > 0")
    return (10.0 * np.log10(PSNR_PEAK ** 2 / mse) - table["psnr"].astype(float)).abs()


def _fixture_tables(name: str) -> List[pd.DataFrame]:
    names = list(FIXTURES) if name == "all" else [name]
    root = resources.files("scvfp.fixtures")
    tables = []
    for key in names:
        with resources.as_file(root / FIXTURES[key]) as path:
            tables.append(pd.read_csv(path))
    return tables


def cmd_verify_psnr_table(args: argparse.Namespace) -> int:
    if args.csv is not None:
        tables = [pd.read_csv(args.csv, comment="#")]
    else:
        tables = _fixture_tables(args.fixture)
    table = pd.concat(tables, ignore_index=True)
    missing = {"mse", "psnr"} - set(table.columns)
    if missing:
        raise ValueError(f"CSV is missing columns {sorted(missing)}")
    table["deviation"] = psnr_deviations(table)
    outlier = table["known_outlier"].astype(bool) if "known_outlier" in table else pd.Series(False, index=table.index)
    checked = table if args.strict else table[~outlier]
    worst = float(checked["deviation"].max()) if len(checked) else 0.0
    print(f"rows={len(table)} checked={len(checked)} max |10*log10(255^2/mse) - psnr| = {worst:.5f} dB")
    for _, row in table[outlier].iterrows():
        print(f"  known outlier: {row.get('method', '?')} / {row.get('dataset', '?')} deviation={row['deviation']:.4f} dB")
    passed = worst <= args.tolerance
    return EXIT_OK if passed else EXIT_VERIFY_FAILED


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    p = argparse.ArgumentParser(prog="scvfp", description="Next-frame embedding prediction lab")
    p.add_argument("--verbose", action="store_true", help="Verbose logging")
    p.add_argument("--log-file", type=Path, help="Also write DEBUG logs to this file")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="Write a synthetic ESEQ1 file")
    g.add_argument("--out", type=Path, required=True)
    g.add_argument("--d", type=int, default=32)
    g.add_argument("--sequences", type=int, default=64)
    g.add_argument("--length", type=int, default=128)
    g.add_argument("--sigma", type=float, default=0.05)
    g.add_argument("--seed", type=int, default=2023)
    g.add_argument("--theta-max", type=float, default=0.3)
    g.set_defaults(func=cmd_gen_data)

    i = sub.add_parser("import-csv", help="Convert CSV embedding sequences to ESEQ1")
    i.add_argument("inputs", type=Path, nargs="+", help="CSV files or directories of CSVs")
    i.add_argument("--out", type=Path, required=True)
    i.set_defaults(func=cmd_import_csv)

    t = sub.add_parser("train", help="Train a model")
    t.add_argument("--config", type=Path)
    t.add_argument("--data", type=Path)
    t.add_argument("--out-dir", type=Path, required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="Evaluate a checkpoint on one split")
    e.add_argument("--checkpoint", type=Path, required=True)
    e.add_argument("--data", type=Path)
    e.add_argument("--split", choices=SPLIT_NAMES, default="test")
    e.add_argument("--report", type=Path, required=True)
    e.add_argument("--grid-cols", type=int, help="Error-map width (default: divisor of d near sqrt(d))")
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("ablate", help="Run the variant x SSL ablation grid")
    a.add_argument("--config", type=Path)
    a.add_argument("--data", type=Path)
    a.add_argument("--out-dir", type=Path, required=True)
    a.add_argument("--seeds", type=int, nargs="+", default=list(DEFAULT_SEEDS))
    a.set_defaults(func=cmd_ablate)

    r = sub.add_parser("rollout", help="Autoregressive multi-step prediction from one window")
    r.add_argument("--checkpoint", type=Path, required=True)
    r.add_argument("--data", type=Path)
    r.add_argument("--steps", type=int, default=5)
    r.add_argument("--split", choices=SPLIT_NAMES, default="test")
    r.add_argument("--window", type=int, default=0)
    r.add_argument("--out", type=Path, required=True)
    r.set_defaults(func=cmd_rollout)

    c = sub.add_parser("gradcheck", help="Finite-difference check of every model gradient")
    c.add_argument("--config", type=Path, help="Take model extents from this run config")
    c.add_argument("--tolerance", type=float, default=1e-4)
    c.add_argument("--variant", choices=(*VARIANTS, "both"), default="both")
    c.add_argument("--seed", type=int, default=2023)
    c.add_argument("--break-backward", action="store_true", help=argparse.SUPPRESS)
    c.set_defaults(func=cmd_gradcheck)

    m = sub.add_parser("params", help="Parameter counts for both attention variants")
    m.add_argument("--config", type=Path)
    m.set_defaults(func=cmd_params)

    v = sub.add_parser("verify-psnr-table", help="Check MSE/PSNR pairs against 10*log10(255^2/mse)")
    v.add_argument("--csv", type=Path, help="CSV with mse and psnr columns")
    v.add_argument("--fixture", choices=(*FIXTURES, "all"), default="benchmark")
    v.add_argument("--tolerance", type=float, default=0.02)
    v.add_argument("--strict", action="store_true", help="Also check rows flagged known_outlier")
    v.set_defaults(func=cmd_verify_psnr_table)

    return p.parse_args(argv)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR
    _setup_logging(args.verbose, args.log_file)
    func: Callable[[argparse.Namespace], int] = args.func
    try:
        return func(args)
    except (ScvfpError, OSError, ValueError) as e:
        logger.error("%s failed: %s", args.command, e)
        return EXIT_ERROR
