"""Command-line entry point: ``phaseprune {train,champ,mc,bma,census}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt_io
from .config import ConfigError, DataError, ExperimentConfig, load_config, load_datasets
from .data import bma_experiment
from .network import evaluate, init_network, train
from .pruning import ItConfig, NoQualifyingCandidate, OsConfig, champ, initial_mask
from .report import (
    BMA_COLUMNS,
    HISTORY_COLUMNS,
    MC_COLUMNS,
    REPORT_COLUMNS,
    phase_histogram,
    report_rows,
    write_csv,
    write_json,
)
from .svd_layer import ps_census
from .uncertainty import sigma_sweep

log = logging.getLogger("phaseprune")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_NO_CANDIDATE = 5

EPILOG = """\
exit codes:
  0  success
  2  invalid command line or configuration
  3  dataset or checkpoint could not be read
  4  numerical failure (non-convergent SVD, non-finite values)
  5  champ: no one-shot candidate reached the accuracy floor
     (the report trail is still written)
"""


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_checkpoint(path):
    try:
        return ckpt_io.load(path)
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    except ckpt_io.CheckpointError as exc:
        raise DataError(str(exc)) from exc


def cmd_train(cfg: ExperimentConfig, out, resume=None) -> int:
    train_data, test_data = load_datasets(cfg.dataset)
    if resume is not None:
        start = _load_checkpoint(resume)
        net, mask, meta = start.net, start.mask, dict(start.metadata)
    else:
        net = init_network(cfg.model.dims, cfg.model.class_count, cfg.seed, cfg.model.bias)
        mask, meta = None, {"seed": cfg.seed, "epochs": 0}
    if train_data.dim != net.dims[0]:
        raise DataError(f"dataset features have length {train_data.dim}, network expects {net.dims[0]}")
    tcfg = cfg.train.build(cfg.seed)
    trained, history = train(net, train_data, tcfg, mask)
    if tcfg.epochs:
        meta = {"seed": cfg.seed, "epochs": int(meta.get("epochs", 0)) + tcfg.epochs}
    out = _out_dir(out)
    ckpt_io.save(out / "checkpoint.json", ckpt_io.Checkpoint(trained, mask, meta))
    write_csv(out / "history.csv", HISTORY_COLUMNS, history)
    log.info("train: accuracy %.4f (train) %.4f (test)", history[-1]["accuracy"], evaluate(trained, test_data))
    return EXIT_OK


def _acc_floor(absolute, drop, baseline):
    return baseline - drop if absolute is None else absolute


def cmd_champ(cfg: ExperimentConfig, checkpoint, out, workers: int = 1, timing: bool = False) -> int:
    train_data, test_data = load_datasets(cfg.dataset)
    start = _load_checkpoint(checkpoint)
    net = start.net
    if start.mask is not None:
        net = net.copy()
        net.params[net.layout.phase_section][~start.mask] = 0.0
    base_acc = evaluate(net, test_data)
    ft_seed = cfg.seed + 1
    os_cfg = OsConfig(
        cfg.oneshot.alphas,
        _acc_floor(cfg.oneshot.acc_min, cfg.oneshot.acc_drop, base_acc),
        cfg.oneshot.finetune.build(ft_seed),
        cfg.threshold.build(),
    )
    it_cfg = ItConfig(
        cfg.iterative.delta_alpha,
        _acc_floor(cfg.iterative.acc_min, cfg.iterative.acc_drop, base_acc),
        cfg.iterative.finetune.build(ft_seed),
        cfg.iterative.max_iters,
        cfg.iterative.alpha0,
        cfg.threshold.build(),
    )
    out = _out_dir(out)
    try:
        result = champ(net, os_cfg, it_cfg, train_data, test_data, workers)
    except NoQualifyingCandidate as exc:
        rows = report_rows(exc.reports, timing)
        write_csv(out / "reports.csv", REPORT_COLUMNS, rows)
        write_json(out / "reports.json", {"status": "no_qualifying_candidate", "acc_min": exc.acc_min, "reports": rows})
        log.error("%s", exc)
        return EXIT_NO_CANDIDATE

    rows = report_rows(result.trail, timing)
    write_csv(out / "reports.csv", REPORT_COLUMNS, rows)
    write_json(
        out / "reports.json",
        {
            "status": "ok",
            "baseline_accuracy": base_acc,
            "oneshot_acc_min": os_cfg.acc_min,
            "iterative_acc_min": it_cfg.acc_min,
            "oneshot_winner": report_rows([result.oneshot.report], timing)[0],
            "final": report_rows([result.final.report], timing)[0],
            "reports": rows,
        },
    )
    hist = phase_histogram(
        {
            "baseline": result.baseline.net.phases,
            "oneshot": result.oneshot.net.phases,
            "final": result.final.net.phases,
        },
        cfg.report.histogram_bins,
    )
    write_csv(out / "histogram.csv", ("bin_lo", "bin_hi", "baseline", "oneshot", "final"), hist)
    meta = dict(start.metadata)
    ckpt_io.save(out / "oneshot.json", ckpt_io.Checkpoint(result.oneshot.net, result.oneshot.mask, meta))
    ckpt_io.save(out / "pruned.json", ckpt_io.Checkpoint(result.final.net, result.final.mask, meta))
    f = result.final.report
    log.info("champ: sparsity %.2f%% accuracy %.4f mean phase %.4f", f.ps_sparsity_pct, f.accuracy, f.mean_phase_rad)
    return EXIT_OK


def cmd_mc(cfg: ExperimentConfig, checkpoint, out, workers: int = 1) -> int:
    _, test_data = load_datasets(cfg.dataset)
    start = _load_checkpoint(checkpoint)
    mask = start.mask if start.mask is not None else initial_mask(start.net)
    results = sigma_sweep(
        start.net, mask, test_data, cfg.uncertainty.sigmas, cfg.uncertainty.modes,
        cfg.uncertainty.iterations, cfg.seed, workers,
    )
    rows = [
        {"sigma_ps": r.sigma_ps, "mode": r.mode, "mean_acc": r.mean_accuracy, "std_acc": r.std_accuracy, "n": r.iterations}
        for r in results
    ]
    write_csv(_out_dir(out) / "mc.csv", MC_COLUMNS, rows)
    return EXIT_OK


def cmd_bma(cfg: ExperimentConfig, out, workers: int = 1) -> int:
    records = bma_experiment(cfg.bma.build(cfg.seed), workers)
    write_csv(_out_dir(out) / "bma.csv", BMA_COLUMNS, records)
    return EXIT_OK


def cmd_census(cfg: ExperimentConfig, dims=None) -> int:
    dims = list(dims) if dims else list(cfg.model.dims)
    census = ps_census(list(zip(dims[:-1], dims[1:])))
    print("layer,mesh,size,phase_shifters")
    for layer, which, size, count in census["per_mesh"]:
        print(f"{layer},{which},{size},{count}")
    print(f"total,,,{census['total']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment configuration (JSON); defaults are used when omitted")
    common.add_argument("--seed", type=int, help="override the configuration seed")
    common.add_argument("--workers", type=int, default=1, help="worker processes for parallel stages")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="phaseprune",
        description="Phase-domain training, magnitude pruning and robustness analysis of SVD photonic networks.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train a network from scratch or resume a checkpoint",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--out", required=True, help="output directory (checkpoint.json, history.csv)")
    p.add_argument("--resume", help="checkpoint to continue training from")

    p = sub.add_parser("champ", parents=[common], help="one-shot + iterative pruning of a trained checkpoint",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True,
                   help="output directory (reports.csv/json, histogram.csv, oneshot.json, pruned.json)")
    p.add_argument("--timing", action="store_true", help="fill the wall_time_s column (makes reruns differ)")

    p = sub.add_parser("mc", parents=[common], help="Monte Carlo accuracy under phase noise",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="output directory (mc.csv)")

    p = sub.add_parser("bma", parents=[common], help="weight sparsity vs phase sparsity of random matrices",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--out", required=True, help="output directory (bma.csv)")

    p = sub.add_parser("census", parents=[common], help="count phase shifters for an architecture",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--dims", type=int, nargs="+", help="layer widths, e.g. 64 256 100 10")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config).with_seed(args.seed)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        if args.command == "train":
            return cmd_train(cfg, args.out, args.resume)
        if args.command == "champ":
            return cmd_champ(cfg, args.checkpoint, args.out, args.workers, args.timing)
        if args.command == "mc":
            return cmd_mc(cfg, args.checkpoint, args.out, args.workers)
        if args.command == "bma":
            return cmd_bma(cfg, args.out, args.workers)
        return cmd_census(cfg, args.dims)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
