"""Command-line entry point.

``spikelth <subcommand> --config <path> [--out <dir>] [--seed <u64>]``

Subcommands: train, search, prune, verify-lth, prob-report, plot. On
failure the process exits nonzero and prints one line to stderr::

    error: <reason>: <message>

where ``<reason>`` is a fixed tag such as ``infeasible-bound``,
``invalid-key`` or ``missing-file``. ``SPIKELTH_LOG`` sets the log level
(default WARNING).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint, CheckpointError, CheckpointVersionError, load_checkpoint, rng_digest, save_checkpoint
from .config import SUBCOMMAND_SECTIONS, ConfigError, ExperimentConfig, load_config
from .core import DomainError, LifParams, init_network
from .encode import CsvParseError, load_feature_csv, synthetic_patterns
from .lth import InfeasibleBoundError, verify_lth
from .plot import plot_csv
from .probmodel import estimate_membrane_stats, prob_report_rows, write_prob_report
from .prune import ImpConfig, imp_run
from .subnet import edge_popup_train, random_mask_accuracies
from .train import SurrogateSpec, TrainConfig, accuracy, train_epochs

log = logging.getLogger("spikelth")

EXIT_CODES = {
    "missing-file": 2,
    "parse-error": 2,
    "invalid-key": 2,
    "invalid-value": 2,
    "invalid-subcommand": 2,
    "infeasible-bound": 3,
    "domain-error": 4,
    "checkpoint-version": 5,
    "checkpoint-error": 5,
}


class CliError(Exception):
    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _lif(cfg: ExperimentConfig) -> LifParams:
    s = cfg.section("lif")
    return LifParams(s["beta"], s["u_th"], s["v_reset"])


def _train_cfg(cfg: ExperimentConfig) -> tuple[TrainConfig, SurrogateSpec]:
    s = cfg.section("train")
    tc = TrainConfig(
        learning_rate=s["learning_rate"],
        epochs=s["epochs"],
        batch_size=s["batch_size"],
        seed=cfg.seed,
        momentum=s["momentum"],
    )
    return tc, SurrogateSpec(width=s["surrogate_width"])


def _data(cfg: ExperimentConfig):
    s = cfg.section("data")
    if s["kind"] == "synthetic":
        ds = synthetic_patterns(s["n_classes"], s["N"], s["T"], s["flip_noise"], s["count_per_class"], cfg.seed)
    elif s["kind"] == "csv":
        if not s["path"]:
            raise ConfigError("invalid-value", "data.path is required for kind=csv")
        if not os.path.exists(s["path"]):
            raise CliError("missing-file", f"data file not found: {s['path']}")
        ds = load_feature_csv(s["path"], s["T"], cfg.seed, n_classes=s["n_classes"])
    else:
        raise ConfigError("invalid-value", f"data.kind must be synthetic or csv, got {s['kind']!r}")
    if len(ds) == 0:
        raise CliError("domain-error", "dataset is empty")
    return ds.split(s["train_fraction"], cfg.seed)


def _network(cfg: ExperimentConfig, n_in: int, n_out: int):
    s = cfg.section("network")
    widths = [n_in, *s["hidden"], n_out]
    return init_network(widths, _lif(cfg), seed=cfg.seed, gain=s["gain"], norm_layers=s["norm_layers"])


def _weights_hash(net) -> str:
    h = hashlib.sha256()
    for layer in net.layers:
        h.update(np.ascontiguousarray(layer.weights, dtype="<f8").tobytes())
    return h.hexdigest()


def cmd_train(cfg: ExperimentConfig, out: Path) -> None:
    tr, ev = _data(cfg)
    net = _network(cfg, tr.N, tr.n_classes)
    tc, spec = _train_cfg(cfg)
    hist = train_epochs(net, tr, tc, spec, eval_data=ev)
    write_csv(out / "metrics.csv", ("epoch", "loss", "train_acc", "eval_acc"),
              [(h["epoch"], h["loss"], h["train_acc"], h["eval_acc"]) for h in hist])
    save_checkpoint(out / "model.ckpt", Checkpoint(net, None, rng_digest(cfg.seed)))
    log.info("train: final eval accuracy %.4f", hist[-1]["eval_acc"] if hist else float("nan"))


def cmd_search(cfg: ExperimentConfig, out: Path) -> None:
    tr, ev = _data(cfg)
    net = _network(cfg, tr.N, tr.n_classes)
    tc, spec = _train_cfg(cfg)
    s = cfg.section("search")
    before = _weights_hash(net)
    res = edge_popup_train(net, tr, tc, spec, k_percent=s["k_percent"], eval_data=ev)
    after = _weights_hash(net)
    write_csv(out / "metrics.csv", ("epoch", "train_acc", "eval_acc", "sparsity"),
              [(h["epoch"], h["train_acc"], h["eval_acc"], h["sparsity"]) for h in res.history])
    base = random_mask_accuracies(net, ev, s["k_percent"], s["baseline_masks"], cfg.seed + 1)
    write_csv(out / "summary.csv", ("searched_eval_acc", "baseline_mean", "baseline_std", "weights_unchanged"),
              [(accuracy(net, ev), float(base.mean()), float(base.std()), int(before == after))])
    save_checkpoint(out / "model.ckpt", Checkpoint(net, res.scores, rng_digest(cfg.seed)))


def cmd_prune(cfg: ExperimentConfig, out: Path) -> None:
    tr, ev = _data(cfg)
    net = _network(cfg, tr.N, tr.n_classes)
    tc, spec = _train_cfg(cfg)
    s = cfg.section("prune")
    ic = ImpConfig(p=s["p"], K=s["K"], R=s["R"], n_epochs=s["n_epochs"], criterion=s["criterion"],
                   seed=cfg.seed, scope=s["scope"])

    def on_step(step, net_now):
        if s["save_masks"]:
            save_checkpoint(out / f"iter_{step.iteration:03d}.ckpt", Checkpoint(net_now.copy(), None, rng_digest(cfg.seed)))

    traj = imp_run(net, tr, ic, tc, spec, eval_data=ev, callback=on_step)
    write_csv(out / "trajectory.csv", ("iteration", "sparsity", "eval_acc", "criterion"), traj.rows())


def cmd_verify_lth(cfg: ExperimentConfig, out: Path) -> None:
    s = cfg.section("lth")
    res = verify_lth(s["N"], s["L"], s["T"], s["delta"], _lif(cfg), n_trials=s["n_trials"], seed=cfg.seed,
                     eps=s["eps"], eps_fraction=s["eps_fraction"], C=s["C"], k=s["k"], rate=s["rate"])
    write_csv(out / "lth.csv",
              ("N", "L", "T", "delta", "eps", "C", "k", "trials", "agreeing", "agreement", "lower_bound",
               "blocks_failed", "mean_l2"),
              [(res.N, res.L, res.T, res.delta, res.eps, res.C, res.k, res.trials, res.agreeing, res.agreement,
                res.lower_bound, res.blocks_failed, res.mean_l2)])
    write_csv(out / "lth_bounds.csv", ("bound", "k"), sorted(res.k_variants.items()))


def cmd_prob_report(cfg: ExperimentConfig, out: Path) -> None:
    tr, _ = _data(cfg)
    s = cfg.section("prob")
    if s["checkpoint"]:
        if not os.path.exists(s["checkpoint"]):
            raise CliError("missing-file", f"checkpoint not found: {s['checkpoint']}")
        net = load_checkpoint(s["checkpoint"]).net
    else:
        net = _network(cfg, tr.N, tr.n_classes)
        tc, spec = _train_cfg(cfg)
        train_epochs(net, tr, tc, spec)
    stats = estimate_membrane_stats(net, tr, hist_bin_width=s["hist_bin_width"])
    write_prob_report(out / "prob_report.csv", prob_report_rows(net, stats))


def cmd_plot(cfg: ExperimentConfig, out: Path) -> None:
    s = cfg.section("plot")
    if not s["input"]:
        raise ConfigError("invalid-value", "plot.input is required")
    if not os.path.exists(s["input"]):
        raise CliError("missing-file", f"csv not found: {s['input']}")
    name = Path(s["input"]).stem + ".svg"
    try:
        plot_csv(s["input"], out / name, s["x"], s["y"], s["title"])
    except ValueError as exc:
        raise CliError("invalid-value", str(exc)) from exc


COMMANDS = {
    "train": cmd_train,
    "search": cmd_search,
    "prune": cmd_prune,
    "verify-lth": cmd_verify_lth,
    "prob-report": cmd_prob_report,
    "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spikelth", description="Spiking lottery-ticket experiments.")
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMAND_SECTIONS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="INI config file")
        p.add_argument("--out", help="output directory (overrides run.out)")
        p.add_argument("--seed", type=int, help="seed (overrides run.seed)")
    return ap


def run_subcommand(name: str, config_path, out=None, seed=None) -> Path:
    """Run one subcommand; returns the output directory. Raises on failure."""
    cfg = load_config(config_path, name)
    if seed is not None:
        if not (0 <= seed < 2**64):
            raise ConfigError("invalid-value", "--seed must be an unsigned 64-bit integer")
        cfg.values["run"]["seed"] = seed
    out_dir = Path(out if out is not None else cfg.values["run"]["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    log.info("%s: seed=%d out=%s", name, cfg.seed, out_dir)
    COMMANDS[name](cfg, out_dir)
    return out_dir


def _fail(reason: str, message: str) -> int:
    line = " ".join(str(message).split())
    print(f"error: {reason}: {line}", file=sys.stderr)
    return EXIT_CODES.get(reason, 1)


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("SPIKELTH_LOG", "WARNING").upper(), format="%(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        run_subcommand(args.subcommand, args.config, args.out, args.seed)
    except (ConfigError, CliError) as exc:
        return _fail(exc.reason, exc)
    except InfeasibleBoundError as exc:
        return _fail("infeasible-bound", exc)
    except CheckpointVersionError as exc:
        return _fail("checkpoint-version", exc)
    except CheckpointError as exc:
        return _fail("checkpoint-error", exc)
    except CsvParseError as exc:
        return _fail("parse-error", exc)
    except DomainError as exc:
        return _fail("domain-error", exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
