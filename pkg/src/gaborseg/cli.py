"""``gaborseg`` command line.

Exit codes: 0 success, 1 validation error or bad usage, 2 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import gradcheck, io
from .gabor import init_gabor, materialize_bank
from .harness import simulation
from .harness.data import synth_dataset
from .harness.training import mean_foreground_dice, train
from .losses import hard_dice_metric
from .segnet import NetworkConfig, SegNet, count_params, predict_labels

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _real(text):
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


# subcommands ------------------------------------------------------------------

def cmd_sinusoid(a):
    rows = simulation.sinusoid_curves(a.a_re, a.a_im, a.f_re, a.f_im, a.psi,
                                      (a.x_min, a.x_max), a.samples)
    io.write_csv(rows, ("x", "value"), a.out)


def cmd_simulate_loss(a):
    cfg = io.load_run_config(a.config).sim if a.config else simulation.SimConfig()
    kw = {}
    if a.m:
        kw["m_list"] = tuple(v for group in a.m for v in group)
    for name in ("steps", "seed", "image_len"):
        if getattr(a, name) is not None:
            kw[name] = getattr(a, name)
    if kw:
        cfg = simulation.SimConfig(**{**io.to_dict(cfg), **kw})
    io.write_csv(simulation.loss_trajectory(cfg), simulation.TRAJECTORY_FIELDS, a.out)


def cmd_gradcheck(a):
    suites = tuple(a.suite) if a.suite else gradcheck.SUITES
    results = gradcheck.run_suites(a.seed, suites)
    text = gradcheck.report(results)
    if a.out:
        Path(a.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVALID


def cmd_bank(a):
    if a.params:
        bank = io.bank_from_json(io.read_json(a.params))
    else:
        if a.c_in is None or a.c_out is None:
            raise ValueError("bank needs --c-in and --c-out (or --params FILE)")
        bank = init_gabor(a.c_in, a.c_out, a.seed, k=a.k)
    if a.json is None and a.vol is None:
        io.write_json(io.bank_to_json(bank))
        return
    if a.json:
        io.write_json(io.bank_to_json(bank), a.json)
    if a.vol:
        io.write_vol1(a.vol, materialize_bank(bank).data)


def _network_config(a):
    cfg = io.load_run_config(a.config).network if a.config else NetworkConfig()
    overrides = {k: v for k, v in (("kernel_mode", a.mode), ("k_conv", a.k_conv),
                                   ("k_gabor", a.k_gabor), ("mixed_threshold", a.threshold))
                 if v is not None}
    return NetworkConfig(**{**cfg.to_dict(), **overrides}) if overrides else cfg


def cmd_count_params(a):
    cfg = _network_config(a)
    report = count_params(SegNet(cfg, seed=0)).to_dict()
    report["network"] = cfg.to_dict()
    io.write_json(report, a.out)


def cmd_synth_data(a):
    data = synth_dataset(a.n, a.side, a.labels, a.seed, noise=a.noise,
                         downsampling=a.downsampling)
    io.save_dataset(data, a.out, meta={"seed": a.seed, "side": a.side, "noise": a.noise})


def _finite_or_none(v):
    return v if v is not None and np.isfinite(v) else None


def cmd_train(a):
    run = io.load_run_config(a.config)
    data = io.load_dataset(a.data)
    tc = run.training
    n_train, n_val, n_test = tc.split
    if n_train + n_val + n_test > len(data):
        raise ValueError(f"split {list(tc.split)} needs {sum(tc.split)} volumes, "
                         f"dataset has {len(data)}")
    if data.n_labels != run.network.labels:
        raise ValueError(f"dataset has {data.n_labels} labels, network expects "
                         f"{run.network.labels}")
    tr, va, te = data.split(n_train, n_val, n_test)
    model = SegNet(run.network, seed=run.seeds.model)
    res = train(model, tr, va if n_val else None, loss_name=run.loss.name, lr=run.lr,
                epochs=tc.epochs, batch=tc.batch, seed=run.seeds.train,
                augment_cfg=run.augment if tc.augment else None, eps=run.loss.epsilon)
    summary = {"best_epoch": res.best_epoch, "best_val_dice": _finite_or_none(res.best_val_dice),
               "diverged": res.diverged, "message": res.message,
               "initial_loss": _finite_or_none(res.initial_loss),
               "final_loss": _finite_or_none(res.final_loss),
               "history": res.history}
    if n_test:
        summary["test_dice"] = _finite_or_none(mean_foreground_dice(model, te))
    io.save_checkpoint(model, a.out, extra={"config": run.to_dict()})
    if a.history:
        rows = [(h["epoch"], h["train_loss"], h.get("val_dice", float("nan")))
                for h in res.history]
        io.write_csv(rows, ("epoch", "train_loss", "val_dice"), a.history)
    io.write_json(summary, a.summary)
    return EXIT_INVALID if res.diverged else EXIT_OK


def cmd_predict(a):
    model = io.load_checkpoint(a.model)
    vol = io.read_vol1(a.input).astype(np.float64)
    io.write_vol1(a.out, predict_labels(model, vol))


def cmd_evaluate(a):
    if a.model:
        if not a.data:
            raise ValueError("--model needs --data DIR")
        model = io.load_checkpoint(a.model)
        data = io.load_dataset(a.data)
        per_volume = []
        for i in range(len(data)):
            pred = predict_labels(model, data.images[i])
            per_volume.append(hard_dice_metric(pred, data.labels[i], data.n_labels).tolist())
        n_labels = data.n_labels
    else:
        if not (a.pred and a.truth and a.labels):
            raise ValueError("evaluate needs --model/--data or --pred/--truth/--labels")
        pred, truth = io.read_vol1(a.pred), io.read_vol1(a.truth)
        if pred.shape != truth.shape:
            raise ValueError(f"prediction {pred.shape} and truth {truth.shape} differ in shape")
        if pred.ndim == 3:
            pred, truth = pred[None], truth[None]
        n_labels = a.labels
        per_volume = [hard_dice_metric(p, t, n_labels).tolist() for p, t in zip(pred, truth)]
    per_label = np.mean(per_volume, axis=0)
    io.write_json({"n_volumes": len(per_volume), "n_labels": n_labels,
                   "per_label_dice": per_label.tolist(),
                   "mean_foreground_dice": float(np.mean(np.asarray(per_volume)[:, 1:])),
                   "per_volume": per_volume}, a.out)


# parser -----------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="gaborseg", description="Gabor-kernel 3D segmentation toolkit")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    s = sub.add_parser("sinusoid", help="tabulate the Gabor carrier as CSV")
    s.add_argument("--a-re", type=_real, default=1.0)
    s.add_argument("--a-im", type=_real, default=0.0)
    s.add_argument("--f-re", type=_real, default=0.25)
    s.add_argument("--f-im", type=_real, default=0.25)
    s.add_argument("--psi", type=_real, default=0.0)
    s.add_argument("--x-min", type=_real, default=-3.0)
    s.add_argument("--x-max", type=_real, default=3.0)
    s.add_argument("--samples", type=int, default=601)
    s.add_argument("--out", help="CSV path (default stdout)")
    s.set_defaults(func=cmd_sinusoid)

    s = sub.add_parser("simulate-loss", help="PCC/Dice/CE loss trajectories as CSV")
    s.add_argument("--m", type=_int_list, action="append",
                   help="object side(s), comma separated or repeated")
    s.add_argument("--steps", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--image-len", type=int)
    s.add_argument("--config", help="run config whose 'sim' section gives defaults")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate_loss)

    s = sub.add_parser("gradcheck", help="finite-difference gradient suites")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--suite", action="append", choices=gradcheck.SUITES)
    s.add_argument("--out")
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("bank", help="create or load a Gabor bank and export it")
    s.add_argument("--c-in", type=int)
    s.add_argument("--c-out", type=int)
    s.add_argument("--k", type=int, default=7)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--params", help="read Gabor parameters from this JSON instead")
    s.add_argument("--json", help="write the eight-value records here")
    s.add_argument("--vol", help="write the materialized kernels (VOL1, float64) here")
    s.set_defaults(func=cmd_bank)

    s = sub.add_parser("count-params", help="trainable-parameter report as JSON")
    s.add_argument("--config")
    s.add_argument("--mode", choices=("conventional", "gabor", "mixed"))
    s.add_argument("--k-conv", type=int)
    s.add_argument("--k-gabor", type=int)
    s.add_argument("--threshold", type=int, help="mixed-mode channel threshold")
    s.add_argument("--out")
    s.set_defaults(func=cmd_count_params)

    s = sub.add_parser("synth-data", help="write a synthetic labelled dataset")
    s.add_argument("--n", type=int, default=20)
    s.add_argument("--side", type=int, default=32)
    s.add_argument("--labels", type=int, default=4)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise", type=_real, default=0.1)
    s.add_argument("--downsampling", type=int, default=1)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_synth_data)

    s = sub.add_parser("train", help="train a model, write a checkpoint")
    s.add_argument("--config", required=True)
    s.add_argument("--data", required=True, help="dataset directory from synth-data")
    s.add_argument("--out", required=True, help="checkpoint JSON path")
    s.add_argument("--history", help="per-epoch CSV")
    s.add_argument("--summary", help="summary JSON (default stdout)")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="label a VOL1 volume with a checkpoint")
    s.add_argument("--model", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("evaluate", help="hard Dice of predictions or of a model on a dataset")
    s.add_argument("--model")
    s.add_argument("--data")
    s.add_argument("--pred")
    s.add_argument("--truth")
    s.add_argument("--labels", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as e:  # --help
        return EXIT_OK if not e.code else EXIT_INVALID
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_INVALID
    if args.verbose:
        logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                            format="%(levelname)s %(name)s: %(message)s")
    try:
        code = args.func(args)
    except (io.FormatError, OSError) as e:
        print(f"gaborseg {args.command}: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError) as e:
        print(f"gaborseg {args.command}: error: {e}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
