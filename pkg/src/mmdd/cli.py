"""Command-line entry point: ``mmdd [--seed N] [--config F] [--deterministic] <command> ...``.

Exit codes: 0 success, 2 configuration/usage error, 3 file-format error,
4 numeric failure.
"""
import argparse
import contextlib
import logging
import os
import sys

import numpy as np

from . import data_io
from .config import RunConfig, load_config, render_config
from .dsr_generator import SurrogateDataset, generate, sweep_csv, sweep_steps
from .errors import ConfigError, FormatError, InvalidArgument, NumericFailure
from .evaluator import eval_csv, run_evaluation
from .numeric_model import DenoiserModel, LatentCodec
from .trainer import history_csv, train

log = logging.getLogger("mmdd")


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _make_codec(cfg, train_set):
    if cfg.codec == "identity":
        return LatentCodec(train_set.dim)
    return LatentCodec.fit_pca(train_set.samples, cfg.latent_dim or train_set.dim)


def cmd_synth(cfg, args):
    train_set, test_set = data_io.synth_dataset(cfg.dataset_spec())
    data_io.write_labeled(args.out_train, train_set)
    data_io.write_labeled(args.out_test, test_set)
    print(f"train {len(train_set)} samples -> {args.out_train}; test {len(test_set)} -> {args.out_test}")


def cmd_train(cfg, args):
    train_set = data_io.read_labeled(args.data)
    schedule = cfg.schedule()
    codec = _make_codec(cfg, train_set)
    model = DenoiserModel(codec.latent_dim, train_set.n_classes, cfg.hidden, cfg.time_dim, cfg.T,
                          cfg.class_embedding, None, cfg.activation, rng=cfg.seed)

    def checkpoint(step):
        data_io.write_checkpoint(args.out, model, schedule, codec)

    _, history = train(model, (train_set.samples, train_set.labels), cfg.train_config(), schedule,
                       codec, checkpoint)
    if args.history:
        _write_text(args.history, history_csv(history))
    last = history[-1].l_total if history else float("nan")
    print(f"trained {len(history)} steps, final l_total {last:.6g} -> {args.out}")


def cmd_generate(cfg, args):
    model, schedule, codec = data_io.read_checkpoint(args.checkpoint)
    cfg = cfg.replace(steps=args.steps or cfg.steps,
                      budget_secs=cfg.budget_secs if args.budget_secs is None else args.budget_secs)
    if args.simulated_batch_cost:
        cfg = cfg.replace(clock="simulated", simulated_batch_cost=args.simulated_batch_cost)
    if args.simulated_step_cost:
        cfg = cfg.replace(clock="simulated", simulated_step_cost=args.simulated_step_cost)
    sur = generate(model, schedule, cfg.gen_budget(), model.n_classes, cfg.seed, codec)
    data_io.write_labeled(args.out, sur)
    m = sur.metadata
    print(f"{len(sur)} samples in {m['batches']} batches, {m['elapsed']:.3f}s, IPC {m['ipc']}"
          f"{' (budget exhausted)' if sur.budget_exhausted else ''} -> {args.out}")


def cmd_evaluate(cfg, args):
    sur = data_io.read_labeled(args.surrogate, SurrogateDataset)
    test = data_io.read_labeled(args.testset)
    if args.epochs is not None:
        cfg = cfg.replace(eval_epochs=args.epochs)
    if args.repeats is not None:
        cfg = cfg.replace(eval_repeats=args.repeats)
    result = run_evaluation(sur, test, cfg.validate().eval_config())
    text = eval_csv(result)
    if args.out:
        _write_text(args.out, text)
    sys.stdout.write(text)


def cmd_sweep(cfg, args):
    model, schedule, codec = data_io.read_checkpoint(args.checkpoint)
    test = data_io.read_labeled(args.testset)
    if args.steps_list:
        cfg = cfg.replace(sweep_steps=tuple(int(s) for s in args.steps_list.split(",")))
    if args.budget_secs is not None:
        cfg = cfg.replace(budget_secs=args.budget_secs)
    if args.simulated_step_cost:
        cfg = cfg.replace(clock="simulated", simulated_step_cost=args.simulated_step_cost,
                          simulated_batch_cost=0.0)
    ecfg = cfg.validate().eval_config()
    rows = sweep_steps(model, schedule, cfg.gen_budget(), cfg.sweep_steps,
                       lambda sur: run_evaluation(sur, test, ecfg).accuracy_mean,
                       model.n_classes, cfg.seed, codec)
    text = sweep_csv(rows)
    if args.out:
        _write_text(args.out, text)
    sys.stdout.write(text)


def cmd_pipeline(cfg, args):
    d = args.workdir
    os.makedirs(d, exist_ok=True)
    p = {k: os.path.join(d, v) for k, v in dict(
        train="train.surd", test="test.surd", ckpt="model.mmdd", history="history.csv",
        surrogate="surrogate.surd", eval="eval.csv", sweep="sweep.csv", config="config.txt").items()}
    _write_text(p["config"], render_config(cfg))
    ns = argparse.Namespace
    cmd_synth(cfg, ns(out_train=p["train"], out_test=p["test"]))
    cmd_train(cfg, ns(data=p["train"], out=p["ckpt"], history=p["history"]))
    cmd_generate(cfg, ns(checkpoint=p["ckpt"], steps=None, budget_secs=None,
                         simulated_batch_cost=0.0, simulated_step_cost=0.0, out=p["surrogate"]))
    cmd_evaluate(cfg, ns(surrogate=p["surrogate"], testset=p["test"], epochs=None, repeats=None,
                         out=p["eval"]))
    cmd_sweep(cfg, ns(checkpoint=p["ckpt"], testset=p["test"], steps_list=None, budget_secs=None,
                      simulated_step_cost=0.0, out=p["sweep"]))


def build_parser():
    ap = argparse.ArgumentParser(prog="mmdd", description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--config", help="flat key = value config file")
    ap.add_argument("--deterministic", action="store_true",
                    help="single-threaded BLAS and a simulated generation clock")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write toy train/test sets")
    s.add_argument("--out-train", required=True)
    s.add_argument("--out-test", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", help="train the denoiser")
    s.add_argument("--data", required=True, help="training set file")
    s.add_argument("--out", required=True, help="checkpoint path")
    s.add_argument("--history", help="loss history CSV")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("generate", help="budgeted surrogate generation")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--steps", type=int)
    s.add_argument("--budget-secs", type=float)
    s.add_argument("--simulated-batch-cost", type=float, default=0.0)
    s.add_argument("--simulated-step-cost", type=float, default=0.0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("evaluate", help="train classifiers on a surrogate, test on real data")
    s.add_argument("--surrogate", required=True)
    s.add_argument("--testset", required=True)
    s.add_argument("--epochs", type=int)
    s.add_argument("--repeats", type=int)
    s.add_argument("--out", help="CSV output path")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep-steps", help="generation/evaluation sweep over step counts")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--testset", required=True)
    s.add_argument("--steps-list", help="comma-separated step counts")
    s.add_argument("--budget-secs", type=float)
    s.add_argument("--simulated-step-cost", type=float, default=0.0)
    s.add_argument("--out", help="CSV output path")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("pipeline", help="synth, train, generate, evaluate and sweep")
    s.add_argument("--workdir", required=True)
    s.set_defaults(func=cmd_pipeline)
    return ap


def resolve_config(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if args.deterministic and cfg.clock == "real":
        cfg = cfg.replace(clock="simulated")
        if cfg.simulated_batch_cost <= 0 and cfg.simulated_step_cost <= 0:
            cfg = cfg.replace(simulated_step_cost=0.5)
    return cfg.validate()


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        guard = contextlib.nullcontext()
        if args.deterministic:
            from threadpoolctl import threadpool_limits
            guard = threadpool_limits(limits=1)
        with guard:
            args.func(cfg, args)
    except (ConfigError, InvalidArgument) as exc:
        print(f"mmdd: config error: {exc}", file=sys.stderr)
        return 2
    except FormatError as exc:
        print(f"mmdd: format error: {exc}", file=sys.stderr)
        return 3
    except NumericFailure as exc:
        print(f"mmdd: numeric failure: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"mmdd: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
