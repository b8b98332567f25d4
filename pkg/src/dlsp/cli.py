"""Command-line entry point for the whole pipeline.

One binary, nine subcommands: generate, label, split, train, eval,
saliency, design, oracle, serve.  Results go to standard output as JSON;
progress and diagnostics go to the error stream.  Exit codes: 0 success,
1 usage error (bad flags, unknown config key, missing file), 2 runtime
failure (solver blowup, training errors, I/O mid-run).

Numeric knobs resolve in fixed order: explicit flag, then the matching
key from the ``--config`` INI file, then the built-in default.  Seeds fall
back to the DLSP_SEED environment variable before the default.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
from multiprocessing import Pool
from pathlib import Path

from .chgen import BLEND_MEANS, DEFAULT_SNAPSHOT_STEPS, ChParams, ch_run, params_text, snapshot_group
from .design import PbilParams, cnn_expected_class, pbil_history_csv, pbil_init, pbil_run
from .interpret import saliency
from .morpho import (
    DatasetManifest,
    LabeledSample,
    Morphology,
    assign_class,
    augment,
    encode_pgm,
    load_manifest,
    load_morphology,
    save_manifest,
    save_morphology,
    split_dataset,
)
from .nn import (
    ArchSpec,
    EmptySplit,
    TrainConfig,
    build_model,
    evaluate as evaluate_model,
    history_csv,
    load_split,
    load_weights,
    save_weights,
    train,
)
from .nn.model import predict
from .oracle import OracleParams, evaluate as evaluate_oracle, label_dataset
from .structures import make_bilayer

log = logging.getLogger("dlsp")


class UsageError(Exception):
    """Bad invocation; reported on stderr with exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; we reserve 2 for runtime
        raise UsageError(message)


# ---------------------------------------------------------------------------
# Config file

CONFIG_SCHEMA = {
    "chgen": {
        "grid_n": int, "dt": float, "eps2": float, "mobility": float,
        "stabilization": float, "noise_amp": float,
    },
    "oracle": {
        "exciton_length": float, "transport_length": float, "generation": float,
        "solver_tol": float, "solver_max_iters": int, "j_scale": float,
    },
    "train": {"learning_rate": float, "batch_size": int, "epochs": int, "seed": int},
    "pbil": {
        "n": int, "n_b": int, "l_r": float, "mutation_prob": float,
        "mutation_shift": float, "smoothing_radius": int, "max_iters": int,
        "improvement_tol": float, "improvement_window": int, "seed": int,
    },
    "serve": {"host": str, "port": int, "max_jobs": int},
}


def load_config(path) -> dict:
    """Parse and type-check the INI file; unknown sections or keys are
    usage errors naming the offender."""
    if path is None:
        return {}
    if not Path(path).is_file():
        raise UsageError(f"config file not found: {path}")
    ini = configparser.ConfigParser()
    try:
        ini.read(path)
    except configparser.Error as e:
        raise UsageError(f"cannot parse config {path}: {e}")
    out: dict = {}
    for section in ini.sections():
        if section not in CONFIG_SCHEMA:
            raise UsageError(f"unknown config section [{section}]")
        out[section] = {}
        for key, raw in ini[section].items():
            if key not in CONFIG_SCHEMA[section]:
                raise UsageError(f"unknown key '{key}' in config section [{section}]")
            try:
                out[section][key] = CONFIG_SCHEMA[section][key](raw)
            except ValueError:
                raise UsageError(f"bad value for '{key}' in [{section}]: {raw!r}")
    return out


class Knobs:
    """Flag-over-config-over-default resolution for one subcommand."""

    def __init__(self, args, section: str):
        self.args = args
        self.values = load_config(getattr(args, "config", None)).get(section, {})

    def get(self, key: str, default):
        flag = getattr(self.args, key, None)
        if flag is not None:
            return flag
        return self.values.get(key, default)


def resolve_seed(args, knobs: Knobs | None = None) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    if knobs is not None and "seed" in knobs.values:
        return knobs.values["seed"]
    env = os.environ.get("DLSP_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"DLSP_SEED must be an integer, got {env!r}")
    return 0


def effective_jobs(args) -> int:
    if getattr(args, "deterministic", False):
        return 1
    if getattr(args, "jobs", None) is not None:
        if args.jobs < 1:
            raise UsageError(f"--jobs must be >= 1, got {args.jobs}")
        return args.jobs
    return os.cpu_count() or 1


def emit(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def _parse_int_list(text: str, flag: str) -> tuple:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise UsageError(f"{flag} wants a comma-separated integer list, got {text!r}")


# ---------------------------------------------------------------------------
# Subcommands


def _generate_one(params: ChParams) -> list:
    return ch_run(params)


def cmd_generate(args) -> int:
    knobs = Knobs(args, "chgen")
    seed0 = resolve_seed(args)
    if args.runs < 1:
        raise UsageError(f"--runs must be >= 1, got {args.runs}")
    if args.augment < 1:
        raise UsageError(f"--augment must be >= 1, got {args.augment}")
    steps = _parse_int_list(args.snapshots, "--snapshots") if args.snapshots else DEFAULT_SNAPSHOT_STEPS

    run_params = [
        ChParams(
            grid_n=knobs.get("grid_n", 128),
            eps2=knobs.get("eps2", 1.0),
            mobility=knobs.get("mobility", 1.0),
            dt=knobs.get("dt", 0.1),
            stabilization=knobs.get("stabilization", 2.0),
            blend_mean=BLEND_MEANS[i % len(BLEND_MEANS)],
            noise_amp=knobs.get("noise_amp", 0.1),
            seed=seed0 + i,
            snapshot_steps=steps,
        )
        for i in range(args.runs)
    ]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    jobs = effective_jobs(args)
    if jobs > 1:
        with Pool(jobs) as pool:
            results = pool.map(_generate_one, run_params)
    else:
        results = []
        for p in run_params:
            results.append(_generate_one(p))
            log.info("run seed=%d done (%d snapshots)", p.seed, len(results[-1]))

    samples = []
    for p, morphs in zip(run_params, results):
        (out / f"ch_{p.seed}.params").write_text(params_text(p))
        for step, m in zip(p.snapshot_steps, morphs):
            variants = [m] if args.augment == 1 else augment(m, shifts=max(0, args.augment - 2))[: args.augment]
            for vi, v in enumerate(variants):
                name = f"ch_{p.seed}_{step}.pgm" if vi == 0 else f"ch_{p.seed}_{step}_v{vi}.pgm"
                save_morphology(v, out / name)
                samples.append(
                    LabeledSample(path=name, jsc=None, class_id=None,
                                  split="train", group=snapshot_group(p.seed, step))
                )

    manifest_path = out / "manifest.csv"
    save_manifest(DatasetManifest(samples=tuple(samples)), manifest_path)
    emit({"runs": args.runs, "images": len(samples), "manifest": str(manifest_path)})
    return 0


def _oracle_params(knobs: Knobs) -> OracleParams:
    return OracleParams(
        exciton_length=knobs.get("exciton_length", 10.0),
        transport_length=knobs.get("transport_length", 100.0),
        generation=knobs.get("generation", 1.0),
        solver_tol=knobs.get("solver_tol", 1e-8),
        solver_max_iters=knobs.get("solver_max_iters", 20000),
        j_scale=knobs.get("j_scale", 14.0),
    )


def cmd_label(args) -> int:
    knobs = Knobs(args, "oracle")
    manifest_path = Path(args.manifest)
    if not manifest_path.is_file():
        raise UsageError(f"manifest not found: {manifest_path}")
    manifest = load_manifest(manifest_path)
    labeled = label_dataset(manifest, _oracle_params(knobs), base_dir=manifest_path.parent)
    save_manifest(labeled, manifest_path)
    jscs = [s.jsc for s in labeled.samples]
    emit({
        "labeled": len(jscs),
        "j_min": labeled.binning.j_min,
        "j_max": labeled.binning.j_max,
        "manifest": str(manifest_path),
    })
    return 0


def cmd_split(args) -> int:
    manifest_path = Path(args.manifest)
    if not manifest_path.is_file():
        raise UsageError(f"manifest not found: {manifest_path}")
    try:
        fractions = tuple(float(tok) for tok in args.fractions.split(","))
    except ValueError:
        raise UsageError(f"--fractions wants three comma-separated reals, got {args.fractions!r}")
    manifest = load_manifest(manifest_path)
    try:
        out = split_dataset(manifest, fractions, seed=resolve_seed(args))
    except ValueError as e:
        raise UsageError(str(e))
    save_manifest(out, manifest_path)
    counts = {split: len(out.subset(split)) for split in ("train", "val", "test")}
    emit({"manifest": str(manifest_path), **counts})
    return 0


def cmd_train(args) -> int:
    knobs = Knobs(args, "train")
    manifest_path = Path(args.manifest)
    if not manifest_path.is_file():
        raise UsageError(f"manifest not found: {manifest_path}")
    manifest = load_manifest(manifest_path)

    x_train, y_train = load_split(manifest, "train", manifest_path)
    try:
        x_val, y_val = load_split(manifest, "val", manifest_path)
    except EmptySplit:
        x_val = y_val = None
        log.info("no validation split; keeping final-epoch weights")

    seed = resolve_seed(args, knobs)
    config = TrainConfig(
        learning_rate=knobs.get("learning_rate", 1e-4),
        batch_size=knobs.get("batch_size", 128),
        epochs=knobs.get("epochs", 70),
        seed=seed,
    )
    log.info("training on %d samples (%d validation), %d epochs",
             len(x_train), 0 if x_val is None else len(x_val), config.epochs)

    def on_epoch(row):
        val = "-" if row["val_acc"] is None else f"{row['val_acc']:.3f}"
        log.info("epoch %d/%d loss=%.4f acc=%.3f val=%s",
                 row["epoch"], config.epochs, row["train_loss"], row["train_acc"], val)

    final, best, history = train(
        build_model(ArchSpec(), seed=seed), x_train, y_train, config,
        x_val=x_val, y_val=y_val, on_epoch=on_epoch,
    )
    chosen = best if x_val is not None else final
    save_weights(chosen, args.out)
    history_path = Path(str(args.out) + ".history.csv")
    history_path.write_text(history_csv(history))

    payload = {"model": str(args.out), "epochs": config.epochs, "history": str(history_path)}
    if x_val is not None:
        payload["best_val_acc"] = max(row["val_acc"] for row in history)
    emit(payload)
    return 0


def report_confusion(report, path) -> None:
    """Counts as CSV; rows are true classes, columns predicted, both labeled."""
    k = report.confusion.shape[0]
    lines = ["true\\pred," + ",".join(str(i) for i in range(k))]
    for t in range(k):
        lines.append(f"{t}," + ",".join(str(int(c)) for c in report.confusion[t]))
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_eval(args) -> int:
    manifest_path = Path(args.manifest)
    if not manifest_path.is_file():
        raise UsageError(f"manifest not found: {manifest_path}")
    if not Path(args.model).is_file():
        raise UsageError(f"model not found: {args.model}")
    model = load_weights(args.model, ArchSpec())
    manifest = load_manifest(manifest_path)
    x, y = load_split(manifest, args.split, manifest_path)
    report = evaluate_model(model, x, y)

    confusion_path = Path(args.confusion) if args.confusion else manifest_path.parent / f"confusion_{args.split}.csv"
    report_confusion(report, confusion_path)
    emit({
        "split": args.split,
        "n": int(len(y)),
        "accuracy": report.accuracy,
        "macro_f1": report.macro_f1,
        "within_one": report.within_one,
        "confusion": str(confusion_path),
    })
    return 0


def cmd_saliency(args) -> int:
    if not Path(args.model).is_file():
        raise UsageError(f"model not found: {args.model}")
    if not Path(args.image).is_file():
        raise UsageError(f"image not found: {args.image}")
    model = load_weights(args.model, ArchSpec())
    m = load_morphology(args.image)
    x = m.values[None, :, :, None]
    predicted = int(predict(model, x)[0])
    target = predicted if args.target is None else args.target
    sal = saliency(model, m, target)
    Path(args.out).write_bytes(encode_pgm(sal))
    emit({"out": str(args.out), "target": target, "predicted_class": predicted})
    return 0


def cmd_design(args) -> int:
    knobs = Knobs(args, "pbil")
    if not Path(args.model).is_file():
        raise UsageError(f"model not found: {args.model}")
    model = load_weights(args.model, ArchSpec())

    if args.init == "bilayer":
        init = make_bilayer(50)
    elif args.init == "uniform":
        init = "uniform"
    else:
        if not Path(args.init).is_file():
            raise UsageError(f"init image not found: {args.init}")
        init = load_morphology(args.init)

    params = PbilParams(
        n=knobs.get("n", 100),
        n_b=knobs.get("n_b", 10),
        l_r=knobs.get("l_r", 0.1),
        mutation_prob=knobs.get("mutation_prob", 0.02),
        mutation_shift=knobs.get("mutation_shift", 0.05),
        smoothing_radius=knobs.get("smoothing_radius", 1),
        max_iters=args.iters if args.iters is not None else knobs.get("max_iters", 200),
        improvement_tol=knobs.get("improvement_tol", 1e-3),
        improvement_window=knobs.get("improvement_window", 20),
        seed=resolve_seed(args, knobs),
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    wanted = set(_parse_int_list(args.snapshots, "--snapshots")) if args.snapshots else set()
    fitness = cnn_expected_class(model)

    def on_iteration(state, row):
        if state.iteration in wanted:
            (out / f"p_iter{state.iteration}.pgm").write_bytes(encode_pgm(state.P))
        if state.iteration % 10 == 0 or state.iteration == params.max_iters:
            log.info("iter %d best=%.3f elite_mean=%.3f", *row)

    start = pbil_init(init, params, fitness, delta=args.delta)
    state, history = pbil_run(start, params, fitness, on_iteration=on_iteration)

    (out / "history.csv").write_text(pbil_history_csv(history))
    (out / "best.pgm").write_bytes(encode_pgm(state.best_sample.donor_mask.astype(float)))
    emit({
        "initial_fitness": start.best_fitness,
        "best_fitness": state.best_fitness,
        "iterations": state.iteration,
        "out": str(out),
    })
    return 0


def cmd_oracle(args) -> int:
    knobs = Knobs(args, "oracle")
    if not Path(args.image).is_file():
        raise UsageError(f"image not found: {args.image}")
    m = load_morphology(args.image)
    res = evaluate_oracle(m, _oracle_params(knobs))
    payload = {
        "jsc": res.jsc,
        "proxy": res.proxy,
        "eta_diss": res.eta_diss,
        "eta_transport": res.eta_transport,
    }
    if args.binning:
        if not Path(args.binning).is_file():
            raise UsageError(f"binning file not found: {args.binning}")
        from .morpho import load_binning

        payload["class"] = assign_class(res.jsc, load_binning(args.binning))
    emit(payload)
    return 0


def cmd_serve(args) -> int:
    knobs = Knobs(args, "serve")
    if not Path(args.model).is_file():
        raise UsageError(f"model not found: {args.model}")
    import uvicorn

    from .server import build_app

    app = build_app(
        model_path=args.model,
        binning_path=args.binning,
        max_jobs=knobs.get("max_jobs", 4),
        static_dir=args.ui_dir,
    )
    host = knobs.get("host", "127.0.0.1")
    port = knobs.get("port", 8000)
    log.info("serving on %s:%d", host, port)
    uvicorn.run(app, host=host, port=port, log_config=None)
    return 0


# ---------------------------------------------------------------------------
# Parser assembly


def build_parser() -> _Parser:
    parser = _Parser(prog="dlsp", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", metavar="command")

    def common(p):
        p.add_argument("--config", help="INI config file (sections [chgen] [oracle] [train] [pbil] [serve])")
        p.add_argument("--seed", type=int, help="random seed (default: $DLSP_SEED or 0)")

    p = sub.add_parser("generate", help="simulate phase separation and write a PGM dataset", parents=[], add_help=True)
    common(p)
    p.add_argument("--runs", type=int, required=True, help="number of simulation runs")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--augment", type=int, default=1,
                   help="variants per snapshot incl. the original; 2 adds the mirror, k>2 adds k-2 lateral shifts (default: 1)")
    p.add_argument("--snapshots", help="comma-separated snapshot steps (default: 100,200,...,6400)")
    p.add_argument("--jobs", type=int, help="worker processes (default: logical cores)")
    p.add_argument("--deterministic", action="store_true", help="force serial execution")
    p.add_argument("--grid-n", dest="grid_n", type=int, help="simulation grid edge, power of two (default: 128)")
    p.add_argument("--dt", type=float, help="time step (default: 0.1)")
    p.add_argument("--noise-amp", dest="noise_amp", type=float, help="initial noise amplitude (default: 0.1)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("label", help="run the oracle over a manifest and write class bins")
    common(p)
    p.add_argument("--manifest", required=True, help="dataset manifest CSV")
    p.add_argument("--exciton-length", dest="exciton_length", type=float, help="exciton diffusion length in pixels (default: 10)")
    p.add_argument("--transport-length", dest="transport_length", type=float, help="carrier decay length in pixels (default: 100)")
    p.add_argument("--solver-tol", dest="solver_tol", type=float, help="relative residual target (default: 1e-8)")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("split", help="assign train/val/test splits group-by-group")
    common(p)
    p.add_argument("--manifest", required=True, help="dataset manifest CSV")
    p.add_argument("--fractions", default="0.7,0.15,0.15", help="train,val,test fractions (default: 0.7,0.15,0.15)")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train the classifier on a labeled manifest")
    common(p)
    p.add_argument("--manifest", required=True, help="dataset manifest CSV")
    p.add_argument("--out", required=True, help="weights file to write")
    p.add_argument("--epochs", type=int, help="training epochs (default: 70)")
    p.add_argument("--learning-rate", dest="learning_rate", type=float, help="Adam step size (default: 1e-4)")
    p.add_argument("--batch-size", dest="batch_size", type=int, help="minibatch size (default: 128)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model on one split")
    common(p)
    p.add_argument("--model", required=True, help="weights file")
    p.add_argument("--manifest", required=True, help="dataset manifest CSV")
    p.add_argument("--split", default="test", choices=("train", "val", "test"), help="split to score (default: test)")
    p.add_argument("--confusion", help="confusion CSV path (default: confusion_<split>.csv beside the manifest)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("saliency", help="write a saliency map PGM for one image")
    common(p)
    p.add_argument("--model", required=True, help="weights file")
    p.add_argument("--image", required=True, help="input morphology PGM")
    p.add_argument("--out", required=True, help="output saliency PGM")
    p.add_argument("--target", type=int, help="class logit to differentiate (default: predicted class)")
    p.set_defaults(func=cmd_saliency)

    p = sub.add_parser("design", help="run automated design with the trained surrogate")
    common(p)
    p.add_argument("--model", required=True, help="weights file")
    p.add_argument("--init", default="bilayer", help="bilayer | uniform | seed PGM path (default: bilayer)")
    p.add_argument("--iters", type=int, help="iteration cap (default: 200)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--delta", type=float, default=0.1, help="probability softening for hard inits (default: 0.1)")
    p.add_argument("--snapshots", help="comma-separated iterations at which to dump the probability grid")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("oracle", help="evaluate one image with the device-physics oracle")
    common(p)
    p.add_argument("--image", required=True, help="morphology PGM")
    p.add_argument("--binning", help="binning sidecar; adds the class id to the output")
    p.add_argument("--exciton-length", dest="exciton_length", type=float, help="exciton diffusion length in pixels (default: 10)")
    p.add_argument("--transport-length", dest="transport_length", type=float, help="carrier decay length in pixels (default: 100)")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("serve", help="serve the HTTP API")
    common(p)
    p.add_argument("--model", required=True, help="weights file")
    p.add_argument("--binning", help="binning sidecar for oracle class reporting")
    p.add_argument("--port", type=int, help="listen port (default: 8000)")
    p.add_argument("--host", help="bind address (default: 127.0.0.1)")
    p.add_argument("--max-jobs", dest="max_jobs", type=int, help="concurrent design jobs (default: 4)")
    p.add_argument("--ui-dir", dest="ui_dir", help="directory of web UI files to serve at /")
    p.set_defaults(func=cmd_serve)

    return parser


def run_cli(argv) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    if getattr(args, "func", None) is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        load_config(getattr(args, "config", None))  # reject bad config before any work
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: missing file: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130
    except Exception as e:
        log.error("%s: %s", type(e).__name__, e)
        return 2


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
