"""Command-line interface: ``mridangam <subcommand> ...``.

Subcommands: transcribe, train, augment, eval-onsets, synth, experiment,
baseline.  Options may also come from a flat ``key=value`` file given with
``--config``; explicit flags override it.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import baselines, nn
from .augment import build_augmented_dataset, pitch_shift, scale_annotations
from .dataset_io import (
    format_annotations,
    load_annotations,
    load_manifest,
    load_wav,
    merge_composites,
    split_holdout,
    split_train_val,
    write_wav,
)
from .evaluation import confusion, match_onsets, metrics
from .experiment import (
    DEFAULT_GRID,
    PipelineConfig,
    format_grid,
    grid_to_csv,
    parse_grid,
    parse_shift_list,
    run_invariance_grid,
    train_classifier,
)
from .features import FEATURE_DIM, compute_templates, decimate_spectrum, extract_all
from .onset import OnsetConfig, detect_onsets
from .synth import SynthCorpusSpec, default_recipes, generate_corpus, recipes_to_json
from .types import Annotation, StrokeLabel

logger = logging.getLogger("mridangam")


def _int_list(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _add_onset_args(p):
    g = p.add_argument_group("onset detection")
    g.add_argument("--window", type=int, default=2048, help="STFT window in samples (default 2048)")
    g.add_argument("--hop", type=int, default=480, help="STFT hop in samples (default 480 = 10 ms)")
    g.add_argument("--pre", type=int, default=3, help="peak-picker frames before (default 3)")
    g.add_argument("--post", type=int, default=3, help="peak-picker frames after (default 3)")
    g.add_argument("--delta", type=float, default=0.07,
                   help="peak threshold above local mean, as a fraction of the envelope max (default 0.07)")
    g.add_argument("--wait", type=int, default=3, help="minimum frames between onsets (default 3)")


def _onset_config(args) -> OnsetConfig:
    return OnsetConfig(args.window, args.hop, args.pre, args.post, args.delta, args.wait)


def _add_train_args(p):
    g = p.add_argument_group("features and training")
    g.add_argument("--bins", type=int, default=FEATURE_DIM,
                   help="feature length; 12000 is the full 0-12 kHz spectrum, smaller values average bins")
    g.add_argument("--hidden", type=_int_list, default=nn.FULL_HIDDEN,
                   help="comma-separated hidden layer sizes (default 15000,9000,4500,1500,450,100)")
    g.add_argument("--dropout", type=float, default=0.25, help="dropout after the first four hidden layers")
    g.add_argument("--epochs", type=int, default=25)
    g.add_argument("--lr", type=float, default=2e-4, help="Adam learning rate (default 0.0002)")
    g.add_argument("--batch-size", type=int, default=32)
    g.add_argument("--patience", type=int, default=5, help="early-stopping patience in epochs")
    g.add_argument("--train-fraction", type=float, default=0.8)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--weighted", action="store_true", help="inverse-frequency class weights in the loss")
    g.add_argument("--balanced", type=int, default=None, metavar="N",
                   help="train on N examples per class")
    g.add_argument("--detect", action="store_true",
                   help="use detected onsets instead of the annotated times")
    g.add_argument("--normalize", action="store_true", help="scale each feature vector to unit max")
    _add_onset_args(p)


def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(
        n_bins=args.bins,
        hidden=tuple(args.hidden),
        dropout=args.dropout,
        train=nn.TrainConfig(epochs=args.epochs, learning_rate=args.lr, batch_size=args.batch_size,
                             patience=args.patience, seed=args.seed),
        train_fraction=args.train_fraction,
        split_seed=args.seed,
        detect=args.detect,
        onset=_onset_config(args),
        normalize=args.normalize,
        weighted=args.weighted,
        balanced=args.balanced,
    )


def _write_text(path, text: str) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# --------------------------------------------------------------------------
# commands


def cmd_transcribe(args) -> int:
    net = nn.load_model(args.model)
    clip = load_wav(args.wav)
    if FEATURE_DIM % net.input_dim:
        raise ValueError(f"model input dim {net.input_dim} is not a divisor of {FEATURE_DIM}")
    onsets = detect_onsets(clip, _onset_config(args)) if len(clip) else []
    annotations = []
    if onsets:
        feats = decimate_spectrum(np.stack(extract_all(clip, onsets, normalize=args.normalize)),
                                  net.input_dim)
        labels = np.argmax(nn.predict_proba(net, feats), axis=1)
        annotations = [Annotation(t, StrokeLabel(int(c))) for t, c in zip(onsets, labels)]
    _write_text(args.out, format_annotations(annotations))
    return 0


def _load_training_data(args, config):
    recordings = load_manifest(args.manifest)
    shifts = (0, *args.augment)
    data = build_augmented_dataset(recordings, shifts, **config.feature_kwargs())
    logger.info("dataset: %d strokes, class counts %s", len(data), data.class_counts.tolist())
    return recordings, data


def cmd_train(args) -> int:
    config = _pipeline_config(args)
    _, data = _load_training_data(args, config)
    val_set = None
    if args.holdout:
        data, val_set = split_holdout(data, args.holdout)
    net, history, train_set, val_set = train_classifier(data, config, val_set)
    nn.save_model(args.model, net)
    if args.history:
        Path(args.history).write_text(history.to_csv())
    preds = np.argmax(nn.predict_proba(net, val_set.features), axis=1)
    cm = confusion(preds, val_set.labels)
    m = metrics(cm)
    if args.confusion:
        Path(args.confusion).write_text(cm.to_csv())
    print(f"trained on {len(train_set)} strokes; best epoch {history.best_epoch + 1} "
          f"of {len(history)}; validation accuracy {m.accuracy:.4f}")
    print(m.to_csv(), end="")
    return 0


def cmd_augment(args) -> int:
    clip = load_wav(args.wav)
    annotations = load_annotations(args.annotations)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    wav_stem, ann_stem = Path(args.wav).stem, Path(args.annotations).stem
    for s in args.shifts:
        suffix = f"_s{s:+d}"
        write_wav(out_dir / f"{wav_stem}{suffix}.wav", pitch_shift(clip, s), bits=args.bits)
        (out_dir / f"{ann_stem}{suffix}.csv").write_text(
            format_annotations(scale_annotations(annotations, s)))
        logger.info("wrote shift %+d", s)
    return 0


def cmd_eval_onsets(args) -> int:
    clip = load_wav(args.wav)
    onsets = detect_onsets(clip, _onset_config(args))
    _write_text(args.out, "seconds\n" + "".join(f"{t:.6f}\n" for t in onsets))
    if args.truth:
        truth = load_annotations(args.truth)
        if args.merge:
            truth = merge_composites(truth)
        report = match_onsets(onsets, [a.onset for a in truth], args.tolerance)
        print(f"matched {report.matched}/{report.truth_count} "
              f"({100 * report.accuracy:.2f}%), false positives {report.false_positives}, "
              f"F-measure {report.f_measure:.4f}, mean |offset| {1000 * report.mean_abs_offset:.2f} ms",
              file=sys.stderr)
    return 0


def cmd_synth(args) -> int:
    spec = SynthCorpusSpec(tonic_hz=args.tonic, strokes_per_class=args.per_class,
                           inter_onset=(args.gap_min, args.gap_max), seed=args.seed)
    recipes = default_recipes()
    clip, annotations = generate_corpus(spec, recipes)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_wav(out_dir / f"{args.name}.wav", clip, bits=args.bits)
    (out_dir / f"{args.name}.csv").write_text(format_annotations(annotations))
    (out_dir / f"{args.name}.json").write_text(recipes_to_json(recipes, spec) + "\n")
    if args.manifest:
        with open(args.manifest, "a") as fh:
            fh.write(f"{out_dir.resolve() / (args.name + '.wav')},{out_dir.resolve() / (args.name + '.csv')}\n")
    print(f"wrote {len(annotations)} strokes, {clip.duration:.1f} s")
    return 0


def cmd_experiment(args) -> int:
    config = _pipeline_config(args)
    grid = parse_grid(args.grid) if args.grid is not None else DEFAULT_GRID
    recordings = load_manifest(args.manifest)
    rows = run_invariance_grid(recordings, grid, config, holdout=args.holdout)
    if args.out:
        Path(args.out).write_text(grid_to_csv(rows))
    print(format_grid(rows))
    return 0


def cmd_baseline(args) -> int:
    config = _pipeline_config(args)
    _, data = _load_training_data(args, config)
    train_set, val_set = split_train_val(data, args.train_fraction, args.seed)
    if args.kind in ("template", "both"):
        templates = compute_templates(train_set.features, train_set.labels)
        acc = baselines.template_accuracy(templates, val_set)
        print(f"template correlation accuracy {acc:.4f}")
        if args.save_templates:
            baselines.save_templates(args.save_templates, templates)
    if args.kind in ("svm", "both"):
        model = baselines.svm_train(train_set, epochs=args.svm_epochs, lr=args.svm_lr,
                                    reg=args.svm_reg, seed=args.seed)
        preds = baselines.svm_predict_batch(model, val_set.features)
        print(f"linear SVM accuracy {np.mean(preds == val_set.labels):.4f}")
        if args.save_svm:
            baselines.save_svm(args.save_svm, model)
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mridangam", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="flat key=value file of option defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transcribe", help="write a seconds,label CSV for a recording")
    p.add_argument("wav")
    p.add_argument("model")
    p.add_argument("-o", "--out", default="-")
    p.add_argument("--normalize", action="store_true", help="must match the setting used in training")
    _add_onset_args(p)
    p.set_defaults(func=cmd_transcribe)

    p = sub.add_parser("train", help="train the stroke classifier from a manifest")
    p.add_argument("manifest")
    p.add_argument("-m", "--model", required=True, help="output model file")
    p.add_argument("--history", help="per-epoch history CSV")
    p.add_argument("--confusion", help="validation confusion matrix CSV")
    p.add_argument("--augment", type=_int_list, default=(), metavar="SHIFTS",
                   help="extra semitone shifts, e.g. -2,-1,1,2")
    p.add_argument("--holdout", help="composition (wav stem) used as validation set")
    _add_train_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("augment", help="write pitch-shifted copies of a recording")
    p.add_argument("wav")
    p.add_argument("annotations")
    p.add_argument("--shifts", type=parse_shift_list, default=(-2, -1, 1, 2))
    p.add_argument("--out-dir", default=".")
    p.add_argument("--bits", type=int, default=16, choices=(16, 24))
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("eval-onsets", help="detect onsets, optionally score against annotations")
    p.add_argument("wav")
    p.add_argument("--truth", help="annotation CSV to score against")
    p.add_argument("--merge", action="store_true", help="merge composite strokes in the truth first")
    p.add_argument("--tolerance", type=float, default=0.015, help="match tolerance in seconds")
    p.add_argument("-o", "--out", default="-")
    _add_onset_args(p)
    p.set_defaults(func=cmd_eval_onsets)

    p = sub.add_parser("synth", help="generate a synthetic labelled corpus")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--name", default="synth")
    p.add_argument("--tonic", type=float, default=160.0)
    p.add_argument("--per-class", type=int, default=100)
    p.add_argument("--gap-min", type=float, default=0.12)
    p.add_argument("--gap-max", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bits", type=int, default=24, choices=(16, 24))
    p.add_argument("--manifest", help="append a manifest line for the new recording")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("experiment", help="tonic-invariance grid")
    p.add_argument("manifest")
    p.add_argument("--grid", help="rows 'train:test' separated by ';', e.g. 'none:-1,1;-1,1:-2,2'")
    p.add_argument("--holdout", help="composition for the held-out column (default: last)")
    p.add_argument("-o", "--out", help="CSV report")
    _add_train_args(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("baseline", help="template-correlation and linear SVM baselines")
    p.add_argument("manifest")
    p.add_argument("--kind", choices=("template", "svm", "both"), default="both")
    p.add_argument("--augment", type=_int_list, default=())
    p.add_argument("--svm-epochs", type=int, default=20)
    p.add_argument("--svm-lr", type=float, default=0.01)
    p.add_argument("--svm-reg", type=float, default=1e-3)
    p.add_argument("--save-templates")
    p.add_argument("--save-svm")
    _add_train_args(p)
    p.set_defaults(func=cmd_baseline)
    return parser


def read_config_file(path) -> dict:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}: line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        values[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return values


def _apply_config(parser, argv, config: dict):
    """Install config values as subcommand defaults (flags still win)."""
    args = parser.parse_args(argv)
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, value in config.items():
        action = actions.get(key)
        if action is None:
            raise ValueError(f"config key {key!r} is not an option of '{args.command}'")
        if action.nargs == 0:
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            defaults[key] = action.type(value)
        else:
            defaults[key] = value
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        if args.config:
            args = _apply_config(parser, argv, read_config_file(args.config))
        return args.func(args)
    except (ValueError, OSError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
