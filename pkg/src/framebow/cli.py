"""Command-line driver: dataset synthesis, training, classification, serving
and benchmarking.

Exit codes are stable for scripting: 0 success, 1 usage error, 2 data or
configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import ConfigError, FormatError
from .ingest import open_source
from .pipeline import ArtifactBundle, Pipeline, PipelineConfig, format_probabilities, run_bench
from .roi import RoiSpec
from .train import TrainConfig, classify_patch, synth_dataset, train_from_directory
from .vocab import VocabTrainConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parse_roi(text: str) -> RoiSpec:
    parts = text.split(",")
    if len(parts) != 4:
        raise UsageError(f"--roi expects X,Y,W,H, got {text!r}")
    try:
        x, y, w, h = (int(p) for p in parts)
    except ValueError as exc:
        raise UsageError(f"--roi expects integers: {exc}") from exc
    return RoiSpec(x, y, w, h)


def _load_config_file(path: str) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise FormatError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _merge_config(parser: _Parser, argv, values: dict[str, str]):
    """Re-parse with config values as defaults; explicit flags still win.

    Defaults must be pushed onto every subparser too: each subcommand parses
    into a fresh namespace, so only its own action defaults matter.
    """
    parsers = [parser]
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            parsers.extend(action.choices.values())
    actions = {}
    for p in parsers:
        for a in p._actions:
            actions.setdefault(a.dest, a)
    converted = {}
    for key, raw in values.items():
        action = actions.get(key)
        if action is None:
            raise UsageError(f"config file sets unknown option {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            converted[key] = raw.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            converted[key] = action.type(raw)
        else:
            converted[key] = raw
    for p in parsers:
        own = {a.dest for a in p._actions}
        relevant = {k: v for k, v in converted.items() if k in own}
        if relevant:
            p.set_defaults(**relevant)
    return parser.parse_args(argv)


def build_parser() -> _Parser:
    parser = _Parser(prog="framebow", description=__doc__)
    parser.add_argument("--config", help="key = value config file; explicit flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-dataset", help="write synthetic PNG patches + manifest")
    p.add_argument("--out")
    p.add_argument("--per-class", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", default="200x200", help="patch size WxH")
    p.add_argument("--start-index", type=int, default=0)

    p = sub.add_parser("train", help="train vocabulary, scaler and SVM model")
    p.add_argument("--dataset")
    p.add_argument("--out")
    p.add_argument("--mode", choices=("two", "three"), default="three")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--branching", type=int, default=10)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--vocab-cap", type=int, default=60_000)
    p.add_argument("--l1-normalize", action="store_true",
                   help="scale L1-normalized frequencies instead of raw counts")

    p = sub.add_parser("classify-image", help="classify one patch file")
    p.add_argument("image")
    _artifact_flags(p)

    p = sub.add_parser("run", help="run the live pipeline and service")
    _artifact_flags(p)
    _stream_flags(p)
    p.add_argument("--bind", default="127.0.0.1:8750")
    p.add_argument("--alpha", type=float, default=0.0, help="probability smoothing factor")
    p.add_argument("--extra-model", action="append", default=[],
                   help="additional model file (enables switching modes at runtime)")

    p = sub.add_parser("bench", help="timed offline run with a stage report")
    _artifact_flags(p)
    _stream_flags(p)
    p.add_argument("--frames", type=int, default=300)
    return parser


_REQUIRED = {
    "synth-dataset": ("out",),
    "train": ("dataset", "out"),
    "classify-image": ("vocab", "scaler", "model"),
    "run": ("vocab", "scaler", "model"),
    "bench": ("vocab", "scaler", "model"),
}


def _check_required(args) -> None:
    missing = [f"--{name}" for name in _REQUIRED[args.command] if getattr(args, name) is None]
    if missing:
        raise UsageError(f"{args.command} requires {', '.join(missing)} "
                         f"(flag or config file)")


def _artifact_flags(p):
    p.add_argument("--vocab")
    p.add_argument("--scaler")
    p.add_argument("--model")
    p.add_argument("--mode", choices=("two", "three"))


def _stream_flags(p):
    p.add_argument("--source", default="synthetic:B")
    p.add_argument("--fps", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--roi", type=_parse_roi, default=None, metavar="X,Y,W,H")
    p.add_argument("--loop", action="store_true")


def _load_bundles(args) -> tuple[dict[str, ArtifactBundle], str]:
    bundle = ArtifactBundle.load(args.vocab, args.scaler, args.model, expected_mode=args.mode)
    bundles = {bundle.mode: bundle}
    for extra in getattr(args, "extra_model", []):
        other = ArtifactBundle.load(args.vocab, args.scaler, extra)
        bundles[other.mode] = other
    return bundles, bundle.mode


def cmd_synth_dataset(args) -> int:
    w, _, h = args.size.partition("x")
    try:
        size = (int(w), int(h))
    except ValueError as exc:
        raise UsageError(f"--size expects WxH: {exc}") from exc
    manifest = synth_dataset(args.out, args.per_class, args.seed, size=size,
                             start_index=args.start_index)
    n = 3 * args.per_class
    print(f"wrote {n} patches and {manifest}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = TrainConfig(
        mode=args.mode, seed=args.seed,
        vocab=VocabTrainConfig(branching=args.branching, depth=args.depth, seed=args.seed),
        vocab_corpus_cap=args.vocab_cap,
        l1_normalize=args.l1_normalize,
    )
    artifacts = train_from_directory(args.dataset, args.out, config)
    print(f"vocabulary: {artifacts.word_count} words -> {artifacts.vocab_path}")
    print(f"scaler    : {artifacts.scaler_path}")
    print(f"model     : {artifacts.model_path}")
    print("cross-validation (C, mean accuracy):")
    for c, acc in artifacts.cv.table:
        marker = " <- chosen" if c == artifacts.cv.chosen_c else ""
        print(f"  C = {c:<8g} accuracy = {acc:.4f}{marker}")
    return EXIT_OK


def cmd_classify_image(args) -> int:
    bundles, mode = _load_bundles(args)
    pred = classify_patch(args.image, bundles[mode])
    print(f"label: {pred.label}")
    print(format_probabilities(pred.classes, pred.probabilities))
    return EXIT_OK


def cmd_run(args) -> int:
    from .service import PipelineRunner, serve

    bundles, mode = _load_bundles(args)
    source = open_source(args.source, fps=args.fps, loop=args.loop or args.source.startswith("synthetic:"),
                         seed=args.seed)
    pipeline = Pipeline(bundles, PipelineConfig(mode=mode, roi=args.roi, smoothing_alpha=args.alpha))
    runner = PipelineRunner(pipeline, source)
    print(f"serving on http://{args.bind}  (mode: {mode}, source: {args.source})")
    serve(runner, args.bind)
    return EXIT_OK


def cmd_bench(args) -> int:
    bundles, mode = _load_bundles(args)
    source = open_source(args.source, fps=args.fps, loop=True, seed=args.seed)
    pipeline = Pipeline(bundles, PipelineConfig(mode=mode, roi=args.roi, drop_policy="process-all"))
    report = run_bench(pipeline, source, n_frames=args.frames)
    print(report.render())
    return EXIT_OK


_COMMANDS = {
    "synth-dataset": cmd_synth_dataset,
    "train": cmd_train,
    "classify-image": cmd_classify_image,
    "run": cmd_run,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            args = _merge_config(parser, argv, _load_config_file(args.config))
        _check_required(args)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, ConfigError, FileNotFoundError, NotADirectoryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        return EXIT_OK
    except Exception as exc:  # pragma: no cover - unexpected failure
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
