"""Command-line entry point: ``pointnn <subcommand> ...``.

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .datasets import PRIMITIVES, evaluate_features, encode_dataset, few_shot_accuracies, synth_primitives
from .encoder import EncoderConfig, encode_global
from .geometry import normalize_cloud
from .memory import (
    DEFAULT_GAMMA,
    build_bank,
    fuse_logits,
    knn_classify,
    predict,
    predict_topk,
    select_gamma,
    softmax,
    sweep_gamma,
)
from .segmentation import SHAPENET_PARTS, SegEncoderConfig, build_part_bank, segment


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _gamma(text):
    if text == "auto":
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"gamma must be a number or 'auto', got {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError("gamma must be non-negative")
    return value


def _sweep(text):
    try:
        a, b, steps = text.split(":")
        return np.linspace(float(a), float(b), int(steps))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a:b:steps, got {text!r}")


def _encoder_flags(p, defaults: EncoderConfig):
    g = p.add_argument_group("encoder")
    g.add_argument("--stages", type=int, default=defaults.stages)
    g.add_argument("--dim", type=int, default=defaults.init_dim, help="initial feature dimension")
    g.add_argument("--k", type=int, default=defaults.neighbors, help="neighbors per center")
    g.add_argument("--alpha", type=float, default=defaults.alpha)
    g.add_argument("--beta", type=float, default=defaults.beta)
    g.add_argument("--pooling", choices=("max", "avg", "max+avg"), default=defaults.stage_pooling)
    g.add_argument("--global-pooling", choices=("max+avg", "concat"), default=defaults.global_pooling)
    g.add_argument("--grouping", default=defaults.grouping, help="'knn' or 'ball:<radius>'")
    g.add_argument("--precision", choices=("float32", "float64"), default=defaults.dtype)
    g.add_argument("--no-expansion", action="store_true", help="do not prepend center features")
    g.add_argument("--no-normalize", action="store_true", help="skip centering/unit-sphere scaling")


def _config(args, cls=EncoderConfig):
    return cls(
        stages=args.stages,
        init_dim=args.dim,
        neighbors=args.k,
        alpha=args.alpha,
        beta=args.beta,
        grouping=args.grouping,
        stage_pooling=args.pooling,
        global_pooling=args.global_pooling,
        dtype=args.precision,
        expansion=not args.no_expansion,
    )


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_cloud(path, normalize: bool):
    pts = io.load_xyz(path)
    return normalize_cloud(pts) if normalize else pts


# -- subcommands ------------------------------------------------------------


def cmd_synth(args):
    classes = args.classes.split(",") if args.classes else PRIMITIVES
    ds = synth_primitives(classes, args.per_class, args.points, args.noise, args.seed, args.split)
    io.write_dataset(ds, args.out)
    print(f"wrote {len(ds)} clouds to {args.out}")


def cmd_build_bank(args):
    cfg = _config(args)
    train = io.read_dataset(args.train)
    feats = encode_dataset(train, cfg, not args.no_normalize, args.workers)
    bank = build_bank(feats, train.labels, train.num_classes,
                      DEFAULT_GAMMA if args.gamma == "auto" else args.gamma, train.class_names)
    if args.gamma == "auto":
        bank = bank.with_gamma(select_gamma(bank))
    io.save_bank(bank, args.out)
    print(f"bank: {bank.size} samples, {bank.num_classes} classes, dim {bank.dim}, gamma {bank.gamma:g}")


def cmd_classify(args):
    bank = io.load_bank(args.bank)
    feat = encode_global(_load_cloud(args.input, not args.no_normalize), _config(args))
    if args.knn is not None:
        c = knn_classify(feat, bank, args.knn)
        print(f"1 {bank.class_names[c]}")
        return
    logits = predict_topk(feat, bank, args.topk) if args.topk is not None else predict(feat, bank)
    order = np.argsort(-logits, kind="stable")
    _emit("".join(f"{r} {bank.class_names[c]} {logits[c]!r}\n" for r, c in enumerate(order, 1)), args.out)


def cmd_eval(args):
    cfg = _config(args)
    normalize = not args.no_normalize
    train = io.read_dataset(args.train, "train")
    test = io.read_dataset(args.test, "test")
    if train.class_names != test.class_names:
        raise ValueError("train and test directories list different classes")
    t0 = time.perf_counter()
    train_feats = encode_dataset(train, cfg, normalize, args.workers)
    test_feats = encode_dataset(test, cfg, normalize, args.workers)
    t1 = time.perf_counter()
    train_labels = train.labels
    if args.bank_ratio < 1.0:
        n = max(1, int(np.ceil(args.bank_ratio * len(train))))
        rows = np.sort(np.random.default_rng(args.seed).choice(len(train), size=n, replace=False))
        train_feats, train_labels = train_feats[rows], train_labels[rows]
    report = evaluate_features(train_feats, train_labels, test_feats, test.labels,
                               train.class_names, args.gamma)
    report.timing = {"encode": t1 - t0, "predict": time.perf_counter() - t1}
    report.extra["bank_size"] = len(train_labels)
    if args.sweep_gamma is not None:
        bank = build_bank(train_feats, train_labels, train.num_classes, report.gamma, train.class_names)
        for g, acc in sweep_gamma(bank, test_feats, test.labels, args.sweep_gamma).items():
            report.extra[f"sweep.gamma_{g:g}"] = f"{acc:.4f}"
    _emit(report.format(timing=args.timing), args.out)


def cmd_few_shot(args):
    cfg = _config(args)
    data = io.read_dataset(args.data)
    feats = encode_dataset(data, cfg, not args.no_normalize, args.workers)
    accs = few_shot_accuracies(feats, data.labels, args.n_way, args.k_shot, args.query,
                               args.runs, args.seed, args.gamma)
    lines = [f"{args.n_way}-way {args.k_shot}-shot over {args.runs} runs: "
             f"{accs.mean():.2f} +- {accs.std():.2f}", "", "[results]"]
    lines += [f"run.{i}={a:.4f}" for i, a in enumerate(accs)]
    lines += [f"mean={accs.mean():.4f}", f"std={accs.std():.4f}"]
    _emit("\n".join(lines) + "\n", args.out)


def _part_training_set(directory):
    d = Path(directory)
    clouds, labels = [], []
    for xyz in sorted(d.glob("*.xyz")):
        parts = xyz.with_suffix(".parts")
        if not parts.exists():
            raise FileNotFoundError(f"missing part labels {parts}")
        clouds.append(io.load_xyz(xyz))
        labels.append(io.read_int_lines(parts.read_text()))
    if not clouds:
        raise FileNotFoundError(f"no .xyz files in {d}")
    return clouds, labels


def cmd_build_part_bank(args):
    cfg = _config(args, SegEncoderConfig)
    clouds, labels = _part_training_set(args.train)
    if not args.no_normalize:
        clouds = [normalize_cloud(c) for c in clouds]
    bank = build_part_bank(clouds, labels, cfg, args.gamma, args.num_parts)
    io.save_bank(bank, args.out)
    print(f"part bank: {bank.size} part prototypes, {bank.num_classes} part classes, dim {bank.dim}")


def cmd_segment(args):
    bank = io.load_bank(args.bank)
    ranges = dict(SHAPENET_PARTS)
    category = args.category
    if args.parts:
        category = category or "custom"
        ranges[category] = tuple(int(p) for p in args.parts.split(","))
    labels = segment(_load_cloud(args.input, not args.no_normalize), bank,
                     _config(args, SegEncoderConfig), category, ranges)
    _emit("".join(f"{int(v)}\n" for v in labels), args.out)


def cmd_fuse(args):
    a = io.read_logits(Path(args.a).read_text())
    b = io.read_logits(Path(args.b).read_text())
    if args.softmax:
        a, b = softmax(a), softmax(b)
    _emit(io.write_logits(fuse_logits(a, b, args.weight)), args.out)


def cmd_sample_mesh(args):
    mesh = io.read_off(args.input)
    pts = io.sample_mesh_surface(mesh, args.n, args.seed)
    if args.normalize:
        pts = normalize_cloud(pts)
    _emit(io.write_xyz(pts), args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pointnn", description="Training-free point cloud analysis")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    cls_defaults, seg_defaults = EncoderConfig(), SegEncoderConfig()

    p = sub.add_parser("synth", help="write a synthetic primitives dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", help=f"comma list from {','.join(PRIMITIVES)}")
    p.add_argument("--per-class", type=int, default=200)
    p.add_argument("--points", type=int, default=512)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--split", choices=("train", "test"), default="train")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("build-bank", help="encode a dataset directory into a bank file")
    p.add_argument("--train", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gamma", type=_gamma, default=DEFAULT_GAMMA)
    p.add_argument("--workers", type=int, default=1)
    _encoder_flags(p, cls_defaults)
    p.set_defaults(func=cmd_build_bank)

    p = sub.add_parser("classify", help="classify one cloud against a bank")
    p.add_argument("--bank", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--topk", type=int)
    mode.add_argument("--knn", type=int)
    _encoder_flags(p, cls_defaults)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("eval", help="bank accuracy of a test directory")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--gamma", type=_gamma, default=DEFAULT_GAMMA)
    p.add_argument("--sweep-gamma", type=_sweep, metavar="A:B:STEPS")
    p.add_argument("--bank-ratio", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timing", action="store_true", help="append timings to the report")
    p.add_argument("--out")
    _encoder_flags(p, cls_defaults)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("few-shot", help="N-way K-shot episodes over a dataset directory")
    p.add_argument("--data", required=True)
    p.add_argument("--n-way", type=int, default=5)
    p.add_argument("--k-shot", type=int, default=10)
    p.add_argument("--query", type=int, default=20, help="queries per class")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma", type=_gamma, default=DEFAULT_GAMMA)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    _encoder_flags(p, cls_defaults)
    p.set_defaults(func=cmd_few_shot)

    p = sub.add_parser("build-part-bank", help="part bank from .xyz + .parts pairs")
    p.add_argument("--train", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    p.add_argument("--num-parts", type=int, default=50)
    _encoder_flags(p, seg_defaults)
    p.set_defaults(func=cmd_build_part_bank)

    p = sub.add_parser("segment", help="per-point part labels for one cloud")
    p.add_argument("--bank", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--category")
    p.add_argument("--parts", help="comma list of allowed part ids (overrides --category)")
    p.add_argument("--out")
    _encoder_flags(p, seg_defaults)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("fuse", help="interpolate two logits files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--lambda", dest="weight", type=float, default=0.5)
    p.add_argument("--softmax", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("sample-mesh", help="sample an OFF mesh surface into .xyz")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample_mesh)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except (OSError, ValueError) as exc:
        print(f"pointnn {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
