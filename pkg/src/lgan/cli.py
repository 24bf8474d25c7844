"""Command-line entry point: ``lgan <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import metrics
from .checkpoint import CheckpointError, Models, load_checkpoint, save_checkpoint
from .classifier import make_classifier, predict_class
from .config import ConfigError, build_dataset, load_config
from .data import DataFormatError, load_csv, split_labeled
from .geometry import jacobians, local_generate, make_local_generator, sample_local_noise
from .report import read_csv_columns, svg_scatter, write_csv, write_log_csv
from .semisup import train_semisup
from .training import TrainingDivergedError, make_discriminator, train_gan

log = logging.getLogger("lgan")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lgan", description="Localized GAN training and diagnostics.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    for name, helptext in (("train-gan", "adversarial training of a local generator"),
                           ("train-ssl", "semi-supervised training")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True)
        s.add_argument("--out", required=True, help="checkpoint path")
        s.add_argument("--log", help="per-epoch CSV log")

    s = sub.add_parser("generate", help="walk one local coordinate from a base point")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--point-index", type=int, required=True)
    s.add_argument("--coord", type=int, required=True)
    s.add_argument("--steps", type=int, required=True)
    s.add_argument("--span", type=float, default=2.0, help="walk z from -span to +span")
    s.add_argument("--out", required=True)

    s = sub.add_parser("tangents", help="per-point tangent-space diagnostics")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--tol", type=float, default=0.1)
    s.add_argument("--out", required=True)

    s = sub.add_parser("eval", help="metrics of a checkpoint on a CSV dataset")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--labeled", action="store_true", help="last CSV column holds labels")
    s.add_argument("--radius", type=float, help="also report circle distance of generated samples")
    s.add_argument("--samples", type=int, default=500)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tol", type=float, default=0.1)
    s.add_argument("--out", required=True)

    s = sub.add_parser("plot", help="2-D scatter of a CSV as SVG")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    return p


def _need(models: Models, what: str):
    value = getattr(models, what)
    if value is None:
        raise UsageError(f"checkpoint holds no {what}")
    return value


def _cmd_train_gan(args) -> None:
    cfg = load_config(args.config)
    ds = build_dataset(cfg)
    gen = make_local_generator(ds.dim, cfg.coord_dim, cfg.gen_hidden, cfg.gen_activation, cfg.model_seed)
    disc = make_discriminator(ds.dim, cfg.disc_hidden, cfg.disc_activation, cfg.model_seed + 1)
    result = train_gan(cfg.train, ds.points, gen, disc)
    save_checkpoint(Models(result.generator, result.discriminator, None, ds.points), args.out)
    if args.log:
        write_log_csv(args.log, result.log)


def _cmd_train_ssl(args) -> None:
    cfg = load_config(args.config)
    ds = build_dataset(cfg)
    if ds.labels is None:
        raise ConfigError("train-ssl needs a labeled dataset")
    labeled, unlabeled = split_labeled(ds, cfg.labels_per_class, np.random.default_rng(cfg.data_seed))
    validation = None
    if cfg.validation_per_class > 0:
        val = build_dataset(cfg, "validation")
        validation = (val.points, val.labels)
    clf = make_classifier(ds.dim, ds.num_classes, cfg.clf_hidden, cfg.clf_activation, cfg.model_seed + 2)
    gen = make_local_generator(ds.dim, cfg.coord_dim, cfg.gen_hidden, cfg.gen_activation, cfg.model_seed)
    result = train_semisup(
        cfg.train, (labeled.points, labeled.labels), unlabeled.points, validation, clf, gen
    )
    save_checkpoint(Models(result.generator, None, result.classifier, ds.points), args.out)
    if args.log:
        write_log_csv(args.log, result.log)


def _cmd_generate(args) -> None:
    models = load_checkpoint(args.ckpt)
    gen = _need(models, "generator")
    points = _need(models, "points")
    if not 0 <= args.point_index < len(points):
        raise UsageError(f"--point-index must lie in [0, {len(points) - 1}]")
    if not 0 <= args.coord < gen.coord_dim:
        raise UsageError(f"--coord must lie in [0, {gen.coord_dim - 1}]")
    if args.steps < 1:
        raise UsageError("--steps must be at least 1")
    ts = np.linspace(-args.span, args.span, args.steps) if args.steps > 1 else np.zeros(1)
    z = np.zeros((args.steps, gen.coord_dim))
    z[:, args.coord] = ts
    base = np.repeat(points[args.point_index][None, :], args.steps, axis=0)
    out = local_generate(gen, base, z)
    header = ["step", "t"] + [f"x{i}" for i in range(gen.ambient_dim)]
    write_csv(args.out, header, ([i, t, *row] for i, (t, row) in enumerate(zip(ts, out))))


def _cmd_tangents(args) -> None:
    models = load_checkpoint(args.ckpt)
    gen = _need(models, "generator")
    points = _need(models, "points")
    jac = jacobians(gen, points)
    header = ["index", "gram_deviation", "local_dimension"] + [f"sv{i}" for i in range(gen.coord_dim)]
    rows = []
    for i, j in enumerate(jac):
        sv = metrics.singular_values(j)
        rows.append([i, metrics.gram_deviation(j), int(np.sum(sv > args.tol)), *sv])
    write_csv(args.out, header, rows)


def _cmd_eval(args) -> None:
    models = load_checkpoint(args.ckpt)
    ds = load_csv(args.data, args.labeled)
    rows: list[tuple[str, float]] = [("n_points", len(ds))]
    if models.classifier is not None and ds.labels is not None:
        pred = predict_class(models.classifier, ds.points)
        rows.append(("classification_error", metrics.classification_error(np.atleast_1d(pred), ds.labels)))
    gen = models.generator
    if gen is not None:
        if ds.dim != gen.ambient_dim:
            raise UsageError(f"data has dimension {ds.dim}, generator expects {gen.ambient_dim}")
        jac = jacobians(gen, ds.points)
        rows.append(("mean_gram_deviation", float(np.mean([metrics.gram_deviation(j) for j in jac]))))
        rows.append(("mean_local_dimension", float(np.mean([metrics.local_dimension(j, args.tol) for j in jac]))))
        if args.radius is not None:
            rng = np.random.default_rng(args.seed)
            idx = rng.integers(0, len(ds), size=args.samples)
            z = sample_local_noise(gen.coord_dim, 0.1, rng, size=args.samples)
            fake = local_generate(gen, ds.points[idx], z)
            rows.append(("circle_distance", metrics.manifold_distance_circle(fake, args.radius)))
    write_csv(args.out, ["metric", "value"], rows)


def _cmd_plot(args) -> None:
    header, values = read_csv_columns(args.inp)
    if "x0" in header and "x1" in header:
        cols = [header.index("x0"), header.index("x1")]
    elif len(header) >= 2:
        cols = [0, 1]
    else:
        raise UsageError(f"{args.inp} needs at least two columns")
    Path(args.out).write_text(svg_scatter(values[:, cols], title=Path(args.inp).name))


COMMANDS = {
    "train-gan": _cmd_train_gan,
    "train-ssl": _cmd_train_ssl,
    "generate": _cmd_generate,
    "tangents": _cmd_tangents,
    "eval": _cmd_eval,
    "plot": _cmd_plot,
}


def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
        COMMANDS[args.command](args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return 1
    except (OSError, ConfigError, CheckpointError, DataFormatError, TrainingDivergedError, ValueError) as exc:
        print(f"lgan: error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run_cli())
