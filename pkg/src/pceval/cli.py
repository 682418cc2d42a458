"""Command-line interface.

Every subcommand that draws random numbers requires an explicit --seed so
runs are reproducible. Exit codes: 0 on success, 1 when inputs fail
validation, 2 on missing or malformed files.
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys

import numpy as np

from . import formats, reports
from .aux_metrics import completion_score, voxel_iou
from .distances import DistanceKind, EmdConfig, chamfer, emd
from .errors import FormatError, PcevalError, ValidationError
from .geometry import GridSpec, normalize_unit_sphere, sample_mesh, voxelize
from .gmm import EmConfig, GmmModel, fit_em, gmm_sample, log_likelihood
from .harness import (
    CheckpointSeries,
    hedging_fixture,
    memorization_baseline,
    select_model,
    split_dataset,
)
from .latent import (
    ExternalProcessDecoder,
    ToyLinearDecoder,
    analogy,
    apply_edit,
    attribute_vector,
    decode,
    interpolate,
)
from .set_metrics import EvalProtocolConfig, evaluate_generator


def _grid_from_args(args) -> GridSpec:
    center = tuple(float(v) for v in args.grid_center.split(","))
    if len(center) != 3:
        raise ValidationError("--grid-center must be three comma-separated floats")
    return GridSpec(
        resolution=args.grid_resolution, center=center, half_width=args.grid_half_width
    )


def _add_grid_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--grid-resolution", type=int, default=28)
    parser.add_argument("--grid-center", default="0,0,0")
    parser.add_argument("--grid-half-width", type=float, default=1.0)


def _emd_config(args) -> EmdConfig:
    return EmdConfig(
        exact_threshold=args.exact_threshold,
        epsilon=args.epsilon,
        normalize=not args.no_normalize,
    )


def _add_emd_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--exact-threshold", type=int, default=512)
    parser.add_argument("--epsilon", type=float, default=1e-3)
    parser.add_argument(
        "--no-normalize", action="store_true", help="report raw matching sums"
    )


def _single_cloud(path) -> np.ndarray:
    clouds = formats.load_clouds(path)
    if len(clouds) != 1:
        raise ValidationError(f"{path}: expected exactly one cloud, found {len(clouds)}")
    return clouds[0]


def _write_clouds(path, clouds) -> None:
    suffix = str(path).lower()
    if suffix.endswith(".xyz") or suffix.endswith(".txt"):
        if len(clouds) != 1:
            raise ValidationError("ASCII XYZ output holds exactly one cloud")
        formats.write_xyz(path, clouds[0])
    else:
        formats.write_pcset(path, clouds)


def _load_voxels(path):
    if str(path).lower().endswith(".voxg"):
        return formats.read_voxg(path)
    return formats.read_voxel_rle(path)


def _parse_indices(text: str, label: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise ValidationError(f"{label} must be comma-separated integers") from exc


def _rows(book: np.ndarray, indices, label: str) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    if idx.size == 0:
        raise ValidationError(f"{label} selects no rows")
    if idx.min() < 0 or idx.max() >= book.shape[0]:
        raise ValidationError(
            f"{label} index out of range for a {book.shape[0]}-row code file"
        )
    return book[idx]


def cmd_sample_mesh(args) -> int:
    mesh = formats.read_off(args.mesh)
    cloud = sample_mesh(mesh, args.points, np.random.default_rng(args.seed))
    if args.normalize:
        cloud = normalize_unit_sphere(cloud)
    _write_clouds(args.out, [cloud])
    return 0


def cmd_normalize(args) -> int:
    clouds = formats.load_clouds(args.input)
    _write_clouds(args.out, [normalize_unit_sphere(c) for c in clouds])
    return 0


def cmd_dist(args) -> int:
    a = _single_cloud(args.cloud_a)
    b = _single_cloud(args.cloud_b)
    if args.kind == "cd":
        value = chamfer(a, b, normalize=not args.no_normalize)
    else:
        value = emd(a, b, config=_emd_config(args))
    print(repr(value))
    return 0


def cmd_eval(args) -> int:
    groups = [formats.read_pcset(p) for p in args.samples]
    reference = formats.read_pcset(args.reference)
    config = EvalProtocolConfig(
        oversample_factor=args.oversample,
        repetitions=len(groups),
        grid=_grid_from_args(args),
        emd=_emd_config(args),
    )
    report = evaluate_generator(groups, reference, config)
    text = reports.render_report_json(report, label=args.label)
    if args.out:
        reports.write_report_json(args.out, report, label=args.label)
    else:
        sys.stdout.write(text)
    if args.csv:
        reports.append_report_csv(args.csv, report, label=args.label)
    return 0


def cmd_gmm_fit(args) -> int:
    codes = formats.read_latc(args.codes)
    config = EmConfig(
        n_components=args.components,
        covariance_type=args.covariance,
        max_iters=args.max_iters,
        tol=args.tol,
        reg_covar=args.reg_covar,
        restarts=args.restarts,
        seed=args.seed,
    )
    model, diag = fit_em(codes, config)
    model.save(args.out)
    print(
        f"final_log_likelihood={diag.final_log_likelihood!r} "
        f"iterations={diag.n_iterations} restart={diag.best_restart}"
    )
    return 0


def cmd_gmm_sample(args) -> int:
    model = GmmModel.load(args.model)
    codes = gmm_sample(model, args.count, np.random.default_rng(args.seed))
    formats.write_latc(args.out, codes)
    return 0


def cmd_gmm_loglik(args) -> int:
    model = GmmModel.load(args.model)
    codes = formats.read_latc(args.codes)
    print(repr(log_likelihood(model, codes)))
    return 0


def _decoder_from_args(args):
    if args.decoder:
        return ToyLinearDecoder.load(args.decoder)
    return ExternalProcessDecoder(shlex.split(args.command))


def cmd_decode(args) -> int:
    codes = formats.read_latc(args.codes)
    clouds = decode(codes, _decoder_from_args(args))
    formats.write_pcset(args.out, clouds)
    return 0


def cmd_latent_interpolate(args) -> int:
    book = formats.read_latc(args.codes)
    a = _rows(book, [args.index_a], "--index-a")[0]
    b = _rows(book, [args.index_b], "--index-b")[0]
    if args.t is not None:
        out = np.asarray([interpolate(a, b, args.t)])
    else:
        ts = np.linspace(0.0, 1.0, args.steps)
        out = np.asarray([interpolate(a, b, float(t)) for t in ts])
    formats.write_latc(args.out, out)
    return 0


def cmd_latent_edit(args) -> int:
    book = formats.read_latc(args.codes)
    group_a = _rows(book, _parse_indices(args.group_a, "--group-a"), "--group-a")
    group_b = _rows(book, _parse_indices(args.group_b, "--group-b"), "--group-b")
    edit = attribute_vector(group_a, group_b, use_sum=args.convention == "sum")
    target = _rows(book, [args.apply_to], "--apply-to")[0]
    edited = apply_edit(target, edit)
    formats.write_latc(args.out, edited[None, :])
    return 0


def cmd_latent_analogy(args) -> int:
    book = formats.read_latc(args.codes)
    a = _rows(book, [args.a], "--a")[0]
    ap = _rows(book, [args.a_prime], "--a-prime")[0]
    b = _rows(book, [args.b], "--b")[0]
    idx, code = analogy(a, ap, b, book)
    print(idx)
    if args.out:
        formats.write_latc(args.out, code[None, :])
    return 0


def cmd_complete_score(args) -> int:
    score = completion_score(
        _single_cloud(args.predicted), _single_cloud(args.truth), args.rho
    )
    print(f"accuracy={score.accuracy!r} coverage={score.coverage!r}")
    return 0


def cmd_iou(args) -> int:
    print(repr(voxel_iou(_load_voxels(args.grid_a), _load_voxels(args.grid_b))))
    return 0


def cmd_voxelize(args) -> int:
    clouds = formats.load_clouds(args.input)
    hist = voxelize(clouds, _grid_from_args(args))
    grid = (hist.counts >= args.min_count).reshape(-1)
    from .geometry import BinaryVoxelGrid

    formats.write_voxg(args.out, BinaryVoxelGrid(spec=hist.spec, occupied=grid))
    if hist.clamped:
        print(f"warning: {hist.clamped} points clamped to the grid", file=sys.stderr)
    return 0


def cmd_split(args) -> int:
    ratios = tuple(float(v) for v in args.ratios.split(","))
    split = split_dataset(args.n, ratios, args.seed)
    payload = {
        "train": split.train.tolist(),
        "validation": split.validation.tolist(),
        "test": split.test.tolist(),
        "seed": split.seed,
    }
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_baseline_memorize(args) -> int:
    train = formats.read_pcset(args.train)
    picked = memorization_baseline(
        train, args.size, args.seed, with_replacement=args.with_replacement
    )
    formats.write_pcset(args.out, picked)
    return 0


def cmd_fixture_hedge(args) -> int:
    reference = _single_cloud(args.reference)
    cloud = hedging_fixture(reference, args.hot_fraction, args.spread, args.seed)
    _write_clouds(args.out, [cloud])
    return 0


def cmd_select(args) -> int:
    entries = []
    for token in args.checkpoints:
        label, sep, path = token.partition("=")
        if not sep:
            raise ValidationError(
                f"checkpoint {token!r} must look like LABEL=PATH (e.g. 100=epoch100.pcset)"
            )
        try:
            entries.append((int(label), path))
        except ValueError as exc:
            raise ValidationError(f"checkpoint label {label!r} must be an integer") from exc
    series = CheckpointSeries(entries=tuple(entries))
    validation = formats.read_pcset(args.validation)
    config = EvalProtocolConfig(grid=_grid_from_args(args))
    result = select_model(series, validation, criterion=args.criterion, config=config)
    for label, value in result.trace:
        print(f"{label} {value!r}")
    print(f"chosen {result.chosen_label}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pceval",
        description="Point-cloud generative-model evaluation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-mesh", help="sample a point cloud from an OFF mesh")
    p.add_argument("--mesh", required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--normalize", action="store_true", help="scale into the unit sphere")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample_mesh)

    p = sub.add_parser("normalize", help="center clouds and scale to the unit sphere")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("dist", help="distance between two clouds")
    p.add_argument("cloud_a")
    p.add_argument("cloud_b")
    p.add_argument("--kind", choices=["cd", "emd"], required=True)
    _add_emd_args(p)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("eval", help="run the sample-quality evaluation protocol")
    p.add_argument("--samples", nargs="+", required=True, help="one cloud set per repetition")
    p.add_argument("--reference", required=True)
    p.add_argument("--oversample", type=int, default=3)
    p.add_argument("--label", default="")
    p.add_argument("--out", help="report JSON path (stdout when omitted)")
    p.add_argument("--csv", help="append a flat row to this CSV")
    _add_grid_args(p)
    _add_emd_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gmm-fit", help="fit a Gaussian mixture to latent codes")
    p.add_argument("--codes", required=True)
    p.add_argument("--components", type=int, required=True)
    p.add_argument("--covariance", choices=["full", "diagonal"], default="full")
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--reg-covar", type=float, default=1e-6)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gmm_fit)

    p = sub.add_parser("gmm-sample", help="draw latent codes from a fitted mixture")
    p.add_argument("--model", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gmm_sample)

    p = sub.add_parser("gmm-loglik", help="mean log-likelihood of codes under a mixture")
    p.add_argument("--model", required=True)
    p.add_argument("--codes", required=True)
    p.set_defaults(func=cmd_gmm_loglik)

    p = sub.add_parser("decode", help="decode latent codes into point clouds")
    p.add_argument("--codes", required=True)
    which = p.add_mutually_exclusive_group(required=True)
    which.add_argument("--decoder", help="toy linear decoder .npz")
    which.add_argument("--command", help="external decoder command (shell-quoted)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("latent", help="latent-code algebra")
    latent_sub = p.add_subparsers(dest="latent_command", required=True)

    q = latent_sub.add_parser("interpolate", help="interpolate between two codes")
    q.add_argument("--codes", required=True)
    q.add_argument("--index-a", type=int, required=True)
    q.add_argument("--index-b", type=int, required=True)
    which = q.add_mutually_exclusive_group(required=True)
    which.add_argument("--t", type=float)
    which.add_argument("--steps", type=int, help="evenly spaced codes from t=0 to t=1")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_latent_interpolate)

    q = latent_sub.add_parser("edit", help="apply a group-difference edit to a code")
    q.add_argument("--codes", required=True)
    q.add_argument("--group-a", required=True, help="comma-separated row indices")
    q.add_argument("--group-b", required=True, help="comma-separated row indices")
    q.add_argument("--apply-to", type=int, required=True)
    q.add_argument(
        "--convention",
        choices=["mean", "sum"],
        default="mean",
        help="difference of group means (default) or of group sums",
    )
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_latent_edit)

    q = latent_sub.add_parser("analogy", help="a : a' :: b : ? over a codebook")
    q.add_argument("--codes", required=True)
    q.add_argument("--a", type=int, required=True)
    q.add_argument("--a-prime", type=int, required=True)
    q.add_argument("--b", type=int, required=True)
    q.add_argument("--out")
    q.set_defaults(func=cmd_latent_analogy)

    p = sub.add_parser("complete-score", help="completion accuracy and coverage at radius rho")
    p.add_argument("--predicted", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--rho", type=float, required=True)
    p.set_defaults(func=cmd_complete_score)

    p = sub.add_parser("iou", help="IoU of two binary voxel grids")
    p.add_argument("grid_a")
    p.add_argument("grid_b")
    p.set_defaults(func=cmd_iou)

    p = sub.add_parser("voxelize", help="voxelize clouds into a binary grid file")
    p.add_argument("--input", required=True)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--out", required=True)
    _add_grid_args(p)
    p.set_defaults(func=cmd_voxelize)

    p = sub.add_parser("split", help="deterministic train/validation/test index split")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--ratios", default="0.85,0.05,0.10")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("baseline-memorize", help="sample clouds verbatim from a training set")
    p.add_argument("--train", required=True)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--with-replacement", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline_memorize)

    p = sub.add_parser(
        "fixture-hedge", help="build a Chamfer-gaming stress cloud against a reference"
    )
    p.add_argument("--reference", required=True)
    p.add_argument("--hot-fraction", type=float, required=True)
    p.add_argument("--spread", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fixture_hedge)

    p = sub.add_parser("select", help="pick the best checkpoint against validation clouds")
    p.add_argument("--checkpoints", nargs="+", required=True, help="LABEL=PATH pairs")
    p.add_argument("--validation", required=True)
    p.add_argument("--criterion", choices=["jsd", "mmd-cd"], default="jsd")
    _add_grid_args(p)
    p.set_defaults(func=cmd_select)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PcevalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
