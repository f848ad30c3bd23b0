"""Command-line surface.

Subcommands:
    lpn train <config>                      train, write checkpoint + loss CSV
    lpn perturb <checkpoint> <landmarks>    pseudo-fake targets for one clip
    morph <frames> <src> <dst> <out>        piecewise-affine re-render
    analyze corr <pairs...> --out CSV       artifact correlation matrix
    pipeline run <config>                   sample -> perturb -> morph -> analyze
    synth <out-dir>                         synthetic landmark corpus

Shared flags: --seed, --threads, --format {json,bin}. Errors print one
JSON object {"kind", "message"} on stderr and exit 2; the log level
comes from the KIMOI_LOG environment variable.
"""

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .analysis import (
    artifact_series,
    correlation_heatmap_png,
    correlation_matrix,
    correlation_to_csv,
    region_l1_breakdown,
)
from .delaunay import delaunay
from .errors import (
    CorruptCheckpointError,
    InvalidInputError,
    KimoiError,
    SequenceMismatchError,
    TrainingFailureError,
)
from .frames import load_frames, save_frames
from .geometry import artifact_l1, temporal_artifacts
from .landmark_io import (
    atomic_write_text,
    document_from_sequence,
    load_landmark_sequence,
    write_landmark_file,
)
from .model import checkpoint_hash, load_checkpoint
from .morph import morph_sequence
from .perturb import PerturbationSpec, generate_pseudofake_landmarks
from .pipeline import load_project_config, run_pipeline, train_from_config
from .synth import SyntheticFaceCorpus, denormalize_points, write_corpus

log = logging.getLogger("kimoi")


def _configure_logging() -> None:
    level_name = os.environ.get("KIMOI_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def _reseed_config(config, seed):
    """Propagate a master-seed override into every seeded sub-config."""
    if seed is None:
        return config
    updates = {
        "master_seed": seed,
        "training": dataclasses.replace(config.training, seed=seed),
        "perturbation": dataclasses.replace(config.perturbation, seed=seed),
    }
    if config.synthetic is not None:
        updates["synthetic"] = dataclasses.replace(config.synthetic, seed=seed)
    return dataclasses.replace(config, **updates)


def _cmd_lpn_train(args) -> int:
    config = load_project_config(args.config)
    config = _reseed_config(config, args.seed)
    if args.synthetic is not None:
        synthetic = SyntheticFaceCorpus(n_sequences=args.synthetic, seed=config.master_seed)
        config = dataclasses.replace(config, synthetic=synthetic, corpus_dir=None)
    if args.steps is not None:
        config = dataclasses.replace(
            config, training=dataclasses.replace(config.training, steps=args.steps)
        )
    checkpoint, loss_csv = train_from_config(config)
    print(checkpoint)
    print(loss_csv)
    return 0


def _cmd_lpn_perturb(args) -> int:
    model = load_checkpoint(args.checkpoint)
    seq = load_landmark_sequence(args.landmarks)
    t = model.config.clip_length
    if seq.n_frames != t:
        raise InvalidInputError(
            f"input has {seq.n_frames} frames but the model expects clips of {t}; "
            "sample a clip first"
        )
    spec = PerturbationSpec(sigma=args.sigma, seed=args.seed or 0)
    rng = np.random.default_rng(spec.seed)
    ckpt_hash = checkpoint_hash(args.checkpoint)
    target, artifact, meta = generate_pseudofake_landmarks(
        model, seq, spec, rng, checkpoint_hash=ckpt_hash
    )

    out = Path(args.out) if args.out else Path(args.landmarks).with_name(
        Path(args.landmarks).stem + f"_target.{args.format}"
    )
    write_landmark_file(out, document_from_sequence(target, provenance=meta), fmt=args.format)
    summary = {
        "artifact_l1": artifact_l1(artifact),
        "regions_l1": region_l1_breakdown(artifact),
        **meta,
    }
    summary_path = Path(str(out) + ".summary.json")
    atomic_write_text(summary_path, json.dumps(summary, sort_keys=True, indent=2))
    print(json.dumps(summary, sort_keys=True))
    print(out)
    return 0


def _pixels_for_frames(seq, width: int, height: int) -> np.ndarray:
    # Landmarks are normalized to their crop; the frames directory is
    # expected to hold exactly that crop, so the frame grid defines the
    # pixel scale regardless of where the crop sat in the source video.
    return denormalize_points(seq, width, height)


def _cmd_morph(args) -> int:
    frames = load_frames(args.frames_dir)
    src = load_landmark_sequence(args.src_landmarks)
    dst = load_landmark_sequence(args.dst_landmarks)
    if src.n_frames != frames.n_frames or dst.n_frames != frames.n_frames:
        raise SequenceMismatchError(
            f"frame count {frames.n_frames} does not match landmarks "
            f"({src.n_frames} source, {dst.n_frames} target)"
        )
    height, width = frames.height, frames.width
    src_px = _pixels_for_frames(src, width, height)
    dst_px = _pixels_for_frames(dst, width, height)
    mesh = delaunay(src_px[0])
    morphed = morph_sequence(
        frames, src_px, dst_px, mesh, anti_alias=args.anti_alias, threads=args.threads
    )
    out_dir = Path(args.out_dir)
    paths = save_frames(out_dir, morphed)
    provenance = {
        "source_landmarks": str(args.src_landmarks),
        "target_landmarks": str(args.dst_landmarks),
        "frames_dir": str(args.frames_dir),
        "n_frames": frames.n_frames,
        "n_triangles": int(mesh.triangles.shape[0]),
        "anti_alias": bool(args.anti_alias),
    }
    atomic_write_text(out_dir / "provenance.json", json.dumps(provenance, sort_keys=True, indent=2))
    print(f"wrote {len(paths)} frames to {out_dir}")
    return 0


def _artifact_from_path(path: Path):
    """One artifact per input: a pipeline clip dir or a target landmark file."""
    if path.is_dir():
        targets = sorted(path.glob("target.*"))
        sources = sorted(path.glob("source.*"))
        if not targets or not sources:
            raise InvalidInputError(f"{path} has no source/target landmark pair")
        src, dst = sources[0], targets[0]
    else:
        if "target" not in path.name:
            raise InvalidInputError(
                f"{path} is not a clip directory or a *target* landmark file"
            )
        src = path.with_name(path.name.replace("target", "source"))
        if not src.exists():
            raise InvalidInputError(f"missing source file {src} next to {path}")
        dst = path
    return temporal_artifacts(load_landmark_sequence(dst), load_landmark_sequence(src))


def _cmd_analyze_corr(args) -> int:
    artifacts = [_artifact_from_path(Path(p)) for p in args.inputs]
    series = artifact_series(artifacts, mode=args.mode)
    corr = correlation_matrix(series)
    correlation_to_csv(corr, args.out)
    png = args.png or str(Path(args.out).with_suffix(".png"))
    correlation_heatmap_png(corr, png, title=f"artifact correlation ({args.mode})")
    print(args.out)
    print(png)
    return 0


def _cmd_pipeline_run(args) -> int:
    config = load_project_config(args.config)
    config = _reseed_config(config, args.seed)
    if args.format is not None:
        config = dataclasses.replace(config, file_format=args.format)
    manifest = run_pipeline(config, threads=args.threads)
    print(manifest)
    return 0


def _cmd_synth(args) -> int:
    params = SyntheticFaceCorpus(n_sequences=args.sequences, seed=args.seed or 0)
    paths = write_corpus(params, args.out_dir, fmt=args.format)
    print(f"wrote {len(paths)} sequences to {args.out_dir}")
    return 0


def _add_common(parser: argparse.ArgumentParser, default_format: str = "json") -> None:
    parser.add_argument("--seed", type=int, default=None, help="master RNG seed override")
    parser.add_argument(
        "--threads", type=int, default=1, help="frame-level morphing parallelism"
    )
    parser.add_argument(
        "--format", choices=("json", "bin"), default=default_format,
        help="landmark file format for outputs",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kimoi", description=__doc__.partition("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    lpn = sub.add_parser("lpn", help="train or apply the landmark perturbation network")
    lpn_sub = lpn.add_subparsers(dest="lpn_command", required=True)

    train_p = lpn_sub.add_parser("train", help="train from a project config")
    train_p.add_argument("config")
    train_p.add_argument("--synthetic", type=int, default=None, metavar="N",
                         help="train on N generated synthetic sequences")
    train_p.add_argument("--steps", type=int, default=None, help="override training steps")
    _add_common(train_p)
    train_p.set_defaults(func=_cmd_lpn_train)

    perturb_p = lpn_sub.add_parser("perturb", help="generate pseudo-fake target landmarks")
    perturb_p.add_argument("checkpoint")
    perturb_p.add_argument("landmarks")
    perturb_p.add_argument("--sigma", type=float, default=0.007, help="noise std")
    perturb_p.add_argument("--out", default=None, help="target landmark output path")
    _add_common(perturb_p)
    perturb_p.set_defaults(func=_cmd_lpn_perturb)

    morph_p = sub.add_parser("morph", help="re-render frames onto target landmarks")
    morph_p.add_argument("frames_dir")
    morph_p.add_argument("src_landmarks")
    morph_p.add_argument("dst_landmarks")
    morph_p.add_argument("out_dir")
    morph_p.add_argument("--anti-alias", action="store_true", help="coverage-weighted blending")
    _add_common(morph_p)
    morph_p.set_defaults(func=_cmd_morph)

    analyze = sub.add_parser("analyze", help="artifact diagnostics")
    analyze_sub = analyze.add_subparsers(dest="analyze_command", required=True)
    corr_p = analyze_sub.add_parser("corr", help="correlation matrix of temporal artifacts")
    corr_p.add_argument("inputs", nargs="+",
                        help="clip directories or *target* landmark files")
    corr_p.add_argument("--out", required=True, help="output CSV path")
    corr_p.add_argument("--png", default=None, help="heatmap path (default: CSV with .png)")
    corr_p.add_argument("--mode", choices=("magnitude", "x", "y"), default="magnitude")
    _add_common(corr_p)
    corr_p.set_defaults(func=_cmd_analyze_corr)

    pipeline = sub.add_parser("pipeline", help="end-to-end pseudo-fake generation")
    pipeline_sub = pipeline.add_subparsers(dest="pipeline_command", required=True)
    run_p = pipeline_sub.add_parser("run", help="sample, perturb, morph, analyze")
    run_p.add_argument("config")
    _add_common(run_p, default_format=None)
    run_p.set_defaults(func=_cmd_pipeline_run)

    synth_p = sub.add_parser("synth", help="generate a synthetic landmark corpus")
    synth_p.add_argument("out_dir")
    synth_p.add_argument("--sequences", type=int, default=200, help="number of sequences")
    _add_common(synth_p)
    synth_p.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)

    import torch

    torch.set_num_threads(1)  # keep float reductions deterministic

    try:
        return args.func(args)
    except TrainingFailureError as exc:
        print(json.dumps({"kind": exc.kind, "message": str(exc), "step": exc.step}),
              file=sys.stderr)
        return 2
    except KimoiError as exc:
        print(json.dumps({"kind": exc.kind, "message": str(exc)}), file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(json.dumps({"kind": "invalid-input", "message": str(exc)}), file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"kind": "io-error", "message": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
