"""Project configuration and the end-to-end pipeline.

A project config (TOML or JSON) describes the corpus, model, sampler,
perturbation, morph settings, and a master seed. `run_pipeline` chains
sample -> perturb -> morph -> analyze over a trained checkpoint and
writes a manifest listing every produced file with its sha256, so two
runs with the same seed can be compared hash-for-hash. Per-clip seeds
are spawned from the master seed, and frame-level threading never
changes output bytes.
"""

import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .analysis import (
    artifact_series,
    correlation_heatmap_png,
    correlation_matrix,
    correlation_to_csv,
    region_l1_breakdown,
)
from .delaunay import delaunay
from .errors import ConfigError, CorpusNotFoundError, InvalidInputError
from .frames import save_frames
from .geometry import LandmarkSequence, artifact_l1
from .landmark_io import (
    atomic_write_text,
    document_from_sequence,
    load_landmark_sequence,
    write_landmark_file,
)
from .model import (
    LpnConfig,
    LpnModel,
    SequenceCorpus,
    TrainingOptions,
    checkpoint_hash,
    load_checkpoint,
    save_checkpoint,
    save_loss_csv,
    train,
)
from .morph import morph_sequence
from .perturb import ClipSampler, PerturbationSpec, generate_pseudofake_landmarks, sample_clip_start
from .synth import SyntheticFaceCorpus, denormalize_points, render_face_frames, synth_corpus

log = logging.getLogger("kimoi")

LANDMARK_SUFFIXES = (".json", ".bin")


@dataclass(frozen=True)
class ProjectConfig:
    """Everything a pipeline run needs, loadable from TOML or JSON."""

    master_seed: int = 0
    output_dir: Path = Path("out")
    checkpoint: Path = Path("out/model.ckpt")
    corpus_dir: Optional[Path] = None
    synthetic: Optional[SyntheticFaceCorpus] = None
    model: LpnConfig = field(default_factory=LpnConfig)
    training: TrainingOptions = field(default_factory=TrainingOptions)
    sampler: ClipSampler = field(default_factory=ClipSampler)
    perturbation: PerturbationSpec = field(default_factory=PerturbationSpec)
    anti_alias: bool = False
    frame_height: int = 96
    frame_width: int = 96
    n_clips: int = 4
    series_mode: str = "magnitude"
    file_format: str = "json"

    def __post_init__(self) -> None:
        if self.sampler.clip_length != self.model.clip_length:
            raise ConfigError(
                f"sampler clip_length {self.sampler.clip_length} != model clip_length "
                f"{self.model.clip_length}"
            )
        if self.n_clips < 1:
            raise ConfigError("n_clips must be >= 1")
        if self.frame_height < 8 or self.frame_width < 8:
            raise ConfigError("frame dimensions must be >= 8")
        if self.file_format not in ("json", "bin"):
            raise ConfigError(f"file_format must be 'json' or 'bin', got {self.file_format!r}")

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "master_seed": self.master_seed,
            "paths": {
                "output_dir": str(self.output_dir),
                "checkpoint": str(self.checkpoint),
            },
            "model": self.model.to_dict(),
            "training": {
                "steps": self.training.steps,
                "batch_size": self.training.batch_size,
                "learning_rate": self.training.learning_rate,
                "cosine_decay": self.training.cosine_decay,
                "log_every": self.training.log_every,
            },
            "sampler": {
                "clip_length": self.sampler.clip_length,
                "mode": self.sampler.mode,
            },
            "perturbation": {"sigma": self.perturbation.sigma},
            "morph": {
                "anti_alias": self.anti_alias,
                "frame_height": self.frame_height,
                "frame_width": self.frame_width,
            },
            "pipeline": {
                "n_clips": self.n_clips,
                "series_mode": self.series_mode,
                "file_format": self.file_format,
            },
        }
        if self.corpus_dir is not None:
            data["paths"]["corpus_dir"] = str(self.corpus_dir)
        if self.sampler.guided_std is not None:
            data["sampler"]["guided_std"] = self.sampler.guided_std
        if self.perturbation.regions is not None:
            data["perturbation"]["regions"] = list(self.perturbation.regions)
        if self.synthetic is not None:
            synth = {
                "n_sequences": self.synthetic.n_sequences,
                "min_length": self.synthetic.min_length,
                "max_length": self.synthetic.max_length,
                "rigid_amplitude": self.synthetic.rigid_amplitude,
                "blink_amplitude": self.synthetic.blink_amplitude,
                "mouth_amplitude": self.synthetic.mouth_amplitude,
                "blink_every": self.synthetic.blink_every,
                "mouth_every": self.synthetic.mouth_every,
                "fps": self.synthetic.fps,
                "seed": self.synthetic.seed,
            }
            if self.synthetic.blink_times is not None:
                synth["blink_times"] = list(self.synthetic.blink_times)
            if self.synthetic.mouth_times is not None:
                synth["mouth_times"] = list(self.synthetic.mouth_times)
            data["corpus"] = synth
        return data


def _section(data: dict, name: str, allowed: set[str]) -> dict:
    section = data.get(name, {})
    if not isinstance(section, dict):
        raise ConfigError(f"section {name!r} must be a table/object")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    return section


def config_from_dict(data: dict[str, Any], base_dir: Optional[Path] = None) -> ProjectConfig:
    """Build a ProjectConfig from parsed TOML/JSON, resolving relative paths."""
    base = Path(base_dir) if base_dir is not None else Path(".")
    top_allowed = {"master_seed", "paths", "corpus", "model", "training", "sampler",
                   "perturbation", "morph", "pipeline"}
    unknown = set(data) - top_allowed
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")

    paths = _section(data, "paths", {"output_dir", "checkpoint", "corpus_dir"})
    morph = _section(data, "morph", {"anti_alias", "frame_height", "frame_width"})
    pipe = _section(data, "pipeline", {"n_clips", "series_mode", "file_format"})
    training = _section(
        data, "training", {"steps", "batch_size", "learning_rate", "cosine_decay", "log_every"}
    )
    sampler = _section(data, "sampler", {"clip_length", "mode", "guided_std"})
    perturbation = _section(data, "perturbation", {"sigma", "regions"})
    corpus = _section(
        data,
        "corpus",
        {"n_sequences", "min_length", "max_length", "rigid_amplitude", "blink_amplitude",
         "mouth_amplitude", "blink_times", "mouth_times", "blink_every", "mouth_every",
         "fps", "seed"},
    )

    def resolve(value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else base / p

    master_seed = int(data.get("master_seed", 0))
    try:
        model = LpnConfig.from_dict(data.get("model", {}))
        train_opts = TrainingOptions(seed=master_seed, **training)
        clip_sampler = ClipSampler(**sampler)
        if "regions" in perturbation:
            perturbation = dict(perturbation)
            perturbation["regions"] = tuple(perturbation["regions"])
        spec = PerturbationSpec(seed=master_seed, **perturbation)
        synthetic = None
        if corpus:
            corpus = dict(corpus)
            for key in ("blink_times", "mouth_times"):
                if key in corpus:
                    corpus[key] = tuple(corpus[key])
            corpus.setdefault("seed", master_seed)
            synthetic = SyntheticFaceCorpus(**corpus)
    except (TypeError, InvalidInputError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc

    return ProjectConfig(
        master_seed=master_seed,
        output_dir=resolve(paths.get("output_dir", "out")),
        checkpoint=resolve(paths.get("checkpoint", "out/model.ckpt")),
        corpus_dir=resolve(paths["corpus_dir"]) if "corpus_dir" in paths else None,
        synthetic=synthetic,
        model=model,
        training=train_opts,
        sampler=clip_sampler,
        perturbation=spec,
        anti_alias=bool(morph.get("anti_alias", False)),
        frame_height=int(morph.get("frame_height", 96)),
        frame_width=int(morph.get("frame_width", 96)),
        n_clips=int(pipe.get("n_clips", 4)),
        series_mode=str(pipe.get("series_mode", "magnitude")),
        file_format=str(pipe.get("file_format", "json")),
    )


def load_project_config(path) -> ProjectConfig:
    """Parse a .toml or .json project file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    raw = path.read_bytes()
    if path.suffix == ".json":
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config {path}: {exc}") from exc
    else:
        if sys.version_info >= (3, 11):
            import tomllib
        else:
            import tomli as tomllib
        try:
            data = tomllib.loads(raw.decode("utf-8"))
        except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
            raise ConfigError(f"invalid TOML config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be a table/object, got {type(data).__name__}")
    return config_from_dict(data, base_dir=path.parent)


def load_corpus(config: ProjectConfig) -> list[LandmarkSequence]:
    """Corpus from landmark files when corpus_dir is set, else synthetic."""
    if config.corpus_dir is not None:
        directory = config.corpus_dir
        if not directory.is_dir():
            raise CorpusNotFoundError(f"corpus directory not found: {directory}")
        files = sorted(p for p in directory.iterdir() if p.suffix in LANDMARK_SUFFIXES)
        if not files:
            raise CorpusNotFoundError(f"no landmark files (*.json, *.bin) in {directory}")
        return [load_landmark_sequence(p) for p in files]
    if config.synthetic is not None:
        return synth_corpus(config.synthetic)
    raise CorpusNotFoundError("config provides neither paths.corpus_dir nor a [corpus] section")


def train_from_config(config: ProjectConfig) -> tuple[Path, Path]:
    """Train per config; writes checkpoint (+sidecar) and loss CSV."""
    sequences = load_corpus(config)
    corpus = SequenceCorpus(sequences, config.sampler)
    model = LpnModel(config.model, seed=config.master_seed)
    history = train(model, corpus, config.training)
    config.checkpoint.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, config.checkpoint)
    loss_csv = Path(str(config.checkpoint) + ".loss.csv")
    save_loss_csv(history, loss_csv)
    log.info("checkpoint written to %s (final total loss %.6g)", config.checkpoint, history[-1].total)
    return config.checkpoint, loss_csv


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_pipeline(config: ProjectConfig, threads: int = 1) -> Path:
    """sample -> perturb -> morph -> analyze; returns the manifest path.

    Requires the trained checkpoint named by the config. Every output
    lands under output_dir; the manifest records relative paths and
    sha256 hashes of all of them plus the per-clip provenance.
    """
    if not config.checkpoint.exists():
        raise CorpusNotFoundError(
            f"checkpoint not found: {config.checkpoint} (run training first)"
        )
    model = load_checkpoint(config.checkpoint)
    if model.config != config.model:
        raise ConfigError("checkpoint config does not match project model config")
    ckpt_hash = checkpoint_hash(config.checkpoint)
    sequences = load_corpus(config)
    out_root = config.output_dir
    out_root.mkdir(parents=True, exist_ok=True)

    children = np.random.SeedSequence(config.master_seed).spawn(config.n_clips)
    suffix = config.file_format
    artifacts = []
    clip_records = []
    file_hashes: dict[str, str] = {}

    def record(path: Path) -> None:
        file_hashes[path.relative_to(out_root).as_posix()] = _sha256(path)

    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        seq_idx = int(rng.integers(len(sequences)))
        parent = sequences[seq_idx]
        start = sample_clip_start(config.sampler, parent, rng)
        clip = parent.slice_frames(start, config.sampler.clip_length)

        target, artifact, meta = generate_pseudofake_landmarks(
            model, clip, config.perturbation, rng, checkpoint_hash=ckpt_hash
        )
        artifacts.append(artifact)

        clip_dir = out_root / f"clip_{i + 1:06d}"
        clip_dir.mkdir(parents=True, exist_ok=True)
        provenance = dict(meta, sequence_index=seq_idx, clip_start=start)
        src_path = clip_dir / f"source.{suffix}"
        dst_path = clip_dir / f"target.{suffix}"
        write_landmark_file(src_path, document_from_sequence(clip), fmt=suffix)
        write_landmark_file(
            dst_path, document_from_sequence(target, provenance=provenance), fmt=suffix
        )
        record(src_path)
        record(dst_path)

        frames = render_face_frames(clip, config.frame_height, config.frame_width)
        src_px = denormalize_points(clip, config.frame_width, config.frame_height)
        dst_px = denormalize_points(target, config.frame_width, config.frame_height)
        mesh = delaunay(src_px[0])
        morphed = morph_sequence(
            frames, src_px, dst_px, mesh, anti_alias=config.anti_alias, threads=threads
        )
        for path in save_frames(clip_dir / "source_frames", frames):
            record(path)
        for path in save_frames(clip_dir / "morphed_frames", morphed):
            record(path)
        morph_meta = dict(provenance, artifact_l1=artifact_l1(artifact),
                          regions_l1=region_l1_breakdown(artifact))
        meta_path = clip_dir / "provenance.json"
        atomic_write_text(meta_path, json.dumps(morph_meta, sort_keys=True, indent=2))
        record(meta_path)
        clip_records.append(
            {"index": i + 1, "sequence_index": seq_idx, "clip_start": start, **meta}
        )
        log.info("clip %d/%d done (artifact_l1=%.6g)", i + 1, config.n_clips,
                 morph_meta["artifact_l1"])

    analysis_dir = out_root / "analysis"
    analysis_dir.mkdir(parents=True, exist_ok=True)
    series = artifact_series(artifacts, mode=config.series_mode)
    corr = correlation_matrix(series)
    csv_path = analysis_dir / "correlation.csv"
    png_path = analysis_dir / "correlation.png"
    correlation_to_csv(corr, csv_path)
    correlation_heatmap_png(corr, png_path, title="temporal artifact correlation")
    record(csv_path)
    record(png_path)

    manifest = {
        "master_seed": config.master_seed,
        "checkpoint_hash": ckpt_hash,
        "config": config.to_dict(),
        "clips": clip_records,
        "files": dict(sorted(file_hashes.items())),
    }
    manifest_path = out_root / "manifest.json"
    atomic_write_text(manifest_path, json.dumps(manifest, sort_keys=True, indent=2))
    return manifest_path
