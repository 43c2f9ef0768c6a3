"""Offline corpus generation and the training chain.

Training mirrors the online path exactly: patches are written as PNGs of
already-converted RGB (so live YUYV frames and training patches share one
color path), gray conversion and descriptor extraction use the same code,
and the fitted scaler/model record the vocabulary and scaler fingerprints
they were built against.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .dsift import DsiftParams, extract_dsift, to_gray
from .errors import FormatError
from .features import build_histogram, fit_scaler, apply_scaler, save_scaler
from .ingest import SYNTH_CLASSES, RgbFrame, decode_yuv422_to_rgb, synth_texture_frame
from .roi import RoiSpec
from .svm import CvReport, train_model, save_model
from .util import file_fingerprint
from .vocab import VocabTrainConfig, quantize_batch, save_tree, train_tree

log = logging.getLogger("framebow")

MANIFEST_NAME = "manifest.tsv"
TWO_CATEGORY_CLASSES = ("A", "notA")
THREE_CATEGORY_CLASSES = ("A", "B", "C3")


@dataclass(frozen=True)
class TrainConfig:
    mode: str = "three"
    seed: int = 0
    dsift: DsiftParams = field(default_factory=DsiftParams)
    vocab: VocabTrainConfig = VocabTrainConfig()
    vocab_corpus_cap: int = 60_000  # descriptors sampled for tree training
    l1_normalize: bool = False      # scale frequencies instead of raw counts


def synth_dataset(out_dir: str | Path, per_class: int, seed: int,
                  size: tuple[int, int] = (200, 200), start_index: int = 0) -> Path:
    """Write PNG patches for every synthetic class plus a label manifest.

    Patch pixels are the YUV-decoded RGB of the synthetic frames, so training
    sees exactly what the live pipeline would see for the same content.
    """
    if per_class <= 0:
        raise ValueError("empty dataset: per-class count must be positive")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    width, height = size
    rows = []
    for label in SYNTH_CLASSES:
        for i in range(per_class):
            frame_index = start_index + i
            rgb = decode_yuv422_to_rgb(synth_texture_frame(seed, label, frame_index, width, height))
            name = f"{label}_{frame_index:05d}.png"
            Image.fromarray(rgb.data).save(out / name)
            rows.append(f"{name}\t{label}")
    manifest = out / MANIFEST_NAME
    manifest.write_text("\n".join(rows) + "\n")
    return manifest


def read_manifest(dataset_dir: str | Path) -> list[tuple[str, str]]:
    path = Path(dataset_dir) / MANIFEST_NAME
    if not path.is_file():
        raise FormatError(f"{path}: manifest not found")
    entries = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(f"{path}:{lineno}: expected 'filename<TAB>label'")
        entries.append((parts[0], parts[1]))
    return entries


def map_label(label: str, mode: str, filename: str) -> str:
    if label not in THREE_CATEGORY_CLASSES:
        raise ValueError(f"{filename}: label {label!r} outside {THREE_CATEGORY_CLASSES}")
    if mode == "two":
        return "A" if label == "A" else "notA"
    return label


def patch_descriptors(png_path: Path, params: DsiftParams):
    """Descriptors of a whole patch file (the patch is its own ROI)."""
    with Image.open(png_path) as im:
        rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
    frame = RgbFrame(0, 0, rgb.shape[1], rgb.shape[0], rgb)
    gray = to_gray(frame, RoiSpec(0, 0, frame.width, frame.height))
    return extract_dsift(gray, params)


@dataclass(frozen=True)
class TrainedArtifacts:
    vocab_path: Path
    scaler_path: Path
    model_path: Path
    word_count: int
    cv: CvReport


def train_from_directory(dataset_dir: str | Path, out_dir: str | Path,
                         config: TrainConfig = TrainConfig()) -> TrainedArtifacts:
    """Full offline chain: descriptors, vocabulary, scaler, CV'd SVM.

    Writes vocab.tree, scaler.range and model-<mode>.json into out_dir; the
    model embeds the fingerprints of the exact artifact files it was trained
    against.
    """
    dataset_dir = Path(dataset_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    classes = TWO_CATEGORY_CLASSES if config.mode == "two" else THREE_CATEGORY_CLASSES
    entries = read_manifest(dataset_dir)
    if not entries:
        raise ValueError(f"{dataset_dir}: manifest lists no patches")

    labels = []
    descriptor_sets = []
    for filename, raw_label in entries:
        label = map_label(raw_label, config.mode, filename)
        labels.append(classes.index(label))
        descriptor_sets.append(patch_descriptors(dataset_dir / filename, config.dsift).descriptors)
    labels = np.array(labels)
    log.info("extracted descriptors for %d patches", len(entries))

    corpus = np.vstack(descriptor_sets)
    if len(corpus) > config.vocab_corpus_cap:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([config.seed, 0xC0])))
        pick = rng.choice(len(corpus), size=config.vocab_corpus_cap, replace=False)
        corpus = corpus[np.sort(pick)]
    tree = train_tree(corpus, config.vocab)
    vocab_path = out / "vocab.tree"
    save_tree(vocab_path, tree)
    log.info("vocabulary: %d words (%d nodes)", tree.word_count, tree.node_count)

    histograms = [
        build_histogram(quantize_batch(tree, d), tree.word_count) for d in descriptor_sets
    ]
    scaler = fit_scaler(histograms, normalized=config.l1_normalize)
    scaler_path = out / "scaler.range"
    save_scaler(scaler_path, scaler)

    features = np.vstack([apply_scaler(h, scaler) for h in histograms])
    model = train_model(
        features, labels, classes, seed=config.seed,
        vocab_fingerprint=file_fingerprint(vocab_path),
        scaler_fingerprint=file_fingerprint(scaler_path),
    )
    model_path = out / f"model-{config.mode}.json"
    save_model(model_path, model)
    return TrainedArtifacts(
        vocab_path=vocab_path, scaler_path=scaler_path, model_path=model_path,
        word_count=tree.word_count,
        cv=CvReport(chosen_c=model.penalty_c, table=model.cv_table),
    )


def classify_patch(png_path: str | Path, bundle, dsift_params: DsiftParams = DsiftParams()):
    """Label + probabilities for a single patch file."""
    descriptors = patch_descriptors(Path(png_path), dsift_params)
    words = quantize_batch(bundle.tree, descriptors.descriptors)
    hist = build_histogram(words, bundle.tree.word_count)
    scaled = apply_scaler(hist, bundle.scaler)
    from .svm import predict_proba

    return predict_proba(bundle.model, scaled)
