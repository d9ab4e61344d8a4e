# backend/data_ingestion/ingest_pipeline.py

"""
Ingestion stages:

1. split   - discover <utt>.bin/.meta/.wav triples under corpus_root and
             write the train/val/test manifest
2. extract - per utterance: read + align both streams, resize ultrasound
             frames to the CNN grid, compute the training target
             (mel-spectrogram or continuous vocoder parameters)
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, List, Sequence, TypeVar

import numpy as np

from backend.features.spectral import MelSpectrogram, mel_spectrogram, save_mel
from backend.src.core.config import PipelineConfig
from backend.src.core.errors import FormatError, PipelineError
from backend.src.core.state import ArtifactLayout, StageResult
from backend.vocoder.params import ContParams, analyze_contparams, save_contparams
from .audio import align_frames, read_wav, write_wav
from .splitting import read_split_manifest, split_dataset, write_split_manifest
from .ultrasound import read_ultrasound, resize_sequence

logger = logging.getLogger(__name__)

T = TypeVar("T")


def map_utterances(fn: Callable[[str], T], utterances: Sequence[str], jobs: int = 1) -> List[T]:
    """Run fn per utterance; results keep the input order whatever the job count."""
    if jobs <= 1 or len(utterances) <= 1:
        return [fn(utt) for utt in utterances]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, utterances))


def require(path: Path, what: str) -> Path:
    if not path.exists():
        raise PipelineError(f"Missing {what}: {path} (run the upstream stage first)")
    return path


def discover_utterances(corpus_root: Path | str) -> List[str]:
    """Utterance ids that have an ultrasound container and a WAV file."""
    root = Path(corpus_root)
    ids = sorted(p.stem for p in root.glob("*.bin") if (root / f"{p.stem}.wav").exists())
    orphans = sorted(p.stem for p in root.glob("*.bin") if p.stem not in ids)
    if orphans:
        logger.warning("Skipping %d containers without audio: %s", len(orphans), orphans[:5])
    return ids


def load_images(path: Path | str) -> np.ndarray:
    path = require(Path(path), "ultrasound images")
    try:
        images = np.load(path, allow_pickle=False)
    except ValueError as e:
        raise FormatError(f"{path}: not a valid .npy array ({e})") from e
    if images.ndim != 3:
        raise FormatError(f"{path}: expected (T, H, W) images, got shape {images.shape}")
    return images


# ---------- Stages ----------

def cmd_split(cfg: PipelineConfig) -> StageResult:
    layout = ArtifactLayout(cfg.paths.output_root)
    ids = discover_utterances(cfg.paths.corpus_root)
    split = split_dataset(ids, seed=cfg.seeds.split, ratios=cfg.split_ratios)
    path = write_split_manifest(split, layout.split_manifest)
    return {"stage": "split", "outputs": [str(path)], "utterances": len(ids)}


def extract_utterance(cfg: PipelineConfig, utt: str) -> List[Path]:
    layout = ArtifactLayout(cfg.paths.output_root)
    corpus = Path(cfg.paths.corpus_root)
    us = read_ultrasound(require(corpus / f"{utt}.bin", "ultrasound container"))
    wav = read_wav(require(corpus / f"{utt}.wav", "audio"))
    aligned = align_frames(us, wav, cfg.hop)
    count = aligned.frame_count

    arch = cfg.architecture
    images = resize_sequence(aligned.ultrasound, arch.input_height, arch.input_width)
    images_path = layout.images(utt)
    images_path.parent.mkdir(parents=True, exist_ok=True)
    np.save(images_path, images, allow_pickle=False)

    target_path = layout.target(utt, cfg.features)
    if cfg.features == "mel":
        mel = mel_spectrogram(aligned.waveform, cfg.stft)
        save_mel(MelSpectrogram(mel.values[:count], mel.hop, mel.sample_rate), target_path)
    else:
        params = analyze_contparams(aligned.waveform, cfg.mgc)
        records = params.to_records()[:count]
        save_contparams(ContParams.from_records(records, params.order), target_path)

    wav_path = write_wav(aligned.waveform, layout.reference_wav(utt))
    logger.info("Extracted %s: %d frames", utt, count)
    return [images_path, target_path, wav_path]


def cmd_extract(cfg: PipelineConfig, jobs: int = 1) -> StageResult:
    layout = ArtifactLayout(cfg.paths.output_root)
    split = read_split_manifest(require(layout.split_manifest, "split manifest"))
    utterances = split.all_ids()
    outputs = map_utterances(lambda utt: extract_utterance(cfg, utt), utterances, jobs)
    return {
        "stage": "extract",
        "outputs": [str(p) for paths in outputs for p in paths],
        "utterances": len(utterances),
    }
