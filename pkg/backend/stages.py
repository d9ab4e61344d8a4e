"""
Modelling and evaluation stages: train, predict, synth, eval, mushra.

The mel pipeline trains one network (D = 80). The continuous vocoder pipeline
trains a spectral network (gain + LSPs) and an excitation network
(log F0, log MVF) and merges their predictions into one CVP1 file.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.fft import dct

from backend.data_ingestion.audio import read_wav, write_wav
from backend.data_ingestion.ingest_pipeline import load_images, map_utterances, require
from backend.data_ingestion.splitting import read_split_manifest
from backend.evaluation.mcd import McdReport, align_lengths, mcd, waveform_mcd
from backend.evaluation.mushra import load_scores, pairwise_tests, summarize, write_pairwise, write_summary
from backend.features.normalization import fit_normalizer
from backend.features.spectral import MelSpectrogram, load_mel, save_mel
from backend.neural_map.model import CnnModel
from backend.neural_map.serialization import load_model, save_model
from backend.neural_map.training import train
from backend.postproc.griffin_lim import griffin_lim
from backend.postproc.mel_post import export_conditioning, postprocess_mel
from backend.src.core.config import PipelineConfig
from backend.src.core.errors import PipelineError
from backend.src.core.state import ArtifactLayout, StageResult
from backend.src.utils.data_utils import write_tsv
from backend.vocoder.mgc import lsp_to_mgc
from backend.vocoder.params import ContParams, load_contparams, save_contparams
from backend.vocoder.synthesis import synthesize

logger = logging.getLogger(__name__)

ENGINES = ("contvoc", "griffinlim", "export")


# ---------- Targets ----------

def load_targets(cfg: PipelineConfig, utt: str) -> Dict[str, np.ndarray]:
    """Network name -> (T, D) target matrix for one utterance."""
    path = require(ArtifactLayout(cfg.paths.output_root).target(utt, cfg.features), "target features")
    if cfg.features == "mel":
        return {"mel": load_mel(path).values.astype(np.float64)}
    records = load_contparams(path).to_records()
    spectral = cfg.mgc.order + 1
    return {"spectral": records[:, :spectral], "excitation": records[:, spectral:]}


def _stack(cfg: PipelineConfig, utterances, name: str) -> Tuple[np.ndarray, np.ndarray]:
    layout = ArtifactLayout(cfg.paths.output_root)
    images, targets = [], []
    for utt in utterances:
        frames = load_images(layout.images(utt))
        target = load_targets(cfg, utt)[name]
        if frames.shape[0] != target.shape[0]:
            raise PipelineError(
                f"{utt}: {frames.shape[0]} images but {target.shape[0]} target frames", code="length-mismatch"
            )
        images.append(frames)
        targets.append(target)
    return np.concatenate(images), np.concatenate(targets)


# ---------- Train ----------

def cmd_train(cfg: PipelineConfig) -> StageResult:
    layout = ArtifactLayout(cfg.paths.output_root)
    split = read_split_manifest(require(layout.split_manifest, "split manifest"))
    outputs: List[str] = []
    warnings: List[str] = []
    epochs: Dict[str, Dict[str, int]] = {}
    result: StageResult = {
        "stage": "train", "outputs": outputs, "utterances": len(split.train),
        "warnings": warnings, "epochs": epochs,
    }

    for name, dim in cfg.output_dims.items():
        train_x, train_y = _stack(cfg, split.train, name)
        val_x, val_y = _stack(cfg, split.validation, name)
        normalizer = fit_normalizer([train_y])
        if normalizer.constant_dims:
            warnings.append(f"{name}: constant target dims {list(normalizer.constant_dims)} (std floored)")
        model = CnnModel(cfg.architecture_for(dim), seed=cfg.seeds.train, target_normalizer=normalizer)
        logger.info("Training %s network on %d frames (%d validation)", name, train_x.shape[0], val_x.shape[0])
        history = train(model, train_x, train_y, val_x, val_y, cfg.train, log_path=layout.training_log(name))
        outputs += [str(save_model(model, layout.model(name))), str(layout.training_log(name))]
        epochs[name] = {"best_epoch": history.best_epoch, "stopped_epoch": history.stopped_epoch}
    return result


# ---------- Predict ----------

def _plot_rows(models: Dict[str, CnnModel], original: Dict[str, np.ndarray], predicted: Dict[str, np.ndarray]):
    rows = []
    offset = 0
    for name, model in models.items():
        norm = model.target_normalizer
        ref = norm.apply(original[name]) if norm is not None else original[name]
        est = norm.apply(predicted[name]) if norm is not None else predicted[name]
        frames = min(ref.shape[0], est.shape[0])
        for t in range(frames):
            for d in range(ref.shape[1]):
                rows.append((t, offset + d, float(ref[t, d]), float(est[t, d])))
        offset += ref.shape[1]
    return rows


def cmd_predict(cfg: PipelineConfig, jobs: int = 1, plot_data: Optional[str] = None) -> StageResult:
    layout = ArtifactLayout(cfg.paths.output_root)
    split = read_split_manifest(require(layout.split_manifest, "split manifest"))
    models = {name: load_model(require(layout.model(name), f"{name} model")) for name in cfg.output_dims}
    for name, model in models.items():
        if model.architecture.output_dim != cfg.output_dims[name]:
            raise PipelineError(
                f"{name} model predicts {model.architecture.output_dim} dims, config expects {cfg.output_dims[name]}",
                code="length-mismatch",
            )

    def predict_one(utt: str) -> List[Path]:
        frames = load_images(layout.images(utt))
        predicted = {name: model.predict_sequence(frames) for name, model in models.items()}
        out_path = layout.prediction(utt, cfg.features)
        if cfg.features == "mel":
            save_mel(MelSpectrogram.clamped(predicted["mel"], cfg.hop, cfg.sample_rate), out_path)
        else:
            records = np.concatenate([predicted["spectral"], predicted["excitation"]], axis=1)
            save_contparams(ContParams.repaired(records, cfg.mgc.order), out_path)
        written = [out_path]
        if plot_data == utt:
            rows = _plot_rows(models, load_targets(cfg, utt), predicted)
            written.append(write_tsv(layout.plot_data(utt), ("frame", "dim", "original", "predicted"), rows))
        return written

    if plot_data is not None and plot_data not in split.all_ids():
        raise PipelineError(f"--plot-data utterance {plot_data!r} is not in the split manifest", code="invalid-argument")
    utterances = list(split.test)
    if plot_data is not None and plot_data not in utterances:
        utterances.append(plot_data)
    outputs = map_utterances(predict_one, utterances, jobs)
    return {"stage": "predict", "outputs": [str(p) for paths in outputs for p in paths], "utterances": len(utterances)}


# ---------- Synth ----------

def engine_label(engine: str, anchor: bool = False, copy: bool = False) -> str:
    if engine not in ENGINES:
        raise PipelineError(f"Unknown engine {engine!r}; choose from {ENGINES}", code="invalid-argument")
    if engine != "contvoc" and (anchor or copy):
        raise PipelineError("--anchor and --copy apply to the contvoc engine only", code="invalid-argument")
    if anchor and copy:
        raise PipelineError("--anchor and --copy are mutually exclusive", code="invalid-argument")
    return engine + ("-anchor" if anchor else "") + ("-copy" if copy else "")


def cmd_synth(cfg: PipelineConfig, engine: str, jobs: int = 1, anchor: bool = False, copy: bool = False) -> StageResult:
    label = engine_label(engine, anchor, copy)
    wanted = "contvoc" if engine == "contvoc" else "mel"
    if cfg.features != wanted:
        raise PipelineError(f"Engine {engine} needs features={wanted}, config has {cfg.features}", code="invalid-argument")

    layout = ArtifactLayout(cfg.paths.output_root)
    split = read_split_manifest(require(layout.split_manifest, "split manifest"))

    def synth_one(utt: str) -> Path:
        if engine == "contvoc":
            source = layout.target(utt, cfg.features) if copy else layout.prediction(utt, cfg.features)
            params = load_contparams(require(source, "vocoder parameters"))
            constant_f0 = float(np.exp(np.median(params.log_f0))) if anchor else None
            wav = synthesize(params, cfg.mgc, seed=cfg.seeds.synth, constant_f0=constant_f0)
            return write_wav(wav, layout.synth_wav(label, utt))

        mel = postprocess_mel(load_mel(require(layout.prediction(utt, cfg.features), "predicted mel")), cfg.smoothing)
        if engine == "export":
            return export_conditioning(mel, layout.conditioning(utt))
        result = griffin_lim(mel, iterations=cfg.griffin_lim_iterations, seed=cfg.seeds.griffin_lim)
        return write_wav(result.waveform, layout.synth_wav(label, utt))

    outputs = map_utterances(synth_one, list(split.test), jobs)
    return {"stage": "synth", "outputs": [str(p) for p in outputs], "utterances": len(outputs)}


# ---------- Eval ----------

MEL_CEPSTRUM_DIMS = 25


def feature_cepstra(cfg: PipelineConfig, path: Path) -> np.ndarray:
    """Cepstral matrix for feature-domain MCD (coefficient 0 carries the energy)."""
    if cfg.features == "mel":
        values = load_mel(path).values.astype(np.float64)
        return dct(values, type=2, norm="ortho", axis=1)[:, :MEL_CEPSTRUM_DIMS]
    params = load_contparams(path)
    return np.stack([lsp_to_mgc(lsp, g, cfg.mgc) for g, lsp in zip(params.gain, params.lsp)])


def cmd_eval(
    cfg: PipelineConfig,
    engine: str = "griffinlim",
    domain: str = "audio",
    jobs: int = 1,
    ref_dir: Optional[Path] = None,
    test_dir: Optional[Path] = None,
) -> StageResult:
    """
    MCD per test utterance. With ref_dir/test_dir, compares every WAV of
    ref_dir with the same-named WAV in test_dir instead.
    """
    layout = ArtifactLayout(cfg.paths.output_root)
    if domain not in ("audio", "features"):
        raise PipelineError(f"Unknown MCD domain {domain!r}", code="invalid-argument")

    if ref_dir is not None or test_dir is not None:
        if ref_dir is None or test_dir is None or domain != "audio":
            raise PipelineError("--ref-dir and --test-dir go together and need domain=audio", code="invalid-argument")
        utterances = sorted(p.stem for p in Path(ref_dir).glob("*.wav"))
        pairs = {u: (Path(ref_dir) / f"{u}.wav", Path(test_dir) / f"{u}.wav") for u in utterances}
        report_path = layout.root / "eval" / "mcd_dirs_audio.tsv"
    else:
        split = read_split_manifest(require(layout.split_manifest, "split manifest"))
        utterances = list(split.test)
        if domain == "audio":
            pairs = {u: (layout.reference_wav(u), layout.synth_wav(engine, u)) for u in utterances}
        else:
            pairs = {u: (layout.target(u, cfg.features), layout.prediction(u, cfg.features)) for u in utterances}
        report_path = layout.mcd_report(engine, domain)

    def score(utt: str) -> Tuple[float, int]:
        ref_path, test_path = pairs[utt]
        require(ref_path, "reference")
        require(test_path, "test output")
        if domain == "audio":
            return waveform_mcd(read_wav(ref_path), read_wav(test_path), cfg.mgc)
        ref, test = align_lengths(feature_cepstra(cfg, ref_path), feature_cepstra(cfg, test_path))
        return mcd(ref, test), ref.shape[0]

    report = McdReport()
    for utt, (value, frames) in zip(utterances, map_utterances(score, utterances, jobs)):
        report.add(utt, value, frames)
    path = report.write(report_path)
    logger.info("Mean MCD over %d utterances: %.3f dB", len(utterances), report.mean)
    return {"stage": "eval", "outputs": [str(path)], "utterances": len(utterances), "mean_mcd": report.mean}


# ---------- MUSHRA ----------

def cmd_mushra(cfg: PipelineConfig, scores_path: Path | str) -> StageResult:
    layout = ArtifactLayout(cfg.paths.output_root)
    ratings = load_scores(scores_path)
    outputs = [str(write_summary(summarize(ratings), layout.mushra_summary()))]

    speakers = sorted({r.speaker for r in ratings if r.speaker is not None})
    for speaker in speakers:
        group = [r for r in ratings if r.speaker == speaker]
        outputs.append(str(write_summary(summarize(group), layout.mushra_summary(speaker))))

    outputs.append(str(write_pairwise(pairwise_tests(ratings), layout.mushra_pairwise)))
    return {"stage": "mushra", "outputs": outputs, "utterances": len({r.sentence for r in ratings})}
