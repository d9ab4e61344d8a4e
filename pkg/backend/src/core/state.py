from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List

from typing_extensions import TypedDict


class StageResult(TypedDict, total=False):
    """
    Summary a stage returns to the CLI.

    Only ``stage`` and ``outputs`` are always present; the rest are
    stage-specific extras.
    """

    stage: str  # "split", "extract", "train", "predict", "synth", "eval", "mushra"
    outputs: List[str]  # artifact paths written by the stage
    utterances: int
    warnings: List[str]

    # train: network name -> {"best_epoch": ..., "stopped_epoch": ...}
    epochs: Dict[str, Dict[str, int]]

    # eval
    mean_mcd: float


@dataclass(frozen=True)
class ArtifactLayout:
    """Where every stage reads and writes, relative to the output root."""

    root: Path

    @property
    def split_manifest(self) -> Path:
        return self.root / "split.tsv"

    def extract_dir(self, utt: str) -> Path:
        return self.root / "extract" / utt

    def images(self, utt: str) -> Path:
        return self.extract_dir(utt) / "images.npy"

    def target(self, utt: str, features: str) -> Path:
        suffix = "mel" if features == "mel" else "cvp"
        return self.extract_dir(utt) / f"target.{suffix}"

    def reference_wav(self, utt: str) -> Path:
        return self.extract_dir(utt) / "reference.wav"

    def model(self, name: str) -> Path:
        return self.root / "models" / f"{name}.cnn1"

    def training_log(self, name: str) -> Path:
        return self.root / "models" / f"{name}.train.tsv"

    def prediction(self, utt: str, features: str) -> Path:
        suffix = "mel" if features == "mel" else "cvp"
        return self.root / "predict" / f"{utt}.{suffix}"

    def plot_data(self, utt: str) -> Path:
        return self.root / "predict" / f"{utt}.plot.tsv"

    def synth_wav(self, engine: str, utt: str) -> Path:
        return self.root / "synth" / engine / f"{utt}.wav"

    def conditioning(self, utt: str) -> Path:
        return self.root / "synth" / "export" / f"{utt}.mel"

    def mcd_report(self, engine: str, domain: str) -> Path:
        return self.root / "eval" / f"mcd_{engine}_{domain}.tsv"

    def mushra_summary(self, group: str = "all") -> Path:
        return self.root / "eval" / f"mushra_summary_{group}.tsv"

    @property
    def mushra_pairwise(self) -> Path:
        return self.root / "eval" / "mushra_pairwise.tsv"
