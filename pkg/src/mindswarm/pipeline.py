"""One-vs-rest multiclass decoder: per-class CSP filters + LDA discriminants.

The pipeline bundle file starts with magic ``BCIP``, a u16 version and a
length-prefixed JSON header (paradigm, classes, preprocessing config, seed,
block directory), followed by raw little-endian f32 matrix blocks in
directory order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, asdict

import numpy as np

from .csp import (
    CspModel,
    fit_csp_from_covariances,
    features_from_covariance,
    stack_covariances,
    trial_covariance,
)
from .epochs import DEFAULT_WINDOWS, EpochSet
from .lda import LdaModel, fit_lda
from .recording import PARADIGM_LABELS

BUNDLE_MAGIC = b"BCIP"
BUNDLE_VERSION = 1

DEFAULT_SEED = 1234


class PipelineError(ValueError):
    pass


class PipelineFormatError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class PipelineConfig:
    """Preprocessing and model hyperparameters shared by all class models."""

    paradigm: str
    band: tuple = (8.0, 30.0)
    window: tuple | None = None
    sample_rate: float = 100.0
    n_pairs: int = 3
    shrinkage: float = 0.05
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.paradigm not in PARADIGM_LABELS:
            raise PipelineError(f"unknown paradigm {self.paradigm!r}")
        if self.window is None:
            object.__setattr__(self, "window", DEFAULT_WINDOWS[self.paradigm])
        object.__setattr__(self, "band", (float(self.band[0]), float(self.band[1])))
        object.__setattr__(self, "window", (float(self.window[0]), float(self.window[1])))


@dataclass
class OvrPipeline:
    config: PipelineConfig
    class_list: tuple
    models: tuple  # ((CspModel, LdaModel), ...) aligned with class_list

    @property
    def paradigm(self) -> str:
        return self.config.paradigm

    def scores_from_covariance(self, cov: np.ndarray) -> np.ndarray:
        out = np.empty(len(self.class_list))
        for k, (csp_model, lda_model) in enumerate(self.models):
            out[k] = lda_model.score(features_from_covariance(csp_model, cov))
        return out


def fit_pipeline(epochs: EpochSet, config: PipelineConfig) -> OvrPipeline:
    """Fit one (CSP, LDA) pair per present class, class against rest."""
    class_list = epochs.classes()
    if len(class_list) < 2:
        raise PipelineError(f"need >= 2 classes, got {class_list}")
    counts = epochs.class_counts()
    for cls in class_list:
        if counts[cls] < 2 * config.n_pairs:
            raise PipelineError(
                f"class {cls!r} has {counts[cls]} trials, need >= {2 * config.n_pairs}"
            )
    covs = stack_covariances(epochs)
    models = _fit_ovr(covs, epochs.labels, class_list, config)
    return OvrPipeline(config=config, class_list=class_list, models=models)


def _fit_ovr(covs: np.ndarray, labels, class_list, config: PipelineConfig):
    labels = np.asarray(labels)
    models = []
    for cls in class_list:
        try:
            csp_model = fit_csp_from_covariances(covs, labels, cls, config.n_pairs)
            feats = np.stack(
                [features_from_covariance(csp_model, c) for c in covs]
            )
            lda_model = fit_lda(feats, labels == cls, config.shrinkage)
        except ValueError as exc:
            raise PipelineError(f"fitting class {cls!r}: {exc}") from exc
        models.append((csp_model, lda_model))
    return tuple(models)


def softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max()
    e = np.exp(z)
    return e / e.sum()


def predict(pipeline: OvrPipeline, trial: np.ndarray):
    """Classify one channels x time trial.

    Returns (label, confidence, score_vector); label is the argmax of the
    per-class discriminant scores with ties broken by class-list order, and
    confidence is the softmax of the scores at the winning index.
    """
    trial = np.asarray(trial, dtype=np.float64)
    expected_ch = pipeline.models[0][0].filters.shape[1]
    if trial.ndim != 2 or trial.shape[0] != expected_ch:
        raise PipelineError(
            f"trial shape {trial.shape} does not match pipeline ({expected_ch} channels)"
        )
    cfg = pipeline.config
    expected_t = int(round((cfg.window[1] - cfg.window[0]) * cfg.sample_rate))
    if trial.shape[1] != expected_t:
        raise PipelineError(
            f"trial has {trial.shape[1]} samples, pipeline window expects {expected_t}"
        )
    scores = pipeline.scores_from_covariance(trial_covariance(trial))
    winner = int(np.argmax(scores))
    confidence = float(softmax(scores)[winner])
    return pipeline.class_list[winner], confidence, scores


def predict_epochs(pipeline: OvrPipeline, epochs: EpochSet):
    """Vector of predicted labels for every trial in an epoch set."""
    out = []
    for trial in epochs.data:
        label, _, _ = predict(pipeline, trial)
        out.append(label)
    return out


# --- bundle serialization ---------------------------------------------------


def _pipeline_blocks(pipeline: OvrPipeline):
    blocks = []
    for cls, (csp_model, lda_model) in zip(pipeline.class_list, pipeline.models):
        blocks.append((f"csp/{cls}/filters", csp_model.filters))
        blocks.append((f"csp/{cls}/eigenvalues", csp_model.eigenvalues))
        blocks.append((f"lda/{cls}/weights", lda_model.weights))
        blocks.append((f"lda/{cls}/bias", np.array([lda_model.bias])))
        blocks.append((f"lda/{cls}/class_means", lda_model.class_means))
    return blocks


def save_pipeline(pipeline: OvrPipeline, path) -> None:
    blocks = _pipeline_blocks(pipeline)
    header = {
        "paradigm": pipeline.config.paradigm,
        "classes": list(pipeline.class_list),
        "config": {
            "band": list(pipeline.config.band),
            "window": list(pipeline.config.window),
            "sample_rate": pipeline.config.sample_rate,
            "n_pairs": pipeline.config.n_pairs,
            "shrinkage": pipeline.config.shrinkage,
        },
        "seed": pipeline.config.seed,
        "ridge_applied": [bool(lda.ridge_applied) for _, lda in pipeline.models],
        "blocks": [{"name": name, "shape": list(arr.shape)} for name, arr in blocks],
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(BUNDLE_MAGIC)
        fh.write(struct.pack("<H", BUNDLE_VERSION))
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for _, arr in blocks:
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_pipeline(path) -> OvrPipeline:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 10:
        raise PipelineFormatError("truncated", "file shorter than fixed header")
    if blob[:4] != BUNDLE_MAGIC:
        raise PipelineFormatError("bad_magic", f"expected {BUNDLE_MAGIC!r}")
    (version,) = struct.unpack_from("<H", blob, 4)
    if version != BUNDLE_VERSION:
        raise PipelineFormatError("bad_version", f"unsupported bundle version {version}")
    (header_len,) = struct.unpack_from("<I", blob, 6)
    header_end = 10 + header_len
    if len(blob) < header_end:
        raise PipelineFormatError("truncated", "header extends past end of file")
    try:
        header = json.loads(blob[10:header_end].decode("utf-8"))
        cfg = header["config"]
        config = PipelineConfig(
            paradigm=header["paradigm"],
            band=tuple(cfg["band"]),
            window=tuple(cfg["window"]),
            sample_rate=float(cfg["sample_rate"]),
            n_pairs=int(cfg["n_pairs"]),
            shrinkage=float(cfg["shrinkage"]),
            seed=int(header["seed"]),
        )
        classes = [str(c) for c in header["classes"]]
        directory = header["blocks"]
        ridge_flags = header.get("ridge_applied", [False] * len(classes))
    except (KeyError, ValueError, TypeError) as exc:
        raise PipelineFormatError("bad_header", f"malformed header: {exc}") from exc

    arrays = {}
    offset = header_end
    for entry in directory:
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 4
        if offset + nbytes > len(blob):
            raise PipelineFormatError("truncated", f"block {entry['name']} cut short")
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
        arrays[entry["name"]] = arr.reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(blob):
        raise PipelineFormatError("size_mismatch", "trailing bytes after last block")

    models = []
    try:
        for cls, ridge in zip(classes, ridge_flags):
            csp_model = CspModel(
                target_class=cls,
                filters=arrays[f"csp/{cls}/filters"],
                eigenvalues=arrays[f"csp/{cls}/eigenvalues"],
                n_pairs=config.n_pairs,
            )
            lda_model = LdaModel(
                weights=arrays[f"lda/{cls}/weights"],
                bias=float(arrays[f"lda/{cls}/bias"][0]),
                class_means=arrays[f"lda/{cls}/class_means"],
                shrinkage=config.shrinkage,
                ridge_applied=bool(ridge),
            )
            models.append((csp_model, lda_model))
    except KeyError as exc:
        raise PipelineFormatError("bad_header", f"missing block {exc}") from exc
    return OvrPipeline(config=config, class_list=tuple(classes), models=tuple(models))
