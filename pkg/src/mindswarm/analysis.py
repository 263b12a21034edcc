"""End-to-end preprocessing and evaluation used by the CLI.

Pipeline order: notch, downsample, ICA cleaning, analysis bandpass,
epoching, then either pipeline fitting or repeated cross-validation. The
decomposition is fit on a broadband (1-40 Hz) copy of the downsampled
recording and applied to the narrow analysis band.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .crossval import CvReport, cross_validate
from .epochs import DEFAULT_WINDOWS, EpochSet, epoch
from .filtering import apply_notch, bandpass_recording, downsample
from .ica import (
    DEFAULT_CORR_THRESHOLD,
    DEFAULT_PROXY_CHANNELS,
    fit_ica,
    flag_artifact_components,
    remove_components,
)
from .pipeline import DEFAULT_SEED, OvrPipeline, PipelineConfig, fit_pipeline
from .recording import Recording

ICA_FIT_BAND = (1.0, 40.0)


class AnalysisError(ValueError):
    pass


@dataclass
class PreprocessOptions:
    notch_hz: float | None = 60.0
    target_fs: float = 100.0
    band: tuple = (8.0, 30.0)
    run_ica: bool = True
    ica_components: int = 20
    ica_seed: int = DEFAULT_SEED
    proxy_channels: tuple = DEFAULT_PROXY_CHANNELS
    corr_threshold: float = DEFAULT_CORR_THRESHOLD


@dataclass
class PreprocessInfo:
    flagged_components: tuple = ()
    ica_converged: bool = True
    notch_applied: bool = False
    downsample_factor: int = 1


def preprocess(rec: Recording, opts: PreprocessOptions | None = None):
    """Clean one raw recording; returns (analysis Recording, PreprocessInfo)."""
    opts = opts or PreprocessOptions()
    info = PreprocessInfo()

    if opts.notch_hz is not None and opts.notch_hz < rec.sample_rate / 2.0:
        rec = apply_notch(rec, opts.notch_hz)
        info.notch_applied = True
    if rec.sample_rate != opts.target_fs:
        info.downsample_factor = int(round(rec.sample_rate / opts.target_fs))
        rec = downsample(rec, opts.target_fs)

    analysis = bandpass_recording(rec, opts.band)
    if opts.run_ica:
        n_comp = min(opts.ica_components, rec.n_channels)
        proxies = tuple(ch for ch in opts.proxy_channels if ch in rec.layout)
        if proxies:
            fit_copy = bandpass_recording(rec, ICA_FIT_BAND)
            model = fit_ica(fit_copy.samples, n_components=n_comp, seed=opts.ica_seed)
            flagged = flag_artifact_components(
                model, fit_copy, proxy_channels=proxies,
                corr_threshold=opts.corr_threshold,
            )
            info.flagged_components = tuple(flagged)
            info.ica_converged = model.converged
            if flagged:
                analysis = remove_components(model, analysis, flagged)
    return analysis, info


def epoch_for_paradigm(rec: Recording, paradigm: str, window: tuple | None = None):
    window = window or DEFAULT_WINDOWS[paradigm]
    return epoch(rec, window, paradigm)


def infer_paradigm(rec: Recording) -> str:
    paradigms = {e.paradigm for e in rec.events}
    if len(paradigms) != 1:
        raise AnalysisError(
            f"recording has markers for {sorted(paradigms) or 'no'} paradigms; "
            "pass one explicitly"
        )
    return paradigms.pop()


def evaluate_recording(
    rec: Recording,
    paradigm: str | None = None,
    window: tuple | None = None,
    preprocess_opts: PreprocessOptions | None = None,
    config: PipelineConfig | None = None,
    k: int = 5,
    repeats: int = 5,
    seed: int | None = None,
    shuffle_labels: bool = False,
) -> CvReport:
    """Full evaluation path from a raw recording to a CvReport."""
    paradigm = paradigm or infer_paradigm(rec)
    preprocess_opts = preprocess_opts or PreprocessOptions()
    cleaned, _ = preprocess(rec, preprocess_opts)
    epochs, _ = epoch_for_paradigm(cleaned, paradigm, window)
    if config is None:
        config = PipelineConfig(
            paradigm=paradigm,
            band=preprocess_opts.band,
            window=window or DEFAULT_WINDOWS[paradigm],
            sample_rate=preprocess_opts.target_fs,
            seed=DEFAULT_SEED if seed is None else seed,
        )
    if shuffle_labels:
        rng = np.random.default_rng(config.seed + 99991)
        labels = list(epochs.labels)
        rng.shuffle(labels)
        epochs = EpochSet(
            data=epochs.data, labels=tuple(labels), paradigm=epochs.paradigm,
            window=epochs.window, sample_rate=epochs.sample_rate,
        )
    return cross_validate(epochs, config, k=k, repeats=repeats, seed=seed)


def train_pipeline_on_recording(
    rec: Recording,
    paradigm: str | None = None,
    window: tuple | None = None,
    preprocess_opts: PreprocessOptions | None = None,
    config: PipelineConfig | None = None,
) -> OvrPipeline:
    """Fit an OVR pipeline on every trial of a raw recording."""
    paradigm = paradigm or infer_paradigm(rec)
    preprocess_opts = preprocess_opts or PreprocessOptions()
    cleaned, _ = preprocess(rec, preprocess_opts)
    epochs, _ = epoch_for_paradigm(cleaned, paradigm, window)
    if config is None:
        config = PipelineConfig(
            paradigm=paradigm,
            band=preprocess_opts.band,
            window=window or DEFAULT_WINDOWS[paradigm],
            sample_rate=preprocess_opts.target_fs,
        )
    return fit_pipeline(epochs, config)
