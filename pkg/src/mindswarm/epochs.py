"""Trial segmentation around event markers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .recording import PARADIGM_LABELS, Recording

# Imagery-period windows per paradigm, seconds relative to marker onset.
DEFAULT_WINDOWS = {"MI": (0.0, 4.0), "VI": (0.0, 3.0), "SI": (0.0, 2.0)}


class EpochWindowError(ValueError):
    pass


@dataclass
class EpochSet:
    """trials x channels x time tensor with per-trial labels."""

    data: np.ndarray
    labels: tuple
    paradigm: str
    window: tuple
    sample_rate: float

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3:
            raise ValueError("epoch data must be trials x channels x time")
        self.labels = tuple(self.labels)
        if len(self.labels) != self.data.shape[0]:
            raise ValueError(
                f"{len(self.labels)} labels for {self.data.shape[0]} trials"
            )

    @property
    def n_trials(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    @property
    def n_times(self) -> int:
        return self.data.shape[2]

    def class_counts(self) -> dict:
        counts = {}
        for lab in self.labels:
            counts[lab] = counts.get(lab, 0) + 1
        return counts

    def classes(self) -> tuple:
        """Present classes in the paradigm's canonical order."""
        present = set(self.labels)
        return tuple(c for c in PARADIGM_LABELS[self.paradigm] if c in present)


def epoch(rec: Recording, window: tuple, paradigm: str):
    """Cut one trial per marker of ``paradigm``.

    Trial t covers samples [marker + start*fs, marker + end*fs). Markers whose
    window falls outside the recording are returned in the exclusion list
    rather than silently dropped.

    Returns
    -------
    (EpochSet, list[EventMarker])
    """
    start_s, end_s = float(window[0]), float(window[1])
    if end_s <= start_s:
        raise EpochWindowError(f"empty window {window}: end must exceed start")
    fs = rec.sample_rate
    start_off = int(round(start_s * fs))
    end_off = int(round(end_s * fs))
    if end_off <= start_off:
        raise EpochWindowError(f"window {window} spans no samples at {fs} Hz")

    markers = rec.events_of(paradigm)
    kept, labels, excluded = [], [], []
    for ev in markers:
        lo = ev.sample_index + start_off
        hi = ev.sample_index + end_off
        if lo < 0 or hi > rec.n_samples:
            excluded.append(ev)
            continue
        kept.append(rec.samples[:, lo:hi])
        labels.append(ev.label)

    n_times = end_off - start_off
    data = (
        np.stack(kept)
        if kept
        else np.empty((0, rec.n_channels, n_times))
    )
    eset = EpochSet(
        data=data,
        labels=tuple(labels),
        paradigm=paradigm,
        window=(start_s, end_s),
        sample_rate=fs,
    )
    return eset, excluded
