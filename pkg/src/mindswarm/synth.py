"""Synthetic multichannel sessions with class-dependent band-limited sources.

Each discriminative source is band-passed white noise projected through a
fixed spatial pattern; during a trial's imagery window its variance is
scaled by that class's multiplier, which is exactly the structure CSP
recovers. Background sources, frontal blink bumps and per-channel sensor
noise are layered on top. Everything derives from one seeded generator in a
fixed consumption order, so identical specs produce bit-identical output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .filtering import FilterSpec, design_butterworth, filtfilt
from .layout import ChannelLayout, compact_layout, default_layout
from .recording import PARADIGM_LABELS, EventMarker, Recording

DEFAULT_SEED = 1234


class SynthSpecError(ValueError):
    pass


@dataclass(frozen=True)
class TrialTiming:
    """Seconds from trial start to imagery onset, imagery length, trailing gap."""

    lead_s: float
    imagery_s: float
    gap_s: float = 0.0

    @property
    def trial_s(self) -> float:
        return self.lead_s + self.imagery_s + self.gap_s


# Cue/fixation structure ahead of the imagery window, per paradigm.
DEFAULT_TIMING = {
    "MI": TrialTiming(lead_s=5.5, imagery_s=4.0),
    "VI": TrialTiming(lead_s=11.0, imagery_s=3.0),
    "SI": TrialTiming(lead_s=3.0, imagery_s=2.0),
}

_SESSION_MARGIN_S = 2.0


@dataclass
class SourceSpec:
    """One latent source: unit-norm spatial pattern, band, per-class variance
    multipliers (classes absent from the map stay at baseline 1.0)."""

    pattern: np.ndarray
    band: tuple
    modulation: dict = field(default_factory=dict)
    amplitude: float = 5.0

    def __post_init__(self):
        self.pattern = np.asarray(self.pattern, dtype=np.float64)
        norm = float(np.linalg.norm(self.pattern))
        if norm <= 0:
            raise SynthSpecError("source pattern must be nonzero")
        self.pattern = self.pattern / norm
        for cls, mult in self.modulation.items():
            if mult <= 0:
                raise SynthSpecError(f"multiplier for {cls!r} must be > 0, got {mult}")


def channel_pattern(layout: ChannelLayout, weights: dict) -> np.ndarray:
    """Build a pattern vector from channel-name weights (missing names are
    skipped so the same recipe works on trimmed montages)."""
    vec = np.zeros(len(layout))
    for name, w in weights.items():
        if name in layout:
            vec[layout.index(name)] = w
    if not vec.any():
        raise SynthSpecError(f"no channel of {list(weights)} present in layout")
    return vec


# Focal patterns with a little spread to neighbors, per paradigm class.
_PATTERN_RECIPES = {
    "MI": {
        "left": {"C4": 1.0, "C2": 0.5, "C6": 0.5, "FC4": 0.4, "CP4": 0.4},
        "right": {"C3": 1.0, "C1": 0.5, "C5": 0.5, "FC3": 0.4, "CP3": 0.4},
        "up": {"Cz": 1.0, "C1": 0.5, "C2": 0.5, "FC1": 0.4, "FC2": 0.4},
        "down": {"POz": 1.0, "PO3": 0.5, "PO4": 0.5, "Pz": 0.4, "Oz": 0.3},
    },
    "VI": {
        "fall_in": {"O1": 1.0, "PO7": 0.5, "PO3": 0.5, "Oz": 0.3},
        "spread_out": {"O2": 1.0, "PO8": 0.5, "PO4": 0.5, "Oz": 0.3},
        "split": {"Oz": 1.0, "O1": 0.4, "O2": 0.4, "POz": 0.5},
    },
    "SI": {
        "go": {"F7": 1.0, "FT7": 0.5, "F5": 0.5, "AF7": 0.3},
        "stop": {"F8": 1.0, "FT8": 0.5, "F6": 0.5, "AF8": 0.3},
        "follow_me": {"T7": 1.0, "TP7": 0.5, "C5": 0.4, "FT7": 0.4},
        "return": {"T8": 1.0, "TP8": 0.5, "C6": 0.4, "FT8": 0.4},
    },
}

_SOURCE_BANDS = {"MI": (9.0, 13.0), "VI": (9.0, 13.0), "SI": (15.0, 25.0)}

# Frontal-dominant blink topography; parietal/occipital rows stay <= 0.05
# so planted blinks are >= 5x stronger at Fp1/Fp2 than over parietal sites.
def _blink_pattern(layout: ChannelLayout) -> np.ndarray:
    vec = np.empty(len(layout))
    for i, name in enumerate(layout.names):
        if name.startswith("Fp"):
            vec[i] = 1.0
        elif name.startswith("AF"):
            vec[i] = 0.55
        elif name.startswith(("FT", "FC")):
            vec[i] = 0.18
        elif name.startswith("F"):
            vec[i] = 0.32
        elif name.startswith(("C", "T")):
            vec[i] = 0.08
        else:
            vec[i] = 0.03
    return vec


@dataclass
class SynthSpec:
    paradigm: str
    classes: tuple = ()
    trials_per_class: int = 50
    fs: float = 1000.0
    layout: ChannelLayout = field(default_factory=default_layout)
    sources: tuple = ()
    background_count: int = 18
    background_band: tuple = (1.0, 45.0)
    background_amplitude: float = 3.0
    sensor_noise: float = 2.0
    timing: TrialTiming | None = None
    blink_rate_per_min: float = 4.0
    blink_amplitude: float = 120.0
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.paradigm not in PARADIGM_LABELS:
            raise SynthSpecError(f"unknown paradigm {self.paradigm!r}")
        if not self.classes:
            self.classes = PARADIGM_LABELS[self.paradigm]
        self.classes = tuple(self.classes)
        for cls in self.classes:
            if cls not in PARADIGM_LABELS[self.paradigm]:
                raise SynthSpecError(f"class {cls!r} not legal for {self.paradigm}")
        if self.trials_per_class < 1:
            raise SynthSpecError("trials_per_class must be >= 1")
        if self.sensor_noise < 0:
            raise SynthSpecError("sensor noise must be >= 0")
        if self.timing is None:
            self.timing = DEFAULT_TIMING[self.paradigm]
        if self.timing.lead_s < 0 or self.timing.gap_s < 0 or self.timing.imagery_s <= 0:
            raise SynthSpecError(
                f"invalid trial timing {self.timing}: windows would overlap"
            )
        if not self.sources:
            self.sources = default_sources(self.paradigm, self.layout, self.classes)
        self.sources = tuple(self.sources)
        for src in self.sources:
            if src.pattern.shape[0] != len(self.layout):
                raise SynthSpecError("source pattern length does not match layout")


def default_sources(
    paradigm: str, layout: ChannelLayout, classes, contrast: float = 4.0
) -> tuple:
    """One source per class, peaking where that class is most expressive."""
    recipes = _PATTERN_RECIPES[paradigm]
    band = _SOURCE_BANDS[paradigm]
    out = []
    for cls in classes:
        out.append(
            SourceSpec(
                pattern=channel_pattern(layout, recipes[cls]),
                band=band,
                modulation={cls: contrast},
            )
        )
    return tuple(out)


def compact_spec(paradigm: str, trials_per_class: int = 50, contrast: float = 4.0,
                 seed: int = DEFAULT_SEED, sensor_noise: float = 1.0) -> SynthSpec:
    """Small, fast preset for tests and demos: 16 channels, 200 Hz, short
    trials. The imagery window is 1 s, so decode with window (0, 1). Sources
    sit on a wider 8-16 Hz band than the full-session defaults so a 1 s
    window still carries enough variance-estimation degrees of freedom.
    """
    layout = compact_layout()
    classes = PARADIGM_LABELS[paradigm]
    sources = tuple(
        SourceSpec(
            pattern=src.pattern, band=(8.0, 16.0),
            modulation=src.modulation, amplitude=src.amplitude,
        )
        for src in default_sources(paradigm, layout, classes, contrast=contrast)
    )
    return SynthSpec(
        paradigm=paradigm,
        classes=classes,
        trials_per_class=trials_per_class,
        fs=200.0,
        layout=layout,
        sources=sources,
        background_count=6,
        background_amplitude=2.0,
        sensor_noise=sensor_noise,
        timing=TrialTiming(lead_s=0.5, imagery_s=1.0, gap_s=0.5),
        blink_rate_per_min=4.0,
        seed=seed,
    )


@dataclass
class SynthTruth:
    """Ground truth handed to oracles and artifact-removal tests."""

    labels: tuple
    marker_samples: np.ndarray
    imagery_samples: int
    blink_train: np.ndarray
    blink_pattern: np.ndarray
    source_patterns: np.ndarray  # (n_sources, channels)
    source_bands: tuple


def _bandlimited_noise(rng, n, band, fs):
    wave = rng.standard_normal(n)
    lo, hi = band
    nyq = fs / 2.0
    hi = min(hi, 0.95 * nyq)
    coeffs = design_butterworth(FilterSpec(kind="bandpass", band=(lo, hi), order=2), fs)
    wave = filtfilt(coeffs, wave)
    std = wave.std()
    return wave / std if std > 0 else wave


def generate_with_truth(spec: SynthSpec):
    """Build the session and return (Recording, SynthTruth)."""
    fs = spec.fs
    timing = spec.timing
    n_trials = spec.trials_per_class * len(spec.classes)
    trial_len = timing.trial_s
    duration = 2 * _SESSION_MARGIN_S + n_trials * trial_len
    n = int(round(duration * fs))
    n_channels = len(spec.layout)

    rng = np.random.default_rng(spec.seed)

    labels = np.repeat(np.array(spec.classes, dtype=object), spec.trials_per_class)
    rng.shuffle(labels)
    labels = tuple(labels)

    markers = np.array(
        [
            int(round((_SESSION_MARGIN_S + i * trial_len + timing.lead_s) * fs))
            for i in range(n_trials)
        ],
        dtype=np.int64,
    )
    imagery_samples = int(round(timing.imagery_s * fs))
    if markers[-1] + imagery_samples > n:
        raise SynthSpecError("trial windows overlap recording end")

    x = np.zeros((n_channels, n))

    for src in spec.sources:
        wave = _bandlimited_noise(rng, n, src.band, fs)
        env = np.ones(n)
        for m, lab in zip(markers, labels):
            mult = src.modulation.get(lab, 1.0)
            if mult != 1.0:
                env[m:m + imagery_samples] = np.sqrt(mult)
        x += (src.amplitude * src.pattern)[:, None] * (wave * env)[None, :]

    for _ in range(spec.background_count):
        pat = rng.standard_normal(n_channels)
        pat /= np.linalg.norm(pat)
        wave = _bandlimited_noise(rng, n, spec.background_band, fs)
        x += (spec.background_amplitude * pat)[:, None] * wave[None, :]

    blink_train = np.zeros(n)
    blink_pat = _blink_pattern(spec.layout)
    n_blinks = int(round(spec.blink_rate_per_min * duration / 60.0))
    if n_blinks > 0 and spec.blink_amplitude > 0:
        pulse_len = int(round(0.35 * fs))
        pulse = 0.5 * (1.0 - np.cos(2 * np.pi * np.arange(pulse_len) / pulse_len))
        starts = np.sort(rng.integers(0, n - pulse_len, size=n_blinks))
        for s in starts:
            blink_train[s:s + pulse_len] += pulse
        x += (spec.blink_amplitude * blink_pat)[:, None] * blink_train[None, :]

    if spec.sensor_noise > 0:
        for ch in range(n_channels):
            x[ch] += spec.sensor_noise * rng.standard_normal(n)

    events = [
        EventMarker(int(m), spec.paradigm, lab) for m, lab in zip(markers, labels)
    ]
    rec = Recording(layout=spec.layout, sample_rate=fs, samples=x, events=events)
    truth = SynthTruth(
        labels=labels,
        marker_samples=markers,
        imagery_samples=imagery_samples,
        blink_train=blink_train,
        blink_pattern=blink_pat,
        source_patterns=np.stack([s.pattern for s in spec.sources]),
        source_bands=tuple(s.band for s in spec.sources),
    )
    return rec, truth


def generate(spec: SynthSpec) -> Recording:
    """Synthesize one full session as a Recording."""
    return generate_with_truth(spec)[0]


# --- brute-force separability oracle ----------------------------------------


def _log_variance_profiles(rec: Recording, truth: SynthTruth, spec: SynthSpec):
    """Per-trial log variance of each ground-truth pattern projection,
    band-limited to that source's band, over the imagery window."""
    profiles = np.empty((len(truth.labels), len(spec.sources)))
    for s, src in enumerate(spec.sources):
        proj = src.pattern @ rec.samples
        coeffs = design_butterworth(
            FilterSpec(kind="bandpass", band=src.band, order=2), rec.sample_rate
        )
        proj = filtfilt(coeffs, proj)
        for t, m in enumerate(truth.marker_samples):
            seg = proj[m:m + truth.imagery_samples]
            profiles[t, s] = np.log(max(seg.var(), 1e-30))
    return profiles


def oracle_accuracy(spec: SynthSpec, n_eval_trials: int = 200) -> float:
    """Nearest-centroid reference classifier using the generator's own
    ground-truth patterns; an upper reference for any learned decoder.

    Calibrates per-class centroids on one derived-seed session and scores a
    second, so the result is an honest hold-out estimate.
    """
    per_class = max(2, int(np.ceil(n_eval_trials / len(spec.classes))))
    calib_spec = replace(spec, trials_per_class=max(10, per_class // 2), seed=spec.seed + 104729)
    eval_spec = replace(spec, trials_per_class=per_class, seed=spec.seed + 7919)

    calib_rec, calib_truth = generate_with_truth(calib_spec)
    calib = _log_variance_profiles(calib_rec, calib_truth, spec)
    centroids = np.stack(
        [
            calib[np.asarray(calib_truth.labels, dtype=object) == cls].mean(axis=0)
            for cls in spec.classes
        ]
    )

    eval_rec, eval_truth = generate_with_truth(eval_spec)
    profiles = _log_variance_profiles(eval_rec, eval_truth, spec)
    dists = ((profiles[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    predicted = dists.argmin(axis=1)
    actual = np.array([spec.classes.index(lab) for lab in eval_truth.labels])
    return float(np.mean(predicted == actual))


def spec_from_json(path) -> SynthSpec:
    """Load a SynthSpec from a JSON document (see README for the schema)."""
    with open(path) as fh:
        doc = json.load(fh)
    return spec_from_dict(doc)


def spec_from_dict(doc: dict) -> SynthSpec:
    if not isinstance(doc, dict) or "paradigm" not in doc:
        raise SynthSpecError("spec document must be an object with a 'paradigm' key")
    kwargs = {"paradigm": doc["paradigm"]}
    if doc.get("compact"):
        spec = compact_spec(
            doc["paradigm"],
            trials_per_class=int(doc.get("trials_per_class", 50)),
            contrast=float(doc.get("contrast", 4.0)),
            seed=int(doc.get("seed", DEFAULT_SEED)),
            sensor_noise=float(doc.get("sensor_noise", 1.0)),
        )
        return spec
    simple = {
        "trials_per_class": int,
        "fs": float,
        "background_count": int,
        "background_amplitude": float,
        "sensor_noise": float,
        "blink_rate_per_min": float,
        "blink_amplitude": float,
        "seed": int,
    }
    for key, cast in simple.items():
        if key in doc:
            kwargs[key] = cast(doc[key])
    if "classes" in doc:
        kwargs["classes"] = tuple(doc["classes"])
    if "background_band" in doc:
        kwargs["background_band"] = tuple(float(v) for v in doc["background_band"])
    if "timing" in doc:
        t = doc["timing"]
        kwargs["timing"] = TrialTiming(
            lead_s=float(t["lead_s"]),
            imagery_s=float(t["imagery_s"]),
            gap_s=float(t.get("gap_s", 0.0)),
        )
    if "channels" in doc:
        kwargs["layout"] = ChannelLayout(names=tuple(doc["channels"]))
    if "contrast" in doc:
        layout = kwargs.get("layout", default_layout())
        classes = kwargs.get("classes", PARADIGM_LABELS[doc["paradigm"]])
        kwargs["sources"] = default_sources(
            doc["paradigm"], layout, classes, contrast=float(doc["contrast"])
        )
    return SynthSpec(**kwargs)
