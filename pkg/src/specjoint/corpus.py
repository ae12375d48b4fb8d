"""Paired noisy/clean corpus construction, normalization, and batching.

A corpus directory is the unit of reproducibility: a text manifest listing
(clean path, noise path, SNR, noise offset, split), per-utterance feature
containers, global normalization statistics fitted on the noisy training
features, and the mixed noisy waveforms.
"""

import enum
from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import container
from .dsp import Spectrogram, StftConfig, Waveform, stft
from .errors import ConfigError, ScalingError
from .features import (
    DEFAULT_CONTEXT,
    FeatureKind,
    FeatureMatrix,
    IbmConfig,
    MelBank,
    compute_ibm,
    lps,
    mfcc,
    splice,
)
from .wavio import read_wav, write_wav

DEFAULT_SNR_GRID = (20.0, 15.0, 10.0, 5.0, 0.0, -5.0)
DEFAULT_NOISE_AWARE_FRAMES = 6

VARIANCE_FLOOR = 1e-8

SPLITS = ("train", "val", "test")

MANIFEST_NAME = "manifest.tsv"
FEATURES_DIR = "features"
NOISY_DIR = "noisy"
STATS_DIR = "stats"

# Per-utterance feature container suffixes.
_FEATURE_FILES = {
    "noisy_lps": FeatureKind.LPS,
    "noisy_mfcc": FeatureKind.MFCC,
    "clean_lps": FeatureKind.LPS,
    "clean_mfcc": FeatureKind.MFCC,
    "ibm": FeatureKind.IBM,
}


class Variant(enum.Enum):
    """Which secondary features join the input and the output heads."""

    BASELINE = "baseline"
    MFCC_OUT = "mfcc-o"
    MFCC = "mfcc"
    IBM = "ibm"
    MFCC_IBM = "mfcc+ibm"

    @classmethod
    def parse(cls, name: str) -> "Variant":
        for variant in cls:
            if variant.value == name:
                return variant
        raise ConfigError(f"unknown variant {name!r}; expected one of {[v.value for v in cls]}")

    @property
    def mfcc_in_input(self) -> bool:
        return self in (Variant.MFCC, Variant.MFCC_IBM)

    @property
    def head_kinds(self) -> tuple[FeatureKind, ...]:
        heads = [FeatureKind.LPS]
        if self in (Variant.MFCC_OUT, Variant.MFCC, Variant.MFCC_IBM):
            heads.append(FeatureKind.MFCC)
        if self in (Variant.IBM, Variant.MFCC_IBM):
            heads.append(FeatureKind.IBM)
        return tuple(heads)


@dataclass(frozen=True)
class MixSpec:
    """One manifest row: how a single noisy utterance is produced."""

    clean_path: Path
    noise_path: Path
    snr_db: float
    noise_offset: int
    split: str

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")
        if not np.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")

    @property
    def utterance_id(self) -> str:
        return f"{self.clean_path.stem}__{self.noise_path.stem}__snr{self.snr_db:g}dB"


@dataclass(frozen=True)
class NormStats:
    """Per-dimension global mean/variance of the noisy training features."""

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        variance = np.asarray(self.variance, dtype=np.float64)
        if mean.shape != variance.shape or mean.ndim != 1:
            raise ValueError("mean and variance must be 1-D vectors of equal length")
        if np.any(variance <= 0.0):
            raise ValueError("variance must be strictly positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", variance)

    @property
    def dims(self) -> int:
        return self.mean.shape[0]


@dataclass
class Batch:
    """Row-aligned mini-batch: inputs plus the targets the variant trains on."""

    inputs: np.ndarray
    targets_lps: np.ndarray
    targets_mfcc: np.ndarray | None = None
    targets_ibm: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.inputs.shape[0]


def mix_at_snr(
    clean: Waveform, noise: Waveform, snr_db: float, noise_offset: int = 0
) -> tuple[Waveform, Waveform]:
    """Scale noise to hit the requested SNR and add it to the clean signal.

    The noise is read from noise_offset with wrap-around, then scaled by
    g = sqrt(P_clean / (P_noise * 10^(snr/10))) where P is the mean power
    over the utterance. Returns (noisy, scaled_noise) so mask targets can be
    computed from the exact mixture components.
    """
    if clean.sample_rate != noise.sample_rate:
        raise ValueError(f"sample rates differ: {clean.sample_rate} vs {noise.sample_rate}")
    indices = (noise_offset + np.arange(len(clean))) % len(noise)
    segment = noise.samples[indices]
    clean_power = np.mean(clean.samples**2)
    noise_power = np.mean(segment**2)
    if clean_power == 0.0:
        raise ScalingError("clean signal is silent; cannot set an SNR")
    if noise_power == 0.0:
        raise ScalingError("noise segment is silent; cannot set an SNR")
    gain = np.sqrt(clean_power / (noise_power * 10.0 ** (snr_db / 10.0)))
    scaled = segment * gain
    return (
        Waveform(clean.samples + scaled, clean.sample_rate),
        Waveform(scaled, clean.sample_rate),
    )


def estimate_noise_aware_vector(features, k: int = DEFAULT_NOISE_AWARE_FRAMES) -> np.ndarray:
    """Static noise estimate: per-dimension mean of the first k frames."""
    data = features.data if isinstance(features, FeatureMatrix) else np.asarray(features)
    if not 1 <= k <= data.shape[0]:
        raise ValueError(f"need 1 <= k <= n_frames={data.shape[0]}, got k={k}")
    return data[:k].mean(axis=0)


def fit_norm_stats(features: Iterable) -> NormStats:
    """Single-pass global mean/variance over all frames of all utterances.

    Uses the population (biased) variance convention, floored at 1e-8. The
    accumulation is sum-based, so the result does not depend on how the
    frames are chunked into utterances.
    """
    count = 0
    total = None
    total_sq = None
    for item in features:
        data = item.data if isinstance(item, FeatureMatrix) else np.asarray(item, dtype=np.float64)
        if total is None:
            total = np.zeros(data.shape[1])
            total_sq = np.zeros(data.shape[1])
        count += data.shape[0]
        total += data.sum(axis=0)
        total_sq += (data**2).sum(axis=0)
    if count < 2:
        raise ValueError(f"need at least 2 frames to fit statistics, got {count}")
    mean = total / count
    variance = np.maximum(total_sq / count - mean**2, VARIANCE_FLOOR)
    return NormStats(mean, variance)


def normalize(data: np.ndarray, stats: NormStats) -> np.ndarray:
    if data.shape[-1] != stats.dims:
        raise ValueError(f"dim mismatch: data has {data.shape[-1]}, stats have {stats.dims}")
    return (data - stats.mean) / np.sqrt(stats.variance)


def denormalize(data: np.ndarray, stats: NormStats) -> np.ndarray:
    if data.shape[-1] != stats.dims:
        raise ValueError(f"dim mismatch: data has {data.shape[-1]}, stats have {stats.dims}")
    return data * np.sqrt(stats.variance) + stats.mean


def write_norm_stats(path: str | Path, stats: NormStats, kind: FeatureKind) -> None:
    """Persist stats as a two-row (mean, variance) feature container."""
    container.write_features(
        path, FeatureMatrix(np.vstack([stats.mean, stats.variance]), kind)
    )


def read_norm_stats(path: str | Path) -> NormStats:
    rows = container.read_features(path)
    if rows.n_frames != 2:
        raise ValueError(f"{path}: stats container must have exactly 2 rows, got {rows.n_frames}")
    return NormStats(rows.data[0], rows.data[1])


def write_manifest(path: str | Path, entries: Iterable[MixSpec]) -> None:
    lines = [
        f"{e.clean_path}\t{e.noise_path}\t{e.snr_db:g}\t{e.noise_offset}\t{e.split}"
        for e in entries
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path: str | Path) -> list[MixSpec]:
    entries = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 5:
            raise ValueError(f"{path}:{lineno}: expected 5 tab-separated fields, got {len(fields)}")
        clean, noise, snr, offset, split = fields
        entries.append(MixSpec(Path(clean), Path(noise), float(snr), int(offset), split))
    return entries


@dataclass(frozen=True)
class MixtureFeatures:
    """Everything extracted from one mixed utterance."""

    noisy: Waveform
    noisy_lps: FeatureMatrix
    noisy_mfcc: FeatureMatrix
    clean_lps: FeatureMatrix
    clean_mfcc: FeatureMatrix
    ibm: FeatureMatrix


def extract_mixture_features(
    clean: Waveform,
    noise: Waveform,
    snr_db: float,
    noise_offset: int,
    stft_config: StftConfig,
    bank: MelBank,
    ibm_config: IbmConfig,
) -> MixtureFeatures:
    """Mix one pair and compute all training features from aligned components."""
    noisy, scaled_noise = mix_at_snr(clean, noise, snr_db, noise_offset)
    noisy_spec = stft(noisy, stft_config)
    clean_spec = stft(clean, stft_config)
    noise_spec = stft(scaled_noise, stft_config)
    return MixtureFeatures(
        noisy=noisy,
        noisy_lps=lps(noisy_spec),
        noisy_mfcc=mfcc(noisy_spec, bank),
        clean_lps=lps(clean_spec),
        clean_mfcc=mfcc(clean_spec, bank),
        ibm=compute_ibm(clean_spec, noise_spec, ibm_config),
    )


def feature_path(features_dir: str | Path, utterance_id: str, name: str) -> Path:
    if name not in _FEATURE_FILES:
        raise ValueError(f"unknown feature name {name!r}")
    return Path(features_dir) / f"{utterance_id}.{name}.sjfm"


def write_mixture_features(features_dir: str | Path, utterance_id: str, mix: MixtureFeatures) -> None:
    for name in _FEATURE_FILES:
        container.write_features(feature_path(features_dir, utterance_id, name), getattr(mix, name))


def assign_splits(
    clean_paths: list[Path], val_fraction: float, test_fraction: float, seed: int
) -> dict[Path, str]:
    """Split clean utterances (not mixtures) so no utterance leaks across splits."""
    if val_fraction < 0 or test_fraction < 0 or val_fraction + test_fraction >= 1.0:
        raise ConfigError("val/test fractions must be >= 0 and sum to < 1")
    ordered = sorted(clean_paths)
    rng = np.random.default_rng(seed)
    permuted = [ordered[i] for i in rng.permutation(len(ordered))]
    n_test = int(round(test_fraction * len(ordered)))
    n_val = int(round(val_fraction * len(ordered)))
    assignment = {}
    for i, path in enumerate(permuted):
        if i < n_test:
            assignment[path] = "test"
        elif i < n_test + n_val:
            assignment[path] = "val"
        else:
            assignment[path] = "train"
    return assignment


def build_corpus(
    clean_paths: list[Path],
    noise_paths: list[Path],
    out_dir: str | Path,
    stft_config: StftConfig,
    bank: MelBank,
    ibm_config: IbmConfig,
    snr_grid: tuple[float, ...] = DEFAULT_SNR_GRID,
    val_fraction: float = 0.1,
    test_fraction: float = 0.2,
    seed: int = 0,
    sample_rate: int = 16000,
) -> list[MixSpec]:
    """Mix every clean x noise x SNR combination and write the corpus directory.

    Writes the manifest, per-utterance feature containers, noisy waveforms,
    and normalization statistics fitted on the noisy train-split features
    only. Deterministic for a fixed seed.
    """
    if not clean_paths:
        raise ConfigError("no clean utterances given")
    if not noise_paths:
        raise ConfigError("no noise files given")
    out_dir = Path(out_dir)
    features_dir = out_dir / FEATURES_DIR
    noisy_dir = out_dir / NOISY_DIR
    stats_dir = out_dir / STATS_DIR
    for sub in (features_dir, noisy_dir, stats_dir):
        sub.mkdir(parents=True, exist_ok=True)

    splits = assign_splits(clean_paths, val_fraction, test_fraction, seed)
    rng = np.random.default_rng(seed + 1)
    entries = []
    # Offsets are drawn in a fixed (sorted) order so the manifest is
    # byte-identical across runs with the same seed.
    for clean_path in sorted(clean_paths):
        for noise_path in sorted(noise_paths):
            noise_len = len(read_wav(noise_path, expected_rate=sample_rate))
            for snr_db in snr_grid:
                offset = int(rng.integers(0, noise_len))
                entries.append(
                    MixSpec(clean_path, noise_path, float(snr_db), offset, splits[clean_path])
                )

    lps_sum = _StreamingStats()
    mfcc_sum = _StreamingStats()
    for entry in entries:
        clean = read_wav(entry.clean_path, expected_rate=sample_rate)
        noise = read_wav(entry.noise_path, expected_rate=sample_rate)
        mix = extract_mixture_features(
            clean, noise, entry.snr_db, entry.noise_offset, stft_config, bank, ibm_config
        )
        write_mixture_features(features_dir, entry.utterance_id, mix)
        write_wav(noisy_dir / f"{entry.utterance_id}.wav", mix.noisy)
        if entry.split == "train":
            lps_sum.add(mix.noisy_lps.data)
            mfcc_sum.add(mix.noisy_mfcc.data)

    write_norm_stats(stats_dir / "lps.sjfm", lps_sum.finish(), FeatureKind.LPS)
    write_norm_stats(stats_dir / "mfcc.sjfm", mfcc_sum.finish(), FeatureKind.MFCC)
    write_manifest(out_dir / MANIFEST_NAME, entries)
    return entries


class _StreamingStats:
    """Sum-based accumulator matching fit_norm_stats()."""

    def __init__(self):
        self.count = 0
        self.total = None
        self.total_sq = None

    def add(self, data: np.ndarray) -> None:
        if self.total is None:
            self.total = np.zeros(data.shape[1])
            self.total_sq = np.zeros(data.shape[1])
        self.count += data.shape[0]
        self.total += data.sum(axis=0)
        self.total_sq += (data**2).sum(axis=0)

    def finish(self) -> NormStats:
        if self.count < 2:
            raise ValueError("need at least 2 frames to fit statistics")
        mean = self.total / self.count
        variance = np.maximum(self.total_sq / self.count - mean**2, VARIANCE_FLOOR)
        return NormStats(mean, variance)


def read_corpus_stats(corpus_dir: str | Path) -> dict[FeatureKind, NormStats]:
    stats_dir = Path(corpus_dir) / STATS_DIR
    return {
        FeatureKind.LPS: read_norm_stats(stats_dir / "lps.sjfm"),
        FeatureKind.MFCC: read_norm_stats(stats_dir / "mfcc.sjfm"),
    }


def build_input_rows(
    noisy_lps_norm: np.ndarray,
    noisy_mfcc_norm: np.ndarray | None,
    tau: int,
    noise_aware_frames: int,
) -> np.ndarray:
    """Spliced normalized noisy features plus the static noise-aware vector.

    The noise-aware vector is the mean of the first noise_aware_frames rows
    of the same normalized feature block, appended to every row.
    """
    feat = noisy_lps_norm
    if noisy_mfcc_norm is not None:
        feat = np.hstack([noisy_lps_norm, noisy_mfcc_norm])
    spliced = splice(feat, tau)
    noise_vec = estimate_noise_aware_vector(feat, noise_aware_frames)
    return np.hstack([spliced, np.tile(noise_vec, (feat.shape[0], 1))])


def input_dim(variant: Variant, lps_dims: int, mfcc_dims: int, tau: int) -> int:
    feat_dims = lps_dims + (mfcc_dims if variant.mfcc_in_input else 0)
    return feat_dims * (2 * tau + 1) + feat_dims


@dataclass
class TrainingData:
    """Materialized inputs/targets for one split, ready for batching."""

    variant: Variant
    inputs: np.ndarray
    targets_lps: np.ndarray
    targets_mfcc: np.ndarray | None
    targets_ibm: np.ndarray | None

    @property
    def n_rows(self) -> int:
        return self.inputs.shape[0]


def load_training_data(
    corpus_dir: str | Path,
    entries: list[MixSpec],
    variant: Variant,
    stats: dict[FeatureKind, NormStats],
    tau: int = DEFAULT_CONTEXT,
    noise_aware_frames: int = DEFAULT_NOISE_AWARE_FRAMES,
    dtype=np.float32,
) -> TrainingData:
    """Assemble the input and target matrices for the given manifest entries.

    Inputs and the LPS/MFCC targets are normalized with the noisy-data
    statistics; mask targets stay raw {0, 1}.
    """
    features_dir = Path(corpus_dir) / FEATURES_DIR
    want_mfcc = FeatureKind.MFCC in variant.head_kinds
    want_ibm = FeatureKind.IBM in variant.head_kinds
    inputs, t_lps, t_mfcc, t_ibm = [], [], [], []
    for entry in entries:
        uid = entry.utterance_id
        noisy_lps = container.read_features(feature_path(features_dir, uid, "noisy_lps"))
        lps_norm = normalize(noisy_lps.data, stats[FeatureKind.LPS])
        mfcc_norm = None
        if variant.mfcc_in_input:
            noisy_mfcc = container.read_features(feature_path(features_dir, uid, "noisy_mfcc"))
            mfcc_norm = normalize(noisy_mfcc.data, stats[FeatureKind.MFCC])
        inputs.append(build_input_rows(lps_norm, mfcc_norm, tau, noise_aware_frames))
        clean_lps = container.read_features(feature_path(features_dir, uid, "clean_lps"))
        t_lps.append(normalize(clean_lps.data, stats[FeatureKind.LPS]))
        if want_mfcc:
            clean_mfcc = container.read_features(feature_path(features_dir, uid, "clean_mfcc"))
            t_mfcc.append(normalize(clean_mfcc.data, stats[FeatureKind.MFCC]))
        if want_ibm:
            t_ibm.append(container.read_features(feature_path(features_dir, uid, "ibm")).data)
    return TrainingData(
        variant=variant,
        inputs=np.vstack(inputs).astype(dtype),
        targets_lps=np.vstack(t_lps).astype(dtype),
        targets_mfcc=np.vstack(t_mfcc).astype(dtype) if want_mfcc else None,
        targets_ibm=np.vstack(t_ibm).astype(dtype) if want_ibm else None,
    )


def assemble_batches(data: TrainingData, batch_size: int, shuffle_seed: int) -> Iterator[Batch]:
    """Yield shuffled mini-batches; deterministic order for a fixed seed."""
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    order = np.random.default_rng(shuffle_seed).permutation(data.n_rows)
    for start in range(0, data.n_rows, batch_size):
        rows = order[start : start + batch_size]
        yield Batch(
            inputs=data.inputs[rows],
            targets_lps=data.targets_lps[rows],
            targets_mfcc=None if data.targets_mfcc is None else data.targets_mfcc[rows],
            targets_ibm=None if data.targets_ibm is None else data.targets_ibm[rows],
        )
