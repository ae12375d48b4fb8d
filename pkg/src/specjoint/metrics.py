"""Objective quality and intelligibility measures for enhanced speech.

Three measures: segmental SNR over speech-active frames, a short-time
intelligibility score built from one-third-octave envelope correlations,
and a per-frequency-bin log-spectral error profile. All functions assume
sample-aligned signals; the pipeline guarantees alignment by construction.
"""

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .dsp import Waveform
from .errors import MetricError
from .features import FeatureMatrix
from .wavio import read_wav

SSNR_FRAME_LEN = 512
SSNR_HOP = 256
SSNR_FLOOR_DB = -10.0
SSNR_CEIL_DB = 35.0
SSNR_SILENCE_FLOOR = 1e-8

STOI_RATE = 10000
STOI_FRAME_LEN = 256
STOI_HOP = 128
STOI_FFT_SIZE = 512
STOI_N_BANDS = 15
STOI_MIN_FREQ = 150.0
STOI_SEGMENT = 30
STOI_DYN_RANGE_DB = 40.0
STOI_CLIP_DB = -15.0

_EPS = np.finfo(np.float64).eps


def _frame(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    n = 1 + (len(x) - frame_len) // hop if len(x) >= frame_len else 0
    if n <= 0:
        return np.empty((0, frame_len))
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n)[:, None]
    return x[idx]


def _aligned(reference: Waveform, test: Waveform) -> tuple[np.ndarray, np.ndarray]:
    if reference.sample_rate != test.sample_rate:
        raise MetricError(
            f"sample rates differ: {reference.sample_rate} vs {test.sample_rate}"
        )
    n = min(len(reference), len(test))
    return reference.samples[:n], test.samples[:n]


def ssnr(
    reference: Waveform,
    test: Waveform,
    frame_len: int = SSNR_FRAME_LEN,
    hop: int = SSNR_HOP,
) -> float:
    """Mean per-frame SNR in dB, clamped to [-10, 35], over active frames.

    A frame is active when its mean power exceeds 1e-8 times the utterance
    mean power of the reference. Zero error clamps at the ceiling.
    """
    ref, tst = _aligned(reference, test)
    ref_frames = _frame(ref, frame_len, hop)
    tst_frames = _frame(tst, frame_len, hop)
    if ref_frames.shape[0] == 0:
        raise MetricError(f"signal shorter than one frame ({frame_len} samples)")
    ref_power = np.sum(ref_frames**2, axis=1)
    err_power = np.sum((ref_frames - tst_frames) ** 2, axis=1)
    active = ref_power > SSNR_SILENCE_FLOOR * np.mean(ref**2) * frame_len
    if not np.any(active):
        raise MetricError("reference has no speech-active frames")
    with np.errstate(divide="ignore", invalid="ignore"):
        snr_db = 10.0 * np.log10(np.where(err_power > 0.0, ref_power / err_power, np.inf))
    return float(np.mean(np.clip(snr_db[active], SSNR_FLOOR_DB, SSNR_CEIL_DB)))


def _stoi_window() -> np.ndarray:
    # Interior of a symmetric Hann window, the convention of the reference
    # implementation (no zero endpoints).
    return np.hanning(STOI_FRAME_LEN + 2)[1:-1]


def _resample_to_stoi_rate(x: np.ndarray, rate: int) -> np.ndarray:
    if rate == STOI_RATE:
        return x
    g = np.gcd(rate, STOI_RATE)
    return resample_poly(x, STOI_RATE // g, rate // g)


def _remove_silent_frames(ref: np.ndarray, tst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Drop frames more than 40 dB below the loudest reference frame.

    Frames are selected on the reference alone, windowed once, and both
    signals are rebuilt by overlap-add of the surviving frames.
    """
    win = _stoi_window()
    ref_frames = _frame(ref, STOI_FRAME_LEN, STOI_HOP) * win
    tst_frames = _frame(tst, STOI_FRAME_LEN, STOI_HOP) * win
    if ref_frames.shape[0] == 0:
        raise MetricError("signal shorter than one frame after resampling")
    energies = 20.0 * np.log10(np.linalg.norm(ref_frames, axis=1) + _EPS)
    keep = energies > np.max(energies) - STOI_DYN_RANGE_DB
    ref_frames, tst_frames = ref_frames[keep], tst_frames[keep]

    def overlap_add(frames: np.ndarray) -> np.ndarray:
        out = np.zeros((frames.shape[0] - 1) * STOI_HOP + STOI_FRAME_LEN)
        for i, frame in enumerate(frames):
            out[i * STOI_HOP : i * STOI_HOP + STOI_FRAME_LEN] += frame
        return out

    return overlap_add(ref_frames), overlap_add(tst_frames)


def _third_octave_bands() -> np.ndarray:
    """Rectangular band matrix over rfft bins, edges snapped to bin centers."""
    freqs = np.linspace(0, STOI_RATE, STOI_FFT_SIZE + 1)[: STOI_FFT_SIZE // 2 + 1]
    k = np.arange(STOI_N_BANDS, dtype=np.float64)
    f_low = STOI_MIN_FREQ * 2.0 ** ((2.0 * k - 1.0) / 6.0)
    f_high = STOI_MIN_FREQ * 2.0 ** ((2.0 * k + 1.0) / 6.0)
    bands = np.zeros((STOI_N_BANDS, freqs.shape[0]))
    for i in range(STOI_N_BANDS):
        lo = int(np.argmin((freqs - f_low[i]) ** 2))
        hi = int(np.argmin((freqs - f_high[i]) ** 2))
        bands[i, lo:hi] = 1.0
    return bands


def _band_envelopes(x: np.ndarray) -> np.ndarray:
    win = _stoi_window()
    frames = _frame(x, STOI_FRAME_LEN, STOI_HOP) * win
    power = np.abs(np.fft.rfft(frames, n=STOI_FFT_SIZE, axis=1)) ** 2
    return np.sqrt(power @ _third_octave_bands().T)


def stoi(reference: Waveform, test: Waveform) -> float:
    """Short-time intelligibility score of test speech against its reference.

    Both signals are resampled to 10 kHz; silent reference frames are
    removed from both; one-third-octave envelopes are compared over
    30-frame segments with per-segment normalization and clipping at
    -15 dB signal-to-distortion ratio. Higher is more intelligible;
    identical signals score 1.
    """
    ref, tst = _aligned(reference, test)
    ref = _resample_to_stoi_rate(ref, reference.sample_rate)
    tst = _resample_to_stoi_rate(tst, reference.sample_rate)
    ref, tst = _remove_silent_frames(ref, tst)
    ref_env = _band_envelopes(ref)
    tst_env = _band_envelopes(tst)
    n_frames = ref_env.shape[0]
    if n_frames < STOI_SEGMENT:
        raise MetricError(
            f"only {n_frames} active frames; need at least {STOI_SEGMENT} "
            "(roughly half a second of speech)"
        )
    clip_gain = 10.0 ** (-STOI_CLIP_DB / 20.0)
    total = 0.0
    count = 0
    for m in range(STOI_SEGMENT, n_frames + 1):
        x = ref_env[m - STOI_SEGMENT : m].T
        y = tst_env[m - STOI_SEGMENT : m].T
        scale = np.linalg.norm(x, axis=1, keepdims=True) / (
            np.linalg.norm(y, axis=1, keepdims=True) + _EPS
        )
        y = np.minimum(y * scale, x * (1.0 + clip_gain))
        x = x - x.mean(axis=1, keepdims=True)
        y = y - y.mean(axis=1, keepdims=True)
        x = x / (np.linalg.norm(x, axis=1, keepdims=True) + _EPS)
        y = y / (np.linalg.norm(y, axis=1, keepdims=True) + _EPS)
        total += float(np.sum(x * y))
        count += x.shape[0]
    return total / count


@dataclass
class DistortionProfile:
    """Running per-bin mean of (clean - estimated) log-power differences.

    Sum-based, so accumulation order does not matter and profiles merge
    associatively.
    """

    total: np.ndarray
    n_frames: int = 0

    @classmethod
    def empty(cls, n_bins: int) -> "DistortionProfile":
        return cls(np.zeros(n_bins), 0)

    @property
    def per_bin(self) -> np.ndarray:
        if self.n_frames == 0:
            raise MetricError("no frames accumulated")
        return self.total / self.n_frames

    def merge(self, other: "DistortionProfile") -> "DistortionProfile":
        if self.total.shape != other.total.shape:
            raise ValueError("profiles cover different bin counts")
        return DistortionProfile(self.total + other.total, self.n_frames + other.n_frames)


def distortion_profile(
    clean_lps: FeatureMatrix | np.ndarray,
    estimated_lps: FeatureMatrix | np.ndarray,
    accumulate_into: DistortionProfile | None = None,
) -> DistortionProfile:
    clean = clean_lps.data if isinstance(clean_lps, FeatureMatrix) else np.asarray(clean_lps)
    est = estimated_lps.data if isinstance(estimated_lps, FeatureMatrix) else np.asarray(estimated_lps)
    if clean.shape != est.shape:
        raise ValueError(f"shape mismatch: clean {clean.shape}, estimated {est.shape}")
    if accumulate_into is None:
        accumulate_into = DistortionProfile.empty(clean.shape[1])
    return accumulate_into.merge(
        DistortionProfile((clean - est).sum(axis=0), clean.shape[0])
    )


def profile_csv(profile: DistortionProfile, sample_rate: int, fft_size: int) -> str:
    """Rows of bin_hz,mean_distortion for external plotting."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bin_hz", "mean_distortion"])
    per_bin = profile.per_bin
    for i, value in enumerate(per_bin):
        writer.writerow([f"{i * sample_rate / fft_size:.2f}", f"{value:.6f}"])
    return buf.getvalue()


@dataclass
class ConditionStats:
    ssnr_db: float
    stoi: float
    n_utterances: int


@dataclass
class MetricReport:
    """Per-(noise, SNR) and overall means over utterances."""

    ssnr_db: float
    stoi: float
    n_utterances: int
    per_condition: dict[tuple[str, float], ConditionStats] = field(default_factory=dict)
    missing: list[str] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.missing


def evaluate_condition(entries, enhanced_dir: str | Path) -> MetricReport:
    """Score enhanced utterances named <utterance_id>.wav against their cleans.

    Entries with no matching enhanced file are listed as missing and left
    out of the averages. Results do not depend on entry order.
    """
    enhanced_dir = Path(enhanced_dir)
    per_utt: dict[tuple[str, float], list[tuple[float, float]]] = {}
    missing = []
    for entry in sorted(entries, key=lambda e: e.utterance_id):
        enhanced_path = enhanced_dir / f"{entry.utterance_id}.wav"
        if not enhanced_path.exists():
            missing.append(entry.utterance_id)
            continue
        clean = read_wav(entry.clean_path)
        enhanced = read_wav(enhanced_path, expected_rate=clean.sample_rate)
        pair = (ssnr(clean, enhanced), stoi(clean, enhanced))
        per_utt.setdefault((entry.noise_path.stem, entry.snr_db), []).append(pair)
    all_pairs = [pair for pairs in per_utt.values() for pair in pairs]
    if not all_pairs:
        raise MetricError("no enhanced utterances found to evaluate")
    per_condition = {
        key: ConditionStats(
            ssnr_db=float(np.mean([p[0] for p in pairs])),
            stoi=float(np.mean([p[1] for p in pairs])),
            n_utterances=len(pairs),
        )
        for key, pairs in per_utt.items()
    }
    return MetricReport(
        ssnr_db=float(np.mean([p[0] for p in all_pairs])),
        stoi=float(np.mean([p[1] for p in all_pairs])),
        n_utterances=len(all_pairs),
        per_condition=per_condition,
        missing=missing,
    )


def report_csv(report: MetricReport) -> str:
    """Rows of noise,snr_db,metric,value; the overall rows use noise=overall."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["noise", "snr_db", "metric", "value"])
    for noise, snr_db in sorted(report.per_condition):
        stats = report.per_condition[(noise, snr_db)]
        writer.writerow([noise, f"{snr_db:g}", "ssnr_db", f"{stats.ssnr_db:.4f}"])
        writer.writerow([noise, f"{snr_db:g}", "stoi", f"{stats.stoi:.4f}"])
    writer.writerow(["overall", "", "ssnr_db", f"{report.ssnr_db:.4f}"])
    writer.writerow(["overall", "", "stoi", f"{report.stoi:.4f}"])
    for utterance_id in report.missing:
        writer.writerow(["missing", "", "utterance", utterance_id])
    return buf.getvalue()
