"""Windowed STFT analysis/synthesis and elementary transforms.

All operations are pure functions on immutable inputs and are safe to call
from multiple threads.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

DEFAULT_SAMPLE_RATE = 16000
DEFAULT_FRAME_LEN = 512   # 32 ms at 16 kHz
DEFAULT_HOP = 256         # 50% overlap
DEFAULT_FFT_SIZE = 512    # 257 one-sided bins

WINDOW_NAMES = ("hann", "hamming", "rect")

# Minimum per-sample synthesis-window coverage for exact inversion.
_COVERAGE_EPS = 1e-10


@dataclass(frozen=True)
class Waveform:
    """Mono PCM samples (nominal range [-1, 1]) with their sample rate."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"waveform must be 1-D, got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains NaN or Inf samples")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


def window(name: str, length: int) -> np.ndarray:
    """Periodic analysis window of the given length."""
    n = np.arange(length, dtype=np.float64)
    if name == "hann":
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / length)
    if name == "hamming":
        return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / length)
    if name == "rect":
        return np.ones(length, dtype=np.float64)
    raise ConfigError(f"unknown window {name!r}; expected one of {WINDOW_NAMES}")


@dataclass(frozen=True)
class StftConfig:
    """Framing parameters; fft_size/2+1 is the one-sided bin count."""

    frame_len: int = DEFAULT_FRAME_LEN
    hop: int = DEFAULT_HOP
    window: str = "hann"
    fft_size: int = DEFAULT_FFT_SIZE

    def __post_init__(self):
        if not (0 < self.hop <= self.frame_len <= self.fft_size):
            raise ConfigError(
                f"need 0 < hop <= frame_len <= fft_size, got "
                f"hop={self.hop} frame_len={self.frame_len} fft_size={self.fft_size}"
            )
        if self.fft_size & (self.fft_size - 1) != 0:
            raise ConfigError(f"fft_size must be a power of two, got {self.fft_size}")
        if self.window not in WINDOW_NAMES:
            raise ConfigError(f"unknown window {self.window!r}; expected one of {WINDOW_NAMES}")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def analysis_window(self) -> np.ndarray:
        return window(self.window, self.frame_len)


@dataclass(frozen=True)
class Spectrogram:
    """Complex one-sided STFT frames, one row per frame."""

    frames: np.ndarray
    config: StftConfig = field(default_factory=StftConfig)
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.complex128)
        if frames.ndim != 2 or frames.shape[1] != self.config.n_bins:
            raise ValueError(
                f"spectrogram must be n_frames x {self.config.n_bins}, got shape {frames.shape}"
            )
        object.__setattr__(self, "frames", frames)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_bins(self) -> int:
        return self.frames.shape[1]


def frame_count(n_samples: int, config: StftConfig) -> int:
    """Frames produced by stft(); the trailing partial frame is dropped."""
    if n_samples < config.frame_len:
        return 0
    return 1 + (n_samples - config.frame_len) // config.hop


def stft(waveform: Waveform, config: StftConfig | None = None) -> Spectrogram:
    """Short-time Fourier transform, one-sided bins.

    Frames start at sample 0 with no padding; a trailing partial frame is
    dropped so golden outputs stay stable.
    """
    config = config or StftConfig()
    x = waveform.samples
    n_frames = frame_count(len(x), config)
    if n_frames == 0:
        raise ValueError(
            f"signal of {len(x)} samples is shorter than one frame ({config.frame_len})"
        )
    win = config.analysis_window()
    offsets = np.arange(n_frames) * config.hop
    frames = x[offsets[:, None] + np.arange(config.frame_len)] * win
    spec = np.fft.rfft(frames, n=config.fft_size, axis=1)
    return Spectrogram(spec, config, waveform.sample_rate)


def istft(spec: Spectrogram, target_len: int) -> Waveform:
    """Weighted overlap-add inverse of stft().

    Each inverse frame is re-weighted by the synthesis (= analysis) window
    and the sum is normalized per sample by the accumulated squared window,
    so any config with gap-free coverage inverts exactly. Samples with no
    window coverage (e.g. the zeros of a Hann window at hop == frame_len)
    are left at zero. Output is truncated or zero-padded to target_len.
    """
    config = spec.config
    win = config.analysis_window()
    n_frames = spec.n_frames
    total = config.frame_len + (n_frames - 1) * config.hop
    out = np.zeros(total, dtype=np.float64)
    norm = np.zeros(total, dtype=np.float64)
    frames = np.fft.irfft(spec.frames, n=config.fft_size, axis=1)[:, : config.frame_len]
    frames = frames * win
    win_sq = win * win
    for i in range(n_frames):
        start = i * config.hop
        out[start : start + config.frame_len] += frames[i]
        norm[start : start + config.frame_len] += win_sq
    covered = norm > _COVERAGE_EPS
    out[covered] /= norm[covered]
    out[~covered] = 0.0
    if target_len <= total:
        out = out[:target_len]
    else:
        out = np.concatenate([out, np.zeros(target_len - total)])
    return Waveform(out, spec.sample_rate)


def magnitude_phase(spec: Spectrogram) -> tuple[np.ndarray, np.ndarray]:
    """Element-wise |z| and arg(z), with arg(0) := 0 so recombination is total."""
    mag = np.abs(spec.frames)
    phase = np.angle(spec.frames)
    phase = np.where(mag == 0.0, 0.0, phase)
    return mag, phase


def combine_magnitude_phase(
    magnitudes: np.ndarray, phases: np.ndarray, config: StftConfig, sample_rate: int
) -> Spectrogram:
    """Rebuild a Spectrogram from magnitude.e^{i.phase}."""
    if magnitudes.shape != phases.shape:
        raise ValueError(f"shape mismatch: {magnitudes.shape} vs {phases.shape}")
    return Spectrogram(magnitudes * np.exp(1j * phases), config, sample_rate)


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix (full square, no dimension reduction)."""
    if n < 1:
        raise ValueError(f"dct_matrix needs n >= 1, got {n}")
    k = np.arange(n)[:, None]
    m = np.arange(n)[None, :]
    mat = np.cos(np.pi * (2 * m + 1) * k / (2 * n))
    mat *= np.sqrt(2.0 / n)
    mat[0, :] = np.sqrt(1.0 / n)
    return mat
