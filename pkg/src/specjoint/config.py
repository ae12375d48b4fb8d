"""Run configuration: a flat key=value file mirroring every tunable.

One schema drives parsing, validation, and default dumping, so the set of
recognized keys, their types, and their defaults cannot drift apart.
Unknown keys are rejected rather than ignored.
"""

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .corpus import DEFAULT_NOISE_AWARE_FRAMES, DEFAULT_SNR_GRID, Variant
from .dsp import (
    DEFAULT_FFT_SIZE,
    DEFAULT_FRAME_LEN,
    DEFAULT_HOP,
    DEFAULT_SAMPLE_RATE,
    StftConfig,
)
from .enhance import DEFAULT_EPSILON, DEFAULT_GAMMA, PostProcessConfig
from .errors import ConfigError
from .features import (
    DEFAULT_CONTEXT,
    DEFAULT_F_HIGH,
    DEFAULT_F_LOW,
    DEFAULT_N_MELS,
    IbmConfig,
    MelBank,
    mel_bank,
)
from .network import TrainConfig


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("on", "true", "yes", "1"):
        return True
    if lowered in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected on/off, got {text!r}")


def _parse_floats(text: str) -> tuple[float, ...]:
    if not text.strip():
        raise ValueError("empty list")
    return tuple(float(part) for part in text.split(","))


def _format_bool(value: bool) -> str:
    return "on" if value else "off"


def _format_floats(value: tuple[float, ...]) -> str:
    return ",".join(f"{v:g}" for v in value)


@dataclass(frozen=True)
class RunConfig:
    sample_rate: int = DEFAULT_SAMPLE_RATE
    stft_frame_len: int = DEFAULT_FRAME_LEN
    stft_hop: int = DEFAULT_HOP
    stft_fft_size: int = DEFAULT_FFT_SIZE
    stft_window: str = "hann"
    mel_filters: int = DEFAULT_N_MELS
    mel_f_low: float = DEFAULT_F_LOW
    mel_f_high: float = DEFAULT_F_HIGH
    ibm_threshold_db: float = 0.0
    context_tau: int = DEFAULT_CONTEXT
    noise_aware_frames: int = DEFAULT_NOISE_AWARE_FRAMES
    snr_grid: tuple[float, ...] = DEFAULT_SNR_GRID
    val_fraction: float = 0.1
    test_fraction: float = 0.2
    variant: str = "baseline"
    epochs: int = 30
    batch_size: int = 128
    learning_rate: float = 0.001
    lr_final_fraction: float = 0.1
    momentum: float = 0.9
    dropout: float = 0.1
    alpha: float = 0.1
    beta: float = 0.002
    hidden_units: int = 256
    hidden_layers: int = 2
    post_gamma: float = DEFAULT_GAMMA
    post_epsilon: float = DEFAULT_EPSILON
    post_enabled: bool = True
    seed: int = 0

    # --- derived builders -------------------------------------------------

    @property
    def lps_dims(self) -> int:
        return self.stft_fft_size // 2 + 1

    @property
    def mfcc_dims(self) -> int:
        return self.mel_filters + 1

    def stft_config(self) -> StftConfig:
        return StftConfig(self.stft_frame_len, self.stft_hop, self.stft_window, self.stft_fft_size)

    def bank(self) -> MelBank:
        return mel_bank(
            self.mel_filters, self.stft_fft_size, self.sample_rate, self.mel_f_low, self.mel_f_high
        )

    def ibm_config(self) -> IbmConfig:
        return IbmConfig(self.ibm_threshold_db)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            lr_final_fraction=self.lr_final_fraction,
            momentum=self.momentum,
            dropout=self.dropout,
            alpha=self.alpha,
            beta=self.beta,
            seed=self.seed,
        )

    def post_config(self) -> PostProcessConfig:
        return PostProcessConfig(self.post_gamma, self.post_epsilon, self.post_enabled)

    def parsed_variant(self) -> Variant:
        return Variant.parse(self.variant)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    # --- file format --------------------------------------------------------

    def dump(self) -> str:
        """All keys with their current values, in schema order."""
        lines = []
        for key, (attr, _, formatter) in _SCHEMA.items():
            lines.append(f"{key} = {formatter(getattr(self, attr))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "RunConfig":
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{lineno}: expected key = value, got {raw!r}")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _SCHEMA:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
            attr, parser, _ = _SCHEMA[key]
            if attr in values:
                raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
            try:
                values[attr] = parser(value)
            except ValueError as exc:
                raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from exc
        return cls(**values)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        return cls.from_text(path.read_text(encoding="utf-8"), source=str(path))


# key -> (attribute, parser, formatter)
_SCHEMA: dict[str, tuple[str, object, object]] = {
    "sample_rate": ("sample_rate", int, str),
    "stft.frame_len": ("stft_frame_len", int, str),
    "stft.hop": ("stft_hop", int, str),
    "stft.fft_size": ("stft_fft_size", int, str),
    "stft.window": ("stft_window", str, str),
    "mel.filters": ("mel_filters", int, str),
    "mel.f_low": ("mel_f_low", float, lambda v: f"{v:g}"),
    "mel.f_high": ("mel_f_high", float, lambda v: f"{v:g}"),
    "ibm.threshold_db": ("ibm_threshold_db", float, lambda v: f"{v:g}"),
    "context.tau": ("context_tau", int, str),
    "noise_aware.frames": ("noise_aware_frames", int, str),
    "snr.grid": ("snr_grid", _parse_floats, _format_floats),
    "split.val_fraction": ("val_fraction", float, lambda v: f"{v:g}"),
    "split.test_fraction": ("test_fraction", float, lambda v: f"{v:g}"),
    "train.variant": ("variant", str, str),
    "train.epochs": ("epochs", int, str),
    "train.batch_size": ("batch_size", int, str),
    "train.learning_rate": ("learning_rate", float, lambda v: f"{v:g}"),
    "train.lr_final_fraction": ("lr_final_fraction", float, lambda v: f"{v:g}"),
    "train.momentum": ("momentum", float, lambda v: f"{v:g}"),
    "train.dropout": ("dropout", float, lambda v: f"{v:g}"),
    "train.alpha": ("alpha", float, lambda v: f"{v:g}"),
    "train.beta": ("beta", float, lambda v: f"{v:g}"),
    "train.hidden_units": ("hidden_units", int, str),
    "train.hidden_layers": ("hidden_layers", int, str),
    "post.gamma": ("post_gamma", float, lambda v: f"{v:g}"),
    "post.epsilon": ("post_epsilon", float, lambda v: f"{v:g}"),
    "post.enabled": ("post_enabled", _parse_bool, _format_bool),
    "seed": ("seed", int, str),
}
