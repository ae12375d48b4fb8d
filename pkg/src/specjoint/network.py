"""Feed-forward regression network with a multi-objective output layer.

The network maps spliced noisy features to clean targets through ReLU hidden
layers and one linear output layer split into per-feature heads. Spectral
heads (log-power, cepstra) use a per-sample normalized squared error; the
mask head uses a plain squared error. Training is mini-batch SGD with
momentum, inverted dropout on the hidden activations, and a linearly
decaying learning rate. Parameters are stored in float32; loss values are
accumulated in float64.
"""

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Batch, NormStats, TrainingData, Variant, assemble_batches
from .errors import ConfigError, TrainingDivergedError
from .features import FeatureKind

CHECKPOINT_MAGIC = b"SJNN"
CHECKPOINT_VERSION = 1

LOSS_NORM_FLOOR = 1e-8

DEFAULT_HIDDEN_UNITS = 2500
DEFAULT_HIDDEN_LAYERS = 3

_VARIANT_CODES = {v: i for i, v in enumerate(Variant)}
_CODE_VARIANTS = {i: v for v, i in _VARIANT_CODES.items()}


@dataclass(frozen=True)
class HeadSpec:
    """One slice of the output layer: which feature it predicts and where."""

    kind: FeatureKind
    offset: int
    width: int


@dataclass
class Model:
    """Network parameters plus everything needed to run it on new audio."""

    variant: Variant
    tau: int
    noise_aware_frames: int
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    heads: tuple[HeadSpec, ...]
    stats: dict[FeatureKind, NormStats]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def n_parameters(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def head(self, kind: FeatureKind) -> HeadSpec:
        for spec in self.heads:
            if spec.kind == kind:
                return spec
        raise KeyError(f"model has no {kind.name} head")


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 128
    learning_rate: float = 0.001
    lr_final_fraction: float = 0.1
    momentum: float = 0.9
    dropout: float = 0.1
    alpha: float = 0.1
    beta: float = 0.002
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0 < self.lr_final_fraction <= 1:
            raise ConfigError("lr_final_fraction must be in (0, 1]")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if not 0 <= self.dropout < 1:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("alpha and beta must be >= 0")

    def learning_rate_at(self, epoch: int) -> float:
        """Linear decay from the initial rate to its final fraction."""
        if self.epochs == 1:
            return self.learning_rate
        frac = epoch / (self.epochs - 1)
        return self.learning_rate * (1.0 - (1.0 - self.lr_final_fraction) * frac)


@dataclass
class LossReport:
    """Per-head loss values; the total folds in the head weights."""

    total: float
    lps: float
    mfcc: float | None = None
    ibm: float | None = None

    def as_dict(self) -> dict[str, float]:
        out = {"total": self.total, "lps": self.lps}
        if self.mfcc is not None:
            out["mfcc"] = self.mfcc
        if self.ibm is not None:
            out["ibm"] = self.ibm
        return out


@dataclass
class EpochStats:
    epoch: int
    learning_rate: float
    train: LossReport
    val: LossReport | None


def head_layout(variant: Variant, lps_dims: int, mfcc_dims: int) -> tuple[HeadSpec, ...]:
    widths = {FeatureKind.LPS: lps_dims, FeatureKind.MFCC: mfcc_dims, FeatureKind.IBM: lps_dims}
    heads = []
    offset = 0
    for kind in variant.head_kinds:
        heads.append(HeadSpec(kind, offset, widths[kind]))
        offset += widths[kind]
    return tuple(heads)


def init_model(
    variant: Variant,
    input_dim: int,
    stats: dict[FeatureKind, NormStats],
    tau: int,
    noise_aware_frames: int,
    lps_dims: int,
    mfcc_dims: int,
    hidden_units: int = DEFAULT_HIDDEN_UNITS,
    hidden_layers: int = DEFAULT_HIDDEN_LAYERS,
    seed: int = 0,
) -> Model:
    """Uniform fan-balanced init: W ~ U(+-sqrt(6/(fan_in+fan_out))), b = 0."""
    if hidden_units < 1 or hidden_layers < 1:
        raise ConfigError("hidden_units and hidden_layers must be >= 1")
    heads = head_layout(variant, lps_dims, mfcc_dims)
    output_dim = sum(h.width for h in heads)
    dims = [input_dim] + [hidden_units] * hidden_layers + [output_dim]
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(np.float32))
        biases.append(np.zeros(fan_out, dtype=np.float32))
    return Model(variant, tau, noise_aware_frames, weights, biases, heads, dict(stats))


@dataclass
class _ForwardCache:
    inputs: np.ndarray
    pre_activations: list[np.ndarray]
    activations: list[np.ndarray]
    dropout_masks: list[np.ndarray | None]
    outputs: np.ndarray


def _forward(
    model: Model,
    inputs: np.ndarray,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> _ForwardCache:
    if inputs.shape[1] != model.input_dim:
        raise ValueError(f"input dim mismatch: got {inputs.shape[1]}, model wants {model.input_dim}")
    h = inputs
    pre, acts, masks = [], [], []
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        z = h @ w + b
        a = np.maximum(z, 0.0)
        mask = None
        if dropout > 0.0:
            if rng is None:
                raise ValueError("dropout requires a generator")
            keep = (rng.random(a.shape) >= dropout).astype(np.float32) / np.float32(1.0 - dropout)
            a = a * keep
            mask = keep
        pre.append(z)
        acts.append(a)
        masks.append(mask)
        h = a
    outputs = h @ model.weights[-1] + model.biases[-1]
    return _ForwardCache(inputs, pre, acts, masks, outputs)


def predict(model: Model, inputs: np.ndarray) -> dict[FeatureKind, np.ndarray]:
    """Inference pass (no dropout); outputs split by head."""
    outputs = _forward(model, np.asarray(inputs, dtype=np.float32)).outputs
    return {h.kind: outputs[:, h.offset : h.offset + h.width] for h in model.heads}


def _head_targets(batch: Batch, kind: FeatureKind) -> np.ndarray:
    if kind == FeatureKind.LPS:
        return batch.targets_lps
    if kind == FeatureKind.MFCC:
        if batch.targets_mfcc is None:
            raise ValueError("batch has no cepstral targets")
        return batch.targets_mfcc
    if batch.targets_ibm is None:
        raise ValueError("batch has no mask targets")
    return batch.targets_ibm


def _head_weight(kind: FeatureKind, alpha: float, beta: float) -> float:
    if kind == FeatureKind.LPS:
        return 1.0
    if kind == FeatureKind.MFCC:
        return alpha
    return beta


def loss_and_output_grad(
    model: Model, outputs: np.ndarray, batch: Batch, alpha: float, beta: float
) -> tuple[LossReport, np.ndarray]:
    """Multi-objective loss and its gradient with respect to the outputs.

    Spectral heads: mean over the batch of ||pred - target||^2 / ||target||^2,
    the denominator floored at 1e-8. Mask head: mean of ||pred - target||^2.
    Total = lps + alpha * mfcc + beta * ibm over the heads present.
    """
    n = outputs.shape[0]
    values: dict[FeatureKind, float] = {}
    grad = np.zeros_like(outputs)
    for spec in model.heads:
        pred = outputs[:, spec.offset : spec.offset + spec.width]
        target = _head_targets(batch, spec.kind)
        diff64 = pred.astype(np.float64) - target.astype(np.float64)
        if spec.kind == FeatureKind.IBM:
            denom = np.ones((n, 1))
        else:
            denom = np.maximum(
                np.sum(target.astype(np.float64) ** 2, axis=1, keepdims=True), LOSS_NORM_FLOOR
            )
        values[spec.kind] = float(np.mean(np.sum(diff64**2, axis=1) / denom[:, 0]))
        weight = _head_weight(spec.kind, alpha, beta)
        grad[:, spec.offset : spec.offset + spec.width] = (
            2.0 * weight / n * diff64 / denom
        ).astype(outputs.dtype)
    total = (
        values[FeatureKind.LPS]
        + alpha * values.get(FeatureKind.MFCC, 0.0)
        + beta * values.get(FeatureKind.IBM, 0.0)
    )
    report = LossReport(
        total=total,
        lps=values[FeatureKind.LPS],
        mfcc=values.get(FeatureKind.MFCC),
        ibm=values.get(FeatureKind.IBM),
    )
    return report, grad


def backward(
    model: Model, cache: _ForwardCache, output_grad: np.ndarray
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Gradient of the loss with respect to every weight and bias."""
    n_layers = len(model.weights)
    grad_w: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    grad_b: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    delta = output_grad
    prev = cache.activations[-1] if cache.activations else cache.inputs
    grad_w[-1] = prev.T @ delta
    grad_b[-1] = delta.sum(axis=0)
    for i in range(n_layers - 2, -1, -1):
        delta = delta @ model.weights[i + 1].T
        if cache.dropout_masks[i] is not None:
            delta = delta * cache.dropout_masks[i]
        delta = delta * (cache.pre_activations[i] > 0)
        prev = cache.activations[i - 1] if i > 0 else cache.inputs
        grad_w[i] = prev.T @ delta
        grad_b[i] = delta.sum(axis=0)
    return grad_w, grad_b


def batch_loss(model: Model, batch: Batch, alpha: float, beta: float) -> LossReport:
    """Loss on a batch without dropout; used for validation."""
    cache = _forward(model, batch.inputs)
    report, _ = loss_and_output_grad(model, cache.outputs, batch, alpha, beta)
    return report


@dataclass
class _Momentum:
    velocity_w: list[np.ndarray] = field(default_factory=list)
    velocity_b: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def zeros_like(cls, model: Model) -> "_Momentum":
        return cls(
            [np.zeros_like(w) for w in model.weights],
            [np.zeros_like(b) for b in model.biases],
        )


def sgd_step(
    model: Model,
    grads: tuple[list[np.ndarray], list[np.ndarray]],
    state: _Momentum,
    learning_rate: float,
    momentum: float,
) -> None:
    grad_w, grad_b = grads
    lr = np.float32(learning_rate)
    mom = np.float32(momentum)
    for i in range(len(model.weights)):
        state.velocity_w[i] = mom * state.velocity_w[i] - lr * grad_w[i]
        state.velocity_b[i] = mom * state.velocity_b[i] - lr * grad_b[i]
        model.weights[i] += state.velocity_w[i]
        model.biases[i] += state.velocity_b[i]


def _dataset_loss(
    model: Model, data: TrainingData, alpha: float, beta: float, chunk: int = 4096
) -> LossReport:
    """Average loss over a whole split, computed in bounded-size chunks."""
    totals: dict[str, float] = {}
    rows = 0
    for start in range(0, data.n_rows, chunk):
        batch = Batch(
            inputs=data.inputs[start : start + chunk],
            targets_lps=data.targets_lps[start : start + chunk],
            targets_mfcc=None if data.targets_mfcc is None else data.targets_mfcc[start : start + chunk],
            targets_ibm=None if data.targets_ibm is None else data.targets_ibm[start : start + chunk],
        )
        report = batch_loss(model, batch, alpha, beta)
        for key, value in report.as_dict().items():
            totals[key] = totals.get(key, 0.0) + value * batch.size
        rows += batch.size
    averaged = {key: value / rows for key, value in totals.items()}
    return LossReport(
        total=averaged["total"],
        lps=averaged["lps"],
        mfcc=averaged.get("mfcc"),
        ibm=averaged.get("ibm"),
    )


def train(
    model: Model,
    train_data: TrainingData,
    config: TrainConfig,
    val_data: TrainingData | None = None,
    restore_best: bool = False,
    log=None,
) -> list[EpochStats]:
    """Run mini-batch SGD in place on the model; returns per-epoch statistics.

    Deterministic for a fixed config seed: batch order and dropout masks are
    drawn from generators derived from it. A non-finite loss aborts the run
    and rolls the model back to the start of the epoch that diverged, so the
    parameters stay usable; the partial history is attached to the raised
    error. With restore_best, the parameters from the best-validation epoch
    are restored at the end.
    """
    if train_data.variant != model.variant:
        raise ValueError(
            f"data built for variant {train_data.variant.value!r}, model is {model.variant.value!r}"
        )
    dropout_rng = np.random.default_rng(config.seed + 0x5EED)
    state = _Momentum.zeros_like(model)
    history: list[EpochStats] = []
    best_val = np.inf
    best_params: tuple[list[np.ndarray], list[np.ndarray]] | None = None
    for epoch in range(config.epochs):
        lr = config.learning_rate_at(epoch)
        epoch_start = ([w.copy() for w in model.weights], [b.copy() for b in model.biases])
        running: dict[str, float] = {}
        rows = 0
        for batch in assemble_batches(train_data, config.batch_size, config.seed + epoch):
            cache = _forward(model, batch.inputs, config.dropout, dropout_rng)
            report, output_grad = loss_and_output_grad(
                model, cache.outputs, batch, config.alpha, config.beta
            )
            if not np.isfinite(report.total):
                model.weights, model.biases = epoch_start
                err = TrainingDivergedError(
                    f"non-finite loss at epoch {epoch + 1}; lower the learning rate"
                )
                err.history = history  # type: ignore[attr-defined]
                raise err
            grads = backward(model, cache, output_grad)
            sgd_step(model, grads, state, lr, config.momentum)
            for key, value in report.as_dict().items():
                running[key] = running.get(key, 0.0) + value * batch.size
            rows += batch.size
        averaged = {key: value / rows for key, value in running.items()}
        train_report = LossReport(
            total=averaged["total"],
            lps=averaged["lps"],
            mfcc=averaged.get("mfcc"),
            ibm=averaged.get("ibm"),
        )
        val_report = None
        if val_data is not None and val_data.n_rows > 0:
            val_report = _dataset_loss(model, val_data, config.alpha, config.beta)
            if val_report.total < best_val:
                best_val = val_report.total
                if restore_best:
                    best_params = (
                        [w.copy() for w in model.weights],
                        [b.copy() for b in model.biases],
                    )
        stats = EpochStats(epoch + 1, lr, train_report, val_report)
        history.append(stats)
        if log is not None:
            msg = f"epoch {stats.epoch}/{config.epochs} lr={lr:.6f} train={train_report.total:.6f}"
            if val_report is not None:
                msg += f" val={val_report.total:.6f}"
            log(msg)
    if restore_best and best_params is not None:
        model.weights = best_params[0]
        model.biases = best_params[1]
    return history


def save_model(path: str | Path, model: Model) -> None:
    """Serialize the model to a little-endian binary checkpoint."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    parts = [CHECKPOINT_MAGIC, struct.pack("<I", CHECKPOINT_VERSION)]
    parts.append(
        struct.pack(
            "<BII",
            _VARIANT_CODES[model.variant],
            model.tau,
            model.noise_aware_frames,
        )
    )
    parts.append(struct.pack("<I", len(model.weights)))
    for w in model.weights:
        parts.append(struct.pack("<II", w.shape[0], w.shape[1]))
    parts.append(struct.pack("<B", len(model.heads)))
    for spec in model.heads:
        parts.append(struct.pack("<BII", int(spec.kind), spec.offset, spec.width))
    parts.append(struct.pack("<B", len(model.stats)))
    for kind in sorted(model.stats):
        stats = model.stats[kind]
        parts.append(struct.pack("<BI", int(kind), stats.dims))
        parts.append(np.ascontiguousarray(stats.mean, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(stats.variance, dtype="<f8").tobytes())
    for w, b in zip(model.weights, model.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f4").tobytes())
    path.write_bytes(b"".join(parts))


class _Reader:
    def __init__(self, blob: bytes, path: Path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise ValueError(f"{self.path}: checkpoint truncated")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_model(path: str | Path) -> Model:
    path = Path(path)
    reader = _Reader(path.read_bytes(), path)
    if reader.take(4) != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a model checkpoint")
    (version,) = reader.unpack("<I")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    variant_code, tau, noise_aware_frames = reader.unpack("<BII")
    if variant_code not in _CODE_VARIANTS:
        raise ValueError(f"{path}: unknown variant code {variant_code}")
    (n_layers,) = reader.unpack("<I")
    shapes = [reader.unpack("<II") for _ in range(n_layers)]
    for (_, out_prev), (in_next, _) in zip(shapes[:-1], shapes[1:]):
        if out_prev != in_next:
            raise ValueError(f"{path}: inconsistent layer shapes")
    (n_heads,) = reader.unpack("<B")
    heads = []
    for _ in range(n_heads):
        kind_code, offset, width = reader.unpack("<BII")
        heads.append(HeadSpec(FeatureKind(kind_code), offset, width))
    (n_stats,) = reader.unpack("<B")
    stats = {}
    for _ in range(n_stats):
        kind_code, dims = reader.unpack("<BI")
        mean = np.frombuffer(reader.take(8 * dims), dtype="<f8").copy()
        variance = np.frombuffer(reader.take(8 * dims), dtype="<f8").copy()
        stats[FeatureKind(kind_code)] = NormStats(mean, variance)
    weights, biases = [], []
    for fan_in, fan_out in shapes:
        w = np.frombuffer(reader.take(4 * fan_in * fan_out), dtype="<f4").copy()
        weights.append(w.reshape(fan_in, fan_out))
        biases.append(np.frombuffer(reader.take(4 * fan_out), dtype="<f4").copy())
    if reader.pos != len(reader.blob):
        raise ValueError(f"{path}: {len(reader.blob) - reader.pos} trailing bytes")
    return Model(
        _CODE_VARIANTS[variant_code], tau, noise_aware_frames, weights, biases, tuple(heads), stats
    )
