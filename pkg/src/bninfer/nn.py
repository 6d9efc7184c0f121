"""Dense feed-forward network trained to map one-hot observation encodings to
per-variable posterior distributions.

Everything is plain numpy: relu hidden layers, an affine logits layer whose
width equals the encoding width, a softmax applied independently within each
variable's block, soft-label cross-entropy summed over all blocks plus an L2
penalty on weight matrices, and stochastic gradient descent with classical
momentum (v' = mu * v - lr * g; theta' = theta + v'). Training shuffles each
epoch and keeps the parameter snapshot with the lowest validation
cross-entropy, stopping once no improvement is seen for a configured number
of epochs.

Given the same seed, data and config, training is deterministic down to the
parameter bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import EncodingLayout, Example, encode_evidence
from .network import Evidence, PosteriorSet


class NonFiniteLoss(Exception):
    """Training produced a NaN/inf loss; carries where it happened."""

    def __init__(self, loss: float, epoch: int, step: int | None = None):
        self.loss = loss
        self.epoch = epoch
        self.step = step
        where = f"epoch {epoch}" + (f", step {step}" if step is not None else " (validation)")
        super().__init__(f"non-finite loss {loss} at {where}")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and optimizer settings.

    ``layer_sizes`` lists every layer width including input and output; both
    ends must equal the encoding width of the target network.
    """

    layer_sizes: tuple[int, ...]
    l2_lambda: float = 0.005
    learning_rate: float = 1e-4
    momentum: float = 0.9
    batch_size: int = 32
    max_epochs: int = 2000
    early_stop_patience: int = 50
    use_bias: bool = True

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least input and output layers")
        if any(s < 1 for s in self.layer_sizes):
            raise ValueError("layer sizes must be positive")
        if not 0.0 <= self.momentum <= 1.0:
            raise ValueError("momentum must be in [0, 1]")
        if self.learning_rate <= 0.0:
            raise ValueError("learning rate must be positive")
        if self.l2_lambda < 0.0:
            raise ValueError("l2_lambda must be non-negative")
        if self.batch_size < 1 or self.max_epochs < 1 or self.early_stop_patience < 1:
            raise ValueError("batch_size, max_epochs, early_stop_patience must be >= 1")


def weight_parameter_count(layer_sizes: Sequence[int]) -> int:
    """Number of weight-matrix entries (biases excluded)."""
    sizes = list(layer_sizes)
    return int(sum(a * b for a, b in zip(sizes[:-1], sizes[1:])))


@dataclass
class Model:
    """Trained parameters bound to the encoding layout of one network."""

    weights: list[np.ndarray]
    biases: list[np.ndarray] | None
    layout: EncodingLayout
    network_name: str
    config: ModelConfig
    meta: dict = field(default_factory=dict)

    def parameters(self) -> list[np.ndarray]:
        if self.biases is None:
            return list(self.weights)
        params = []
        for w, b in zip(self.weights, self.biases):
            params.append(w)
            params.append(b)
        return params

    def replace_parameters(self, params: list[np.ndarray]) -> None:
        if self.biases is None:
            self.weights = list(params)
        else:
            self.weights = list(params[0::2])
            self.biases = list(params[1::2])


def init_model(
    layout: EncodingLayout,
    config: ModelConfig,
    rng: np.random.Generator,
    network_name: str = "",
) -> Model:
    """Uniform(+-sqrt(6/(fan_in+fan_out))) weights, zero biases."""
    sizes = config.layer_sizes
    if sizes[0] != layout.total_dim or sizes[-1] != layout.total_dim:
        raise ValueError(
            f"first and last layer sizes must equal the encoding width "
            f"{layout.total_dim}, got {sizes[0]} and {sizes[-1]}"
        )
    weights = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
    biases = [np.zeros(fan_out) for fan_out in sizes[1:]] if config.use_bias else None
    return Model(weights, biases, layout, network_name, config)


def forward(model: Model, x: np.ndarray) -> np.ndarray:
    """Logits for a single input vector or a batch (rows are inputs)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    h = x.reshape(1, -1) if single else x
    if h.shape[1] != model.config.layer_sizes[0]:
        raise ValueError(
            f"input width {h.shape[1]} does not match model input "
            f"{model.config.layer_sizes[0]}"
        )
    n_layers = len(model.weights)
    for l in range(n_layers):
        h = h @ model.weights[l]
        if model.biases is not None:
            h = h + model.biases[l]
        if l < n_layers - 1:
            h = np.maximum(h, 0.0)
    return h[0] if single else h


def _block_offsets(layout: EncodingLayout) -> np.ndarray:
    return np.asarray(layout.offsets, dtype=np.intp)


def multi_softmax(layout: EncodingLayout, logits: np.ndarray) -> np.ndarray:
    """Softmax applied independently within each variable's block, stabilized
    by per-block max subtraction."""
    logits = np.asarray(logits, dtype=np.float64)
    single = logits.ndim == 1
    z = logits.reshape(1, -1) if single else logits
    if z.shape[1] != layout.total_dim:
        raise ValueError(f"logits width {z.shape[1]} != layout width {layout.total_dim}")
    offsets = _block_offsets(layout)
    counts = np.asarray(layout.cards)
    block_max = np.maximum.reduceat(z, offsets, axis=1)
    e = np.exp(z - np.repeat(block_max, counts, axis=1))
    sums = np.add.reduceat(e, offsets, axis=1)
    p = e / np.repeat(sums, counts, axis=1)
    return p[0] if single else p


def _log_multi_softmax(layout: EncodingLayout, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    offsets = _block_offsets(layout)
    counts = np.asarray(layout.cards)
    block_max = np.maximum.reduceat(z, offsets, axis=1)
    shifted = z - np.repeat(block_max, counts, axis=1)
    e = np.exp(shifted)
    sums = np.add.reduceat(e, offsets, axis=1)
    log_p = shifted - np.repeat(np.log(sums), counts, axis=1)
    p = e / np.repeat(sums, counts, axis=1)
    return p, log_p


def _stack_examples(examples: Sequence[Example]) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([ex.input for ex in examples])
    y = np.stack([ex.target for ex in examples])
    return x, y


def _loss_and_grads(
    layout: EncodingLayout,
    params: list[np.ndarray],
    use_bias: bool,
    x: np.ndarray,
    y: np.ndarray,
    l2_lambda: float,
) -> tuple[float, list[np.ndarray]]:
    weights = params[0::2] if use_bias else params
    biases = params[1::2] if use_bias else None
    n_layers = len(weights)
    batch = x.shape[0]

    activations = [x]
    pre = []
    h = x
    for l in range(n_layers):
        z = h @ weights[l]
        if biases is not None:
            z = z + biases[l]
        pre.append(z)
        h = np.maximum(z, 0.0) if l < n_layers - 1 else z
        activations.append(h)

    p, log_p = _log_multi_softmax(layout, pre[-1])
    data_loss = float(-(y * log_p).sum() / batch)
    reg = l2_lambda * float(sum((w * w).sum() for w in weights))
    total = data_loss + reg

    # d(data)/d(logit) for soft labels: p * (block sum of y) - y, per example
    offsets = _block_offsets(layout)
    counts = np.asarray(layout.cards)
    y_block_sums = np.add.reduceat(y, offsets, axis=1)
    d_z = (p * np.repeat(y_block_sums, counts, axis=1) - y) / batch

    grad_w: list[np.ndarray] = [np.empty(0)] * n_layers
    grad_b: list[np.ndarray] = [np.empty(0)] * n_layers
    delta = d_z
    for l in range(n_layers - 1, -1, -1):
        grad_w[l] = activations[l].T @ delta + 2.0 * l2_lambda * weights[l]
        if biases is not None:
            grad_b[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ weights[l].T) * (pre[l - 1] > 0.0)

    if biases is None:
        grads = grad_w
    else:
        grads = []
        for gw, gb in zip(grad_w, grad_b):
            grads.append(gw)
            grads.append(gb)
    return total, grads


def loss(
    layout: EncodingLayout, model: Model, batch: Sequence[Example]
) -> tuple[float, list[np.ndarray]]:
    """Mean soft-label cross-entropy over the batch plus the L2 penalty, with
    the exact gradient for every parameter (same order as ``parameters()``)."""
    if len(batch) == 0:
        raise ValueError("batch must be non-empty")
    x, y = _stack_examples(batch)
    return _loss_and_grads(
        layout, model.parameters(), model.biases is not None, x, y,
        model.config.l2_lambda,
    )


def momentum_step(
    params: Sequence[np.ndarray],
    velocity: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    learning_rate: float,
    momentum: float,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Classical momentum: v' = mu*v - lr*g; theta' = theta + v'."""
    new_velocity = [momentum * v - learning_rate * g for v, g in zip(velocity, grads)]
    new_params = [p + v for p, v in zip(params, new_velocity)]
    return new_params, new_velocity


def _validation_loss(
    layout: EncodingLayout,
    params: list[np.ndarray],
    use_bias: bool,
    x: np.ndarray,
    y: np.ndarray,
) -> float:
    weights = params[0::2] if use_bias else params
    biases = params[1::2] if use_bias else None
    h = x
    n_layers = len(weights)
    for l in range(n_layers):
        h = h @ weights[l]
        if biases is not None:
            h = h + biases[l]
        if l < n_layers - 1:
            h = np.maximum(h, 0.0)
    _, log_p = _log_multi_softmax(layout, h)
    return float(-(y * log_p).sum() / x.shape[0])


def train(
    layout: EncodingLayout,
    config: ModelConfig,
    train_set: Sequence[Example],
    validation_set: Sequence[Example],
    rng: np.random.Generator,
    network_name: str = "",
) -> Model:
    """Mini-batch momentum SGD with per-epoch reshuffling and early stopping.

    The returned model holds the snapshot with the lowest validation
    cross-entropy (data term only, so snapshots compare on held-out fit).
    """
    if len(train_set) == 0 or len(validation_set) == 0:
        raise ValueError("train and validation sets must be non-empty")
    model = init_model(layout, config, rng, network_name)
    params = model.parameters()
    velocity = [np.zeros_like(p) for p in params]
    x_train, y_train = _stack_examples(train_set)
    x_val, y_val = _stack_examples(validation_set)
    use_bias = model.biases is not None

    best_params = [p.copy() for p in params]
    best_val = np.inf
    best_epoch = 0
    epochs_without_improvement = 0
    epochs_run = 0

    n = len(train_set)
    for epoch in range(config.max_epochs):
        epochs_run = epoch + 1
        perm = rng.permutation(n)
        for step, start in enumerate(range(0, n, config.batch_size)):
            idx = perm[start : start + config.batch_size]
            batch_loss, grads = _loss_and_grads(
                layout, params, use_bias, x_train[idx], y_train[idx], config.l2_lambda
            )
            if not np.isfinite(batch_loss):
                raise NonFiniteLoss(batch_loss, epoch, step)
            params, velocity = momentum_step(
                params, velocity, grads, config.learning_rate, config.momentum
            )
        val_loss = _validation_loss(layout, params, use_bias, x_val, y_val)
        if not np.isfinite(val_loss):
            raise NonFiniteLoss(val_loss, epoch)
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_params = [p.copy() for p in params]
            epochs_without_improvement = 0
        else:
            epochs_without_improvement += 1
            if epochs_without_improvement >= config.early_stop_patience:
                break

    model.replace_parameters(best_params)
    model.meta = {
        "epochs_run": epochs_run,
        "best_epoch": best_epoch,
        "best_validation_loss": best_val,
        "train_examples": len(train_set),
        "validation_examples": len(validation_set),
    }
    return model


def predict(model: Model, evidence: Evidence) -> PosteriorSet:
    """Posterior estimate for every variable given the evidence."""
    layout = model.layout
    for var, val in evidence.items():
        if not 0 <= var < len(layout.cards) or not 0 <= val < layout.cards[var]:
            raise ValueError(f"evidence {var}={val} does not fit the model layout")
    probs = multi_softmax(layout, forward(model, encode_evidence(layout, evidence)))
    return [probs[layout.block(i)] for i in range(len(layout.cards))]


# ------------------------------------------------------------ checkpoints

CHECKPOINT_FORMAT = "bninfer-checkpoint-v1"


def save_model(model: Model, path: str | Path) -> None:
    """Single-file checkpoint: one JSON header line (config, layout
    fingerprint, array shapes) followed by raw little-endian float64 data."""
    arrays = model.parameters()
    header = {
        "format": CHECKPOINT_FORMAT,
        "network_name": model.network_name,
        "cards": list(model.layout.cards),
        "config": asdict(model.config),
        "meta": model.meta,
        "shapes": [list(a.shape) for a in arrays],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_model(path: str | Path) -> Model:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unrecognized checkpoint format {header.get('format')!r}")
        config = ModelConfig(**{**header["config"], "layer_sizes": tuple(header["config"]["layer_sizes"])})
        layout = EncodingLayout.from_cards(header["cards"])
        arrays = []
        for shape in header["shapes"]:
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(count * 8), dtype="<f8").reshape(shape)
            arrays.append(data.astype(np.float64))
        model = Model([], None if not config.use_bias else [], layout,
                      header["network_name"], config, header["meta"])
        if config.use_bias:
            model.biases = []
        else:
            model.biases = None
        model.replace_parameters(arrays)
        return model
