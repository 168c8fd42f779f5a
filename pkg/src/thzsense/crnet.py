"""The compression/reconstruction network and its training loop.

Three stages operate on two-channel (real/imag) spectra:

- compression: a full-width bias-free convolution whose filters are the
  rows of the learned sensing matrix, applied to each channel separately
  by folding the channel axis into the batch;
- coarse reconstruction: a full-width convolution mapping the n_m
  measurements back to n_s bins, then batch norm and PReLU;
- fine reconstruction: residual blocks of three conv-BN-PReLU stages with
  an identity skip across each block.

All three parameter groups train jointly against the MSE between the
network output and the clean spectrum.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import checkpoint
from .autodiff import Adam, BatchNorm1d, Conv1d, Module, PReLU, Tensor, add, mse_loss, no_grad, reshape
from .exceptions import ConfigurationError, TrainingDiverged
from .representation import denormalize, normalize, to_channels, to_complex

_SHUFFLE_STREAM = 0x5D


@dataclass
class CrnetConfig:
    n_s: int = 256
    n_m: int = 128
    residual_blocks: int = 6
    block_filters: tuple[int, ...] = (64, 32, 2)
    kernel_size: int = 3
    lr: float = 0.0005
    epochs: int = 20
    batch_size: int = 128
    seed: int = 0

    def __post_init__(self):
        self.block_filters = tuple(self.block_filters)
        if not 1 <= self.n_m < self.n_s:
            raise ConfigurationError(f"need 1 <= n_m < n_s, got n_m={self.n_m}, n_s={self.n_s}")
        if self.block_filters[-1] != 2:
            raise ConfigurationError(
                f"last block filter count must be 2 (two-channel spectrum), got {self.block_filters}"
            )
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigurationError(
                f"kernel_size must be odd for same-padding, got {self.kernel_size}"
            )
        if self.residual_blocks < 0 or self.epochs < 0 or self.batch_size < 1:
            raise ConfigurationError("residual_blocks/epochs must be >= 0 and batch_size >= 1")


class ResidualBlock(Module):
    """conv-BN-PReLU stages chained, with the block input added to the output."""

    def __init__(self, filters: tuple[int, ...], kernel_size: int,
                 rng: np.random.Generator, dtype=np.float32):
        pad = (kernel_size - 1) // 2
        channels = (2,) + tuple(filters)
        self.convs = [
            Conv1d(channels[i], channels[i + 1], kernel_size, padding=pad, rng=rng, dtype=dtype)
            for i in range(len(filters))
        ]
        self.bns = [BatchNorm1d(f, dtype=dtype) for f in filters]
        self.acts = [PReLU(f, dtype=dtype) for f in filters]

    def forward(self, x: Tensor) -> Tensor:
        y = x
        for conv, bn, act in zip(self.convs, self.bns, self.acts):
            y = act(bn(conv(y)))
        return add(x, y)


class CrnetModel(Module):
    def __init__(self, cfg: CrnetConfig, rng: np.random.Generator, dtype=np.float32):
        self.cfg = cfg
        self.compression = Conv1d(1, cfg.n_m, kernel_size=cfg.n_s, bias=False,
                                  rng=rng, dtype=dtype)
        self.coarse = Conv1d(1, cfg.n_s, kernel_size=cfg.n_m, rng=rng, dtype=dtype)
        self.coarse_bn = BatchNorm1d(2, dtype=dtype)
        self.coarse_act = PReLU(2, dtype=dtype)
        self.blocks = [
            ResidualBlock(cfg.block_filters, cfg.kernel_size, rng, dtype)
            for _ in range(cfg.residual_blocks)
        ]
        self.normalization: tuple[float, float] | None = None
        self.trained_epochs = 0

    @property
    def dtype(self):
        return self.compression.weight.dtype

    def forward(self, x) -> Tensor:
        if not isinstance(x, Tensor):
            x = Tensor(np.asarray(x, dtype=self.dtype))
        batch = x.shape[0]
        if x.shape[1:] != (2, self.cfg.n_s):
            raise ConfigurationError(
                f"expected input (batch, 2, {self.cfg.n_s}), got {x.shape}"
            )
        # fold channels into the batch: both dense stages act per channel
        folded = reshape(x, (2 * batch, 1, self.cfg.n_s))
        z = self.compression(folded)                       # (2B, n_m, 1)
        z = reshape(z, (2 * batch, 1, self.cfg.n_m))
        y = self.coarse(z)                                 # (2B, n_s, 1)
        y = reshape(y, (batch, 2, self.cfg.n_s))
        y = self.coarse_act(self.coarse_bn(y))
        for block in self.blocks:
            y = block(y)
        return y


def build_model(cfg: CrnetConfig, rng: np.random.Generator | None = None,
                dtype=np.float32) -> CrnetModel:
    """Construct a model with deterministic initialization from cfg.seed."""
    rng = rng or np.random.default_rng(cfg.seed)
    return CrnetModel(cfg, rng, dtype=dtype)


def _epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, _SHUFFLE_STREAM, epoch)))


def _batched_loss(model: CrnetModel, inputs: np.ndarray, labels: np.ndarray,
                  batch_size: int) -> float:
    """Mean MSE over a dataset in eval mode (no gradient recording)."""
    total = 0.0
    with no_grad():
        for lo in range(0, inputs.shape[0], batch_size):
            xb = inputs[lo:lo + batch_size]
            yb = labels[lo:lo + batch_size]
            loss = mse_loss(model(xb), Tensor(np.asarray(yb, dtype=model.dtype)))
            total += loss.item() * xb.shape[0]
    return total / inputs.shape[0]


def train_model(model: CrnetModel, train_data, val_data, *,
                optimizer: Adam | None = None, epochs: int | None = None,
                on_epoch_end=None) -> list[dict]:
    """Run `epochs` additional epochs of Adam on shuffled mini-batches.

    train_data / val_data are (inputs, labels) pairs of (N, 2, n_s)
    arrays, already normalized. The shuffle stream is keyed on
    (cfg.seed, global epoch index), so training resumed from a checkpoint
    reproduces the uninterrupted run exactly. Returns one history record
    per epoch: {"epoch", "train_loss", "val_loss"} with validation always
    measured in eval mode. A non-finite batch loss aborts.
    """
    cfg = model.cfg
    train_x, train_y = train_data
    val_x, val_y = val_data
    n = train_x.shape[0]
    if cfg.batch_size > n:
        raise ConfigurationError(f"batch_size {cfg.batch_size} exceeds training-set size {n}")
    if optimizer is None:
        optimizer = Adam(list(model.named_parameters()), lr=cfg.lr)
    epochs = cfg.epochs if epochs is None else epochs

    history = []
    for _ in range(epochs):
        global_epoch = model.trained_epochs + 1
        model.train()
        perm = _epoch_rng(cfg.seed, global_epoch).permutation(n)
        total = 0.0
        for batch_idx, lo in enumerate(range(0, n, cfg.batch_size)):
            take = perm[lo:lo + cfg.batch_size]
            xb = Tensor(np.ascontiguousarray(train_x[take], dtype=model.dtype))
            yb = Tensor(np.ascontiguousarray(train_y[take], dtype=model.dtype))
            loss = mse_loss(model(xb), yb)
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingDiverged(global_epoch, batch_idx, float(cfg.lr))
            model.zero_grad()
            loss.backward()
            optimizer.step()
            total += value * take.shape[0]
        model.eval()
        record = {
            "epoch": global_epoch,
            "train_loss": total / n,
            "val_loss": _batched_loss(model, val_x, val_y, cfg.batch_size),
        }
        model.trained_epochs = global_epoch
        history.append(record)
        if on_epoch_end is not None:
            on_epoch_end(model, record)
    return history


def reconstruct_batch(model: CrnetModel, spectra: np.ndarray) -> np.ndarray:
    """Reconstruct physical-scale complex spectra (n, n_s) -> (n, n_s).

    Inputs are normalized with the constants learned at training time,
    passed through the network in eval mode, and denormalized back.
    Without stored constants the map is the identity ([0, 1] pass-through).
    """
    lo, hi = model.normalization if model.normalization is not None else (0.0, 1.0)
    model.eval()
    channels = to_channels(normalize(np.asarray(spectra), lo, hi), dtype=model.dtype)
    with no_grad():
        out = model(channels).data
    return to_complex(denormalize(out.astype(np.float64), lo, hi))


def reconstruct(model: CrnetModel, noisy_spectrum: np.ndarray) -> np.ndarray:
    """Single-spectrum convenience wrapper around `reconstruct_batch`."""
    return reconstruct_batch(model, np.asarray(noisy_spectrum)[None, :])[0]


def count_params(model: CrnetModel) -> int:
    """Total trainable scalars (BN running statistics excluded)."""
    return model.count_params()


def save_checkpoint(model: CrnetModel, path, optimizer: Adam | None = None):
    """Write parameters, BN running stats, Adam state, and metadata."""
    cfg = model.cfg
    blobs: dict[str, np.ndarray] = {
        "meta/n_s": np.float32(cfg.n_s),
        "meta/n_m": np.float32(cfg.n_m),
        "meta/residual_blocks": np.float32(cfg.residual_blocks),
        "meta/block_filters": np.asarray(cfg.block_filters, dtype=np.float32),
        "meta/kernel_size": np.float32(cfg.kernel_size),
        "meta/lr": np.float32(cfg.lr),
        "meta/epochs": np.float32(cfg.epochs),
        "meta/batch_size": np.float32(cfg.batch_size),
        "meta/seed": np.float32(cfg.seed),
        "meta/trained_epochs": np.float32(model.trained_epochs),
    }
    if model.normalization is not None:
        blobs["norm/lo"] = np.float32(model.normalization[0])
        blobs["norm/hi"] = np.float32(model.normalization[1])
    for name, p in model.named_parameters():
        blobs[f"param/{name}"] = p.data
    for name, module in model.named_modules():
        if isinstance(module, BatchNorm1d) and module.running_mean is not None:
            blobs[f"bn/{name}/mean"] = module.running_mean
            blobs[f"bn/{name}/var"] = module.running_var
    if optimizer is not None:
        for key, arr in optimizer.state_dict().items():
            blobs[f"adam/{key}"] = arr
    checkpoint.write_blobs(path, blobs)


def load_checkpoint(path) -> tuple[CrnetModel, Adam | None]:
    """Rebuild a model (and its optimizer when saved) from `save_checkpoint` output."""
    blobs = checkpoint.read_blobs(path)
    cfg = CrnetConfig(
        n_s=int(blobs["meta/n_s"]),
        n_m=int(blobs["meta/n_m"]),
        residual_blocks=int(blobs["meta/residual_blocks"]),
        block_filters=tuple(int(f) for f in blobs["meta/block_filters"]),
        kernel_size=int(blobs["meta/kernel_size"]),
        lr=float(blobs["meta/lr"]),
        epochs=int(blobs["meta/epochs"]),
        batch_size=int(blobs["meta/batch_size"]),
        seed=int(blobs["meta/seed"]),
    )
    model = build_model(cfg)
    model.trained_epochs = int(blobs["meta/trained_epochs"])
    if "norm/lo" in blobs:
        model.normalization = (float(blobs["norm/lo"]), float(blobs["norm/hi"]))
    for name, p in model.named_parameters():
        stored = blobs[f"param/{name}"]
        if stored.shape != p.data.shape:
            raise ConfigurationError(
                f"checkpoint parameter {name} has shape {stored.shape}, expected {p.data.shape}"
            )
        p.data = stored.astype(p.data.dtype)
    for name, module in model.named_modules():
        if isinstance(module, BatchNorm1d) and f"bn/{name}/mean" in blobs:
            module.running_mean = blobs[f"bn/{name}/mean"].astype(np.float32)
            module.running_var = blobs[f"bn/{name}/var"].astype(np.float32)
    optimizer = None
    if "adam/step" in blobs:
        optimizer = Adam(list(model.named_parameters()), lr=cfg.lr)
        optimizer.load_state_dict(
            {key[len("adam/"):]: arr for key, arr in blobs.items() if key.startswith("adam/")}
        )
    return model, optimizer
