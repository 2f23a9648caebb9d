"""MSE training with Adam and validation-loss early stopping.

Adam keeps exponentially decaying averages of gradients (first moment)
and squared gradients (second moment) with bias correction; defaults
follow the training protocol: lr 0.01, betas (0.9, 0.99). Training
halts once the validation loss has failed to improve for ``patience``
consecutive validation epochs, and the returned state carries the
parameters of the best validation epoch. A NaN/Inf loss aborts with a
diagnostic rather than continuing to train on garbage.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from naada.network import NetworkState, forward
from naada.tensor import Tensor, no_grad


class TrainingDiverged(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8
    batch_size: int = 16
    max_epochs: int = 100
    patience: int = 5
    seed: int = 0
    val_interval: int = 1

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.val_interval < 1:
            raise ValueError("val_interval must be >= 1")


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean squared error over every element."""
    if pred.shape != target.shape:
        raise ValueError(f"mse_loss: shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - target
    return (diff * diff).mean()


def adam_step(params: dict, state: AdamState, cfg: TrainConfig):
    """One bias-corrected Adam update over named parameters (in place)."""
    state.step += 1
    t = state.step
    bc1 = 1.0 - cfg.beta1**t
    bc2 = 1.0 - cfg.beta2**t
    for name, p in params.items():
        if p.grad is None:
            raise ValueError(f"adam_step: parameter {name!r} has no gradient")
        g = p.grad
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m, v = state.m[name], state.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        p.data -= cfg.lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    train_psnr: float
    val_psnr: float

    ROW_FIELDS = ("epoch", "train_loss", "val_loss", "train_psnr", "val_psnr")

    def row(self):
        return [self.epoch, self.train_loss, self.val_loss, self.train_psnr, self.val_psnr]


@dataclass
class TrainResult:
    state: NetworkState
    history: list
    best_epoch: int
    best_val_loss: float
    stopped_early: bool


def write_history_csv(history, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EpochStats.ROW_FIELDS)
        for row in history:
            writer.writerow(row.row())


def _psnr_from_mse(mse: float) -> float:
    if mse <= 0.0:
        return 100.0
    return float(min(10.0 * np.log10(1.0 / mse), 100.0))


def _eval_loss(state: NetworkState, noisy, clean, batch_size):
    was_training = state.training
    state.eval()
    total, count = 0.0, 0
    with no_grad():
        for start in range(0, noisy.shape[0], batch_size):
            nb = noisy[start : start + batch_size]
            cb = clean[start : start + batch_size]
            pred = forward(Tensor(nb), state)
            total += float(np.mean((pred.data - cb) ** 2)) * nb.shape[0]
            count += nb.shape[0]
    state.training = was_training
    return total / count


def _snapshot(state: NetworkState):
    params = {k: t.data.copy() for k, t in state.named_parameters().items()}
    buffers = {k: b.copy() for k, b in state.named_buffers().items()}
    return params, buffers


def _restore(state: NetworkState, snapshot):
    params, buffers = snapshot
    for k, t in state.named_parameters().items():
        t.data[...] = params[k]
    for k, b in state.named_buffers().items():
        b[...] = buffers[k]


def train(state: NetworkState, train_pairs, val_pairs, cfg: TrainConfig,
          log=None) -> TrainResult:
    """Fit ``state`` on (noisy, clean) arrays of shape [N,1,P,P].

    ``train_pairs`` / ``val_pairs`` are (noisy, clean) tuples. Returns
    the best-validation state (restored in place) plus the per-epoch
    history. Deterministic for a fixed config and data.
    """
    tr_noisy, tr_clean = train_pairs
    va_noisy, va_clean = val_pairs
    if tr_noisy.shape[0] == 0 or va_noisy.shape[0] == 0:
        raise ValueError("train: empty training or validation set")

    rng = np.random.default_rng(cfg.seed)
    opt = AdamState()
    params = state.named_parameters()

    history = []
    best = (None, np.inf, -1)  # snapshot, val loss, epoch
    strikes = 0
    stopped_early = False

    for epoch in range(1, cfg.max_epochs + 1):
        state.train()
        order = rng.permutation(tr_noisy.shape[0])
        epoch_loss, seen = 0.0, 0
        for start in range(0, order.size, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            pred = forward(Tensor(tr_noisy[idx]), state)
            loss = mse_loss(pred, Tensor(tr_clean[idx]))
            loss_val = loss.item()
            if not np.isfinite(loss_val):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}"
                )
            state.zero_grad()
            loss.backward()
            adam_step(params, opt, cfg)
            epoch_loss += loss_val * idx.size
            seen += idx.size
        train_loss = epoch_loss / seen

        if epoch % cfg.val_interval == 0:
            val_loss = _eval_loss(state, va_noisy, va_clean, cfg.batch_size)
            stats = EpochStats(epoch, train_loss, val_loss,
                               _psnr_from_mse(train_loss), _psnr_from_mse(val_loss))
            history.append(stats)
            if log:
                log(f"epoch {epoch}: train {train_loss:.6f} val {val_loss:.6f} "
                    f"({stats.val_psnr:.2f} dB)")
            if val_loss < best[1]:
                best = (_snapshot(state), val_loss, epoch)
                strikes = 0
            else:
                strikes += 1
                if strikes >= cfg.patience:
                    stopped_early = True
                    break
        else:
            history.append(EpochStats(epoch, train_loss, np.nan,
                                      _psnr_from_mse(train_loss), np.nan))

    if best[0] is not None:
        _restore(state, best[0])
    return TrainResult(
        state=state,
        history=history,
        best_epoch=best[2],
        best_val_loss=best[1],
        stopped_early=stopped_early,
    )
