"""Conditional denoising diffusion model over power allocations.

The expert allocation is normalized to [-1, 1]^M and diffused with the
standard Gaussian forward process; a dense net conditioned on the channel
gains and a sinusoidal step embedding learns to predict the injected noise.
Generation runs the ancestral reverse chain from pure noise and projects the
result back onto the feasible power simplex.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .channel import ChannelConfig, ChannelState, PowerAllocation

DEFAULT_NUM_STEPS = 50
DEFAULT_BETA_LO = 1e-4
DEFAULT_BETA_HI = 0.02
DEFAULT_HIDDEN = (128, 128, 128)
DEFAULT_TIME_EMBED_DIM = 16


@dataclass(frozen=True)
class DiffusionSchedule:
    """Linear beta schedule with derived alphas and their running products."""

    num_steps: int
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray

    def __post_init__(self):
        if self.num_steps < 1 or self.betas.shape != (self.num_steps,):
            raise ValueError("betas must have length num_steps >= 1")
        if not np.all((self.betas > 0.0) & (self.betas < 1.0)):
            raise ValueError("betas must lie strictly inside (0, 1)")
        if np.any(np.diff(self.alpha_bars) >= 0.0):
            raise ValueError("alpha_bars must be strictly decreasing")
        if np.max(np.abs(self.alphas - (1.0 - self.betas))) > 1e-12:
            raise ValueError("alphas must equal 1 - betas")
        recomputed = np.cumprod(self.alphas)
        if np.max(np.abs(recomputed - self.alpha_bars)) > 1e-12:
            raise ValueError("alpha_bars must be the running product of alphas")


def make_schedule(num_steps: int, beta_lo: float = DEFAULT_BETA_LO,
                  beta_hi: float = DEFAULT_BETA_HI) -> DiffusionSchedule:
    """Betas linearly spaced from beta_lo to beta_hi over num_steps."""
    if num_steps < 1:
        raise ValueError("num_steps must be >= 1")
    if not (0.0 < beta_lo <= beta_hi < 1.0):
        raise ValueError("need 0 < beta_lo <= beta_hi < 1")
    betas = np.linspace(beta_lo, beta_hi, num_steps)
    alphas = 1.0 - betas
    return DiffusionSchedule(num_steps=int(num_steps), betas=betas, alphas=alphas,
                             alpha_bars=np.cumprod(alphas))


def time_features(t: np.ndarray, num_steps: int, dim: int) -> np.ndarray:
    """Sinusoidal features of t/T: [sin(pi 2^k tau), cos(pi 2^k tau)]."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    half = dim // 2
    freqs = np.pi * (2.0 ** np.arange(half))
    angle = (t / float(num_steps))[:, None] * freqs[None, :]
    return np.concatenate([np.sin(angle), np.cos(angle)], axis=1)


@dataclass
class Denoiser:
    """Noise-prediction net conditioned on gains and the diffusion step.

    cond_center/cond_scale standardize the raw gains before they reach the
    net; they are fixed at first training and travel with the checkpoint.
    """

    net: nn.DenseNet
    condition_dim: int
    action_dim: int
    time_embed_dim: int = DEFAULT_TIME_EMBED_DIM
    cond_center: float = 0.0
    cond_scale: float = 1.0

    def __post_init__(self):
        want_in = self.action_dim + self.condition_dim + self.time_embed_dim
        if self.net.input_dim != want_in:
            raise ValueError(
                f"net input dim {self.net.input_dim} != action+condition+time ({want_in})"
            )
        if self.net.output_dim != self.action_dim:
            raise ValueError("net output dim must equal action_dim")
        if self.time_embed_dim % 2 != 0:
            raise ValueError("time_embed_dim must be even")


def make_denoiser(num_channels: int, rng: np.random.Generator,
                  hidden=DEFAULT_HIDDEN,
                  time_embed_dim: int = DEFAULT_TIME_EMBED_DIM) -> Denoiser:
    dims = (2 * num_channels + time_embed_dim, *hidden, num_channels)
    net = nn.DenseNet.create(dims, rng, hidden_activation="silu")
    return Denoiser(net=net, condition_dim=num_channels, action_dim=num_channels,
                    time_embed_dim=time_embed_dim)


def normalize_target(powers: np.ndarray, power_budget: float) -> np.ndarray:
    """Map powers in [0, budget] to the diffusion domain [-1, 1]."""
    return 2.0 * (np.asarray(powers, dtype=np.float64) / power_budget) - 1.0


@dataclass(frozen=True)
class TrainSample:
    """One supervised pair: conditioning gains and the normalized expert
    allocation."""

    condition: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.condition, dtype=np.float64)
        t = np.asarray(self.target, dtype=np.float64)
        if t.shape != c.shape or t.ndim != 1:
            raise ValueError("condition and target must be equal-length vectors")
        if np.any(np.abs(t) > 1.0 + 1e-12):
            raise ValueError("target must lie in [-1, 1]")
        object.__setattr__(self, "condition", c)
        object.__setattr__(self, "target", t)


def forward_noise(x0: np.ndarray, t: int, eps: np.ndarray,
                  sched: DiffusionSchedule) -> np.ndarray:
    """x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, t in 1..num_steps."""
    if not 1 <= int(t) <= sched.num_steps:
        raise ValueError(f"step {t} outside 1..{sched.num_steps}")
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != x0.shape:
        raise ValueError("eps must match x0 shape")
    ab = sched.alpha_bars[int(t) - 1]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def _forward_noise_rows(x0: np.ndarray, t: np.ndarray, eps: np.ndarray,
                        sched: DiffusionSchedule) -> np.ndarray:
    ab = sched.alpha_bars[t - 1][:, None]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def _net_inputs(denoiser: Denoiser, x_t: np.ndarray, cond: np.ndarray,
                t: np.ndarray, sched: DiffusionSchedule) -> np.ndarray:
    cond_std = (cond - denoiser.cond_center) / denoiser.cond_scale
    emb = time_features(t, sched.num_steps, denoiser.time_embed_dim)
    return np.concatenate([x_t, cond_std, emb], axis=1)


def predict_eps(denoiser: Denoiser, x_t: np.ndarray, cond: np.ndarray,
                t: np.ndarray, sched: DiffusionSchedule) -> np.ndarray:
    """Batched noise prediction for (n, M) states at per-row steps t."""
    return nn.forward(denoiser.net, _net_inputs(denoiser, x_t, cond, t, sched))


def eps_mse(predicted: np.ndarray, actual: np.ndarray) -> float:
    """Mean squared error over every component of the batch."""
    diff = predicted - actual
    return float(np.mean(diff * diff))


def training_loss(denoiser: Denoiser, conditions: np.ndarray, targets: np.ndarray,
                  sched: DiffusionSchedule, rng: np.random.Generator):
    """Denoising-score-matching loss on one minibatch.

    Each row gets a uniform step t and fresh Gaussian noise; the loss is the
    MSE between the predicted and the injected noise. Returns
    (scalar loss, flat parameter gradients).
    """
    conditions = np.atleast_2d(conditions)
    targets = np.atleast_2d(targets)
    if conditions.shape != targets.shape or conditions.shape[0] < 1:
        raise ValueError("conditions and targets must be matching nonempty batches")
    n = conditions.shape[0]
    t = rng.integers(1, sched.num_steps + 1, size=n)
    eps = rng.standard_normal(targets.shape)
    x_t = _forward_noise_rows(targets, t, eps, sched)
    inputs = _net_inputs(denoiser, x_t, conditions, t, sched)
    pred = nn.forward(denoiser.net, inputs)
    diff = pred - eps
    loss = float(np.mean(diff * diff))
    upstream = (2.0 / diff.size) * diff
    grads, _ = nn.backward(denoiser.net, inputs, upstream)
    return loss, grads


def sample_batch(denoiser: Denoiser, conditions: np.ndarray,
                 sched: DiffusionSchedule, rng: np.random.Generator,
                 deterministic_final: bool = True) -> np.ndarray:
    """Ancestral reverse chain for a batch of conditions; returns raw actions.

    x_{t-1} = (x_t - beta_t/sqrt(1-abar_t) eps_hat)/sqrt(alpha_t) + sigma_t z
    with sigma_t = sqrt(beta_t); the final step is deterministic (z = 0).
    """
    conditions = np.atleast_2d(conditions)
    n, m = conditions.shape
    if m != denoiser.condition_dim:
        raise ValueError("conditions do not match the denoiser condition_dim")
    x = rng.standard_normal((n, denoiser.action_dim))
    for step in range(sched.num_steps, 0, -1):
        beta = sched.betas[step - 1]
        alpha = sched.alphas[step - 1]
        ab = sched.alpha_bars[step - 1]
        t = np.full(n, step, dtype=np.int64)
        eps_hat = predict_eps(denoiser, x, conditions, t, sched)
        x = (x - (beta / np.sqrt(1.0 - ab)) * eps_hat) / np.sqrt(alpha)
        if step > 1 or not deterministic_final:
            x = x + np.sqrt(beta) * rng.standard_normal((n, m))
    return x


def sample(denoiser: Denoiser, condition, sched: DiffusionSchedule,
           rng: np.random.Generator, deterministic_final: bool = True) -> np.ndarray:
    """Generate one raw action vector for a single condition."""
    gains = condition.gains if isinstance(condition, ChannelState) else np.asarray(condition)
    return sample_batch(denoiser, gains[None, :], sched, rng, deterministic_final)[0]


def project_feasible_batch(raw: np.ndarray, cfg: ChannelConfig) -> np.ndarray:
    """Map raw diffusion outputs onto feasible allocations, rowwise.

    Denormalize to powers, clip negatives to zero and rescale so each row
    spends the budget; rows with no positive mass fall back to uniform.
    """
    raw = np.atleast_2d(np.asarray(raw, dtype=np.float64))
    if not np.all(np.isfinite(raw)):
        raise ValueError("raw actions must be finite")
    p = np.maximum((raw + 1.0) * (0.5 * cfg.power_budget), 0.0)
    totals = p.sum(axis=1)
    dead = totals <= 0.0
    totals[dead] = 1.0  # avoid 0/0; overwritten below
    p *= (cfg.power_budget / totals)[:, None]
    if dead.any():
        p[dead] = cfg.power_budget / cfg.num_channels
    return p


def project_feasible(raw: np.ndarray, cfg: ChannelConfig) -> PowerAllocation:
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 1 or raw.size != cfg.num_channels:
        raise ValueError("raw action length must equal num_channels")
    if not np.all(np.isfinite(raw)):
        raise ValueError("raw actions must be finite")
    return PowerAllocation(powers=project_feasible_batch(raw[None, :], cfg)[0])


@dataclass
class TrainConfig:
    """Hyperparameters of the denoiser fit (defaults are the calibrated
    artifact defaults)."""

    epochs: int = 200
    batch_size: int = 128
    learning_rate: float = 3e-4
    val_fraction: float = 0.2

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in (0, 1)")


@dataclass
class TrainHistory:
    train_losses: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)
    best_epoch: int = -1

    @property
    def best_val_loss(self) -> float:
        return self.val_losses[self.best_epoch] if self.val_losses else float("nan")


def train(denoiser: Denoiser, conditions: np.ndarray, targets: np.ndarray,
          sched: DiffusionSchedule, config: TrainConfig,
          rng: np.random.Generator) -> tuple[Denoiser, TrainHistory]:
    """Shuffled-minibatch Adam on the denoising loss with an 80/20 split.

    Validation noise is drawn once so per-epoch validation losses are
    comparable; the parameters with the best validation loss are restored at
    the end. Mutates and returns the given denoiser.
    """
    conditions = np.atleast_2d(np.asarray(conditions, dtype=np.float64))
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    n = conditions.shape[0]
    if n < 1:
        raise ValueError("training dataset is empty")
    if conditions.shape != targets.shape:
        raise ValueError("conditions/targets shape mismatch")

    if denoiser.cond_center == 0.0 and denoiser.cond_scale == 1.0:
        denoiser.cond_center = float(conditions.mean())
        denoiser.cond_scale = float(max(conditions.std(), 1e-12))

    perm = rng.permutation(n)
    n_val = int(round(n * config.val_fraction))
    n_val = min(max(n_val, 1), n - 1) if n > 1 else 0
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    c_tr, x_tr = conditions[train_idx], targets[train_idx]
    c_val, x_val = conditions[val_idx], targets[val_idx]

    # one fixed noise draw keeps validation losses comparable across epochs
    if n_val > 0:
        t_val = rng.integers(1, sched.num_steps + 1, size=n_val)
        eps_val = rng.standard_normal(x_val.shape)
        xt_val = _forward_noise_rows(x_val, t_val, eps_val, sched)
        val_inputs = _net_inputs(denoiser, xt_val, c_val, t_val, sched)

    params = denoiser.net.params
    adam = nn.AdamState.for_params(params, learning_rate=config.learning_rate)
    history = TrainHistory()
    best_params = params.copy()
    best_val = np.inf
    n_train = len(train_idx)

    for epoch in range(config.epochs):
        order = rng.permutation(n_train)
        sq_sum = 0.0
        n_elem = 0
        for start in range(0, n_train, config.batch_size):
            rows = order[start:start + config.batch_size]
            loss, grads = training_loss(denoiser, c_tr[rows], x_tr[rows], sched, rng)
            nn.adam_step(adam, params, grads)
            sq_sum += loss * rows.size * targets.shape[1]
            n_elem += rows.size * targets.shape[1]
        history.train_losses.append(sq_sum / n_elem)

        if n_val > 0:
            val_loss = eps_mse(nn.forward(denoiser.net, val_inputs), eps_val)
        else:
            val_loss = history.train_losses[-1]
        history.val_losses.append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_params = params.copy()
            history.best_epoch = epoch

    params[:] = best_params
    return denoiser, history
