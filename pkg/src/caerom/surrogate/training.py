"""Mini-batch Adam training loops for the autoencoder and the regression network."""

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from caerom.errors import ConfigurationError, DimensionError, TrainingError
from caerom.nn.losses import mse_loss
from caerom.nn.optim import AdamState, adam_step
from caerom.surrogate.models import AffineScaling, ConvAutoencoder, FeedForward, minmax_scaling

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 100
    lr: float = 1e-4
    batch_size: int = 16
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.lr <= 0:
            raise ConfigurationError("learning rate must be positive")

    def to_dict(self):
        return {"epochs": self.epochs, "lr": self.lr, "batch_size": self.batch_size,
                "seed": self.seed, "shuffle": self.shuffle}


@dataclass
class TrainResult:
    model: object
    loss_history: list = field(default_factory=list)
    wall_time: float = 0.0
    config: TrainConfig = None

    @property
    def final_loss(self):
        return self.loss_history[-1] if self.loss_history else float("nan")


def make_rngs(seed):
    """Independent counter-based generators for weight init and batch shuffling."""
    init_ss, shuffle_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.Generator(np.random.Philox(init_ss)), np.random.Generator(np.random.Philox(shuffle_ss))


def _layer_norms(params):
    return [float(np.linalg.norm(p)) for p in params]


def _run_epochs(n, cfg, shuffle_rng, step_fn, params):
    if cfg.batch_size > n:
        raise ConfigurationError(f"batch_size {cfg.batch_size} exceeds dataset size {n}")
    state = AdamState(lr=cfg.lr)
    history = []
    order = np.arange(n)
    for epoch in range(cfg.epochs):
        if cfg.shuffle:
            order = shuffle_rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            loss, grads = step_fn(idx)
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch {b}",
                    {"epoch": epoch, "batch": b, "layer_norms": _layer_norms(params)},
                )
            try:
                adam_step(params, grads, state)
            except TrainingError as exc:
                exc.diagnostics.update(epoch=epoch, batch=b, layer_norms=_layer_norms(params))
                raise
            total += loss * len(idx)
        history.append(total / n)
    return history


def train_cae(solutions, arch, cfg, scaling=None, dtype=np.float32, log_every=0):
    """Fit a :class:`ConvAutoencoder` to a stack of solution matrices ``(N, d, n_t)``.

    Minimizes the batch-averaged squared Frobenius reconstruction error of the
    normalized matrices. The normalization (global min-max to ``[-1, 1]``) is
    computed from ``solutions`` unless ``scaling`` is given, and frozen into
    the returned model.
    """
    solutions = np.asarray(solutions)
    if solutions.ndim != 3 or solutions.shape[0] == 0:
        raise DimensionError(f"expected a non-empty (N, d, n_t) stack, got {solutions.shape}")
    init_rng, shuffle_rng = make_rngs(cfg.seed)
    model = ConvAutoencoder(arch, rng=init_rng, dtype=dtype)
    if solutions.shape[1:] != model.input_shape:
        raise DimensionError(f"solutions have shape {solutions.shape[1:]}, architecture expects {model.input_shape}")
    model.scaling = scaling if scaling is not None else minmax_scaling(solutions)
    X = model.normalize(solutions)
    params = model.parameters()
    t0 = time.perf_counter()

    def step(idx):
        xb = X[idx]
        z = model.encoder.forward(xb)
        out = model.decoder.forward(z)
        loss, g = mse_loss(out, xb)
        gz = model.decoder.backward(g)
        model.encoder.backward(gz)
        return loss, model.gradients()

    history = _run_epochs(len(X), cfg, shuffle_rng, _logged(step, log_every, cfg, "cae"), params)
    model.encoder.clear_caches()
    model.decoder.clear_caches()
    return TrainResult(model, history, time.perf_counter() - t0, cfg)


def train_ffnn(params, latents, arch, cfg, dtype=np.float32, log_every=0):
    """Fit a :class:`FeedForward` network mapping parameter vectors to latent vectors."""
    theta = np.asarray(params, dtype=float)
    if theta.ndim == 1:
        theta = theta[:, None]
    z = np.asarray(latents, dtype=float)
    if theta.shape[0] != z.shape[0] or theta.shape[0] == 0:
        raise DimensionError(f"{theta.shape[0]} parameter vectors vs {z.shape[0]} latents")
    init_rng, shuffle_rng = make_rngs(cfg.seed)
    net = FeedForward(arch, rng=init_rng, dtype=dtype)
    if theta.shape[1] != arch.n_in or z.shape[1] != arch.n_out:
        raise DimensionError(f"data ({theta.shape[1]} -> {z.shape[1]}) does not match architecture "
                             f"({arch.n_in} -> {arch.n_out})")
    net.input_scaling = minmax_scaling(theta, lo=0.0, hi=1.0, axis=0)
    zmean = z.mean(axis=0)
    zstd = z.std(axis=0)
    net.output_scaling = AffineScaling(zmean, np.where(zstd > 0, zstd, 1.0))
    net.param_lo = theta.min(axis=0)
    net.param_hi = theta.max(axis=0)
    Xs = net.scale_inputs(theta)
    Ys = net.output_scaling.forward(z).astype(net.dtype)
    weights = net.parameters()
    t0 = time.perf_counter()

    def step(idx):
        out = net.net.forward(Xs[idx])
        loss, g = mse_loss(out, Ys[idx])
        net.net.backward(g)
        return loss, net.gradients()

    history = _run_epochs(len(Xs), cfg, shuffle_rng, _logged(step, log_every, cfg, "ffnn"), weights)
    net.net.clear_caches()
    return TrainResult(net, history, time.perf_counter() - t0, cfg)


def _logged(step, every, cfg, name):
    if not every:
        return step
    counter = {"n": 0}

    def wrapped(idx):
        loss, grads = step(idx)
        counter["n"] += 1
        if counter["n"] % every == 0:
            log.info("%s step %d loss %.6g", name, counter["n"], loss)
        return loss, grads

    return wrapped
