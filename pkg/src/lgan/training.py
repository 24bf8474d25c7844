"""Adam, adversarial objectives, and the alternating GAN training loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .geometry import (
    GEN_PREFIX,
    LocalGenerator,
    bind_generator,
    generate_tape,
    local_generate,
    omega_tape,
    sample_local_noise,
    subsample_coordinates,
)
from .nets import BoundMlp, Mlp, bind_mlp, init_params, mlp_forward_tape, param_flatten, param_unflatten

logger = logging.getLogger(__name__)

DISC_PREFIX = "discriminator."
PROB_CLAMP = 1e-7


class TrainingDivergedError(RuntimeError):
    """A logged loss became non-finite."""

    def __init__(self, epoch: int, term: str, value: float):
        super().__init__(f"epoch {epoch}: loss term {term!r} is non-finite ({value})")
        self.epoch = epoch
        self.term = term


@dataclass
class TrainConfig:
    lr_discriminator: float = 5e-5
    lr_generator: float = 1e-3
    mu: float = 1.0
    eta: float = 0.1
    batch_size: int = 64
    epochs: int = 300
    coord_sample_size: int = 10
    zero_weight: float = 0.1
    anneal_start_epoch: int | None = None
    early_stop_patience: int = 100
    early_stop_min_epoch: int = 600
    seed: int = 0
    beta1: float = 0.5
    beta2: float = 0.999
    adam_eps: float = 1e-8
    gradient_penalty: bool = True
    include_labeled_in_penalty: bool = False

    def __post_init__(self):
        for name in ("lr_discriminator", "lr_generator", "mu", "eta", "zero_weight", "adam_eps"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be non-negative, got {self.epochs}")
        if self.coord_sample_size < 1:
            raise ValueError(f"coord_sample_size must be at least 1, got {self.coord_sample_size}")
        if not 0.0 <= self.zero_weight <= 1.0:
            raise ValueError(f"zero_weight must lie in [0, 1], got {self.zero_weight}")
        start = self.anneal_start_epoch
        if start is not None and not 0 <= start <= self.epochs:
            raise ValueError(f"anneal_start_epoch {start} outside [0, {self.epochs}]")


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(
    params: Mapping[str, np.ndarray], beta1: float = 0.5, beta2: float = 0.999, eps: float = 1e-8
) -> AdamState:
    return AdamState(
        {k: np.zeros_like(p) for k, p in params.items()},
        {k: np.zeros_like(p) for k, p in params.items()},
        0,
        beta1,
        beta2,
        eps,
    )


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update.  Inputs are left untouched."""
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    new_params, m_new, v_new = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape or state.m[name].shape != p.shape:
            raise ad.ShapeError(
                f"adam_step: {name} has shape {p.shape}, gradient {g.shape}, "
                f"moment {state.m[name].shape}"
            )
        m = b1 * state.m[name] + (1.0 - b1) * g
        v = b2 * state.v[name] + (1.0 - b2) * (g * g)
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        new_params[name] = p - lr * m_hat / (np.sqrt(v_hat) + state.eps)
        m_new[name], v_new[name] = m, v
    return new_params, replace(state, m=m_new, v=v_new, t=t)


# ---------------------------------------------------------------------------
# Schedules
# ---------------------------------------------------------------------------


def anneal_lr(base_lr: float, epoch: int, total_epochs: int, anneal_start: int | None) -> float:
    """Constant until ``anneal_start``, then linear decay reaching 0 at ``total_epochs``."""
    if anneal_start is None or epoch < anneal_start:
        return base_lr
    if epoch >= total_epochs:
        return 0.0
    return base_lr * (total_epochs - epoch) / (total_epochs - anneal_start)


def early_stop_check(history: Sequence[float], patience: int, min_epoch: int) -> bool:
    """True when training should stop.

    ``history`` holds one validation error per completed epoch.  Stop once at
    least ``min_epoch`` epochs are done and the running best has not strictly
    improved during the last ``patience`` epochs.
    """
    n = len(history)
    if n < min_epoch or n == 0:
        return False
    best_at = int(np.argmin(history))  # first occurrence: later ties are not improvements
    return n - 1 - best_at >= patience


# ---------------------------------------------------------------------------
# Adversarial objectives
# ---------------------------------------------------------------------------


def make_discriminator(
    in_dim: int, hidden: Sequence[int] = (128, 128), activation: str = "leaky_relu", seed: int = 0
) -> Mlp:
    sizes = [in_dim, *hidden, 1]
    return init_params(sizes, [activation] * len(hidden) + ["sigmoid"], seed)


def _log_prob(p: ad.Var) -> ad.Var:
    return ad.log(ad.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP))


def discriminator_loss_tape(tape: ad.Tape, disc: BoundMlp, real: ad.Var, fake: ad.Var) -> ad.Var:
    p_real, _ = _disc_forward(disc, real)
    p_fake, _ = _disc_forward(disc, fake)
    return -(ad.mean(_log_prob(p_real)) + ad.mean(_log_prob(1.0 - p_fake)))


def _disc_forward(disc: BoundMlp, x: ad.Var):
    return mlp_forward_tape(disc, x)


def discriminator_loss(disc: Mlp, real: np.ndarray, fake: np.ndarray) -> float:
    """-[mean log D(real) + mean log(1 - D(fake))] with D clamped into (1e-7, 1 - 1e-7)."""
    real, fake = np.atleast_2d(real), np.atleast_2d(fake)
    if real.shape[0] == 0 or fake.shape[0] == 0 or real.size == 0 or fake.size == 0:
        raise ValueError("discriminator_loss needs non-empty real and fake batches")
    tape = ad.Tape()
    net = bind_mlp(tape, disc, DISC_PREFIX, trainable=False)
    return float(discriminator_loss_tape(tape, net, tape.const(real), tape.const(fake)).value)


def generator_adv_loss_tape(tape: ad.Tape, disc: BoundMlp, fake: ad.Var) -> ad.Var:
    p_fake, _ = _disc_forward(disc, fake)
    return -ad.mean(_log_prob(p_fake))


def generator_adv_loss(disc: Mlp, model: LocalGenerator, x: np.ndarray, z: np.ndarray) -> float:
    """-mean log D(G(x, z))."""
    fake = local_generate(model, np.atleast_2d(x), np.atleast_2d(z))
    tape = ad.Tape()
    net = bind_mlp(tape, disc, DISC_PREFIX, trainable=False)
    return float(generator_adv_loss_tape(tape, net, tape.const(fake)).value)


def generator_gan_terms_tape(
    tape: ad.Tape,
    model: LocalGenerator,
    disc: Mlp,
    x: np.ndarray,
    z: np.ndarray,
    mu: float,
    eta: float,
    coord_subset: Sequence[int] | None,
    gen_trainable: bool = True,
) -> dict[str, ad.Var]:
    """Adversarial term, Omega terms, and their sum ("loss") for the generator step."""
    core = bind_generator(tape, model, trainable=gen_trainable)
    dnet = bind_mlp(tape, disc, DISC_PREFIX, trainable=False)
    xv = tape.const(x)
    fake, _ = generate_tape(tape, model, core, xv, z)
    terms = {"adversarial": generator_adv_loss_tape(tape, dnet, fake)}
    terms.update(omega_tape(tape, model, core, xv, mu, eta, coord_subset))
    terms["loss"] = ad.add(terms["adversarial"], terms["omega"])
    return terms


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


def _check_finite(epoch: int, row: Mapping[str, float]) -> None:
    for term, value in row.items():
        if not np.isfinite(value):
            raise TrainingDivergedError(epoch, term, value)


def minibatches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


@dataclass
class GanResult:
    generator: LocalGenerator
    discriminator: Mlp
    log: list[dict[str, float]] = field(default_factory=list)


def train_gan(
    config: TrainConfig,
    points: np.ndarray,
    generator: LocalGenerator,
    discriminator: Mlp,
) -> GanResult:
    """Alternate one discriminator and one generator Adam step per minibatch."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError(f"need a non-empty (n, D) point matrix, got shape {points.shape}")
    if points.shape[1] != generator.ambient_dim or discriminator.in_dim != generator.ambient_dim:
        raise ValueError(
            f"data dimension {points.shape[1]}, generator D={generator.ambient_dim}, "
            f"discriminator input {discriminator.in_dim}"
        )
    rng = np.random.default_rng(config.seed)
    n_dim = generator.coord_dim
    g_params = param_flatten(generator.core, GEN_PREFIX)
    d_params = param_flatten(discriminator, DISC_PREFIX)
    g_acts, d_acts = generator.core.activations, discriminator.activations
    g_state = adam_init(g_params, config.beta1, config.beta2, config.adam_eps)
    d_state = adam_init(d_params, config.beta1, config.beta2, config.adam_eps)
    gen, disc = generator, discriminator
    log = []
    for epoch in range(config.epochs):
        lr_d = anneal_lr(config.lr_discriminator, epoch, config.epochs, config.anneal_start_epoch)
        lr_g = anneal_lr(config.lr_generator, epoch, config.epochs, config.anneal_start_epoch)
        sums = dict.fromkeys(("d_loss", "g_adversarial", "omega", "locality", "orthonormality"), 0.0)
        batches = 0
        for idx in minibatches(len(points), config.batch_size, rng):
            x = points[idx]
            z = sample_local_noise(n_dim, config.zero_weight, rng, size=len(idx))
            fake = local_generate(gen, x, z)

            tape = ad.Tape()
            dnet = bind_mlp(tape, disc, DISC_PREFIX)
            d_loss = discriminator_loss_tape(tape, dnet, tape.const(x), tape.const(fake))
            d_grads = tape.backward(d_loss)
            d_params, d_state = adam_step(d_params, d_grads, d_state, lr_d)
            disc = param_unflatten(d_params, d_acts, DISC_PREFIX)

            subset = subsample_coordinates(n_dim, config.coord_sample_size, rng)
            tape = ad.Tape()
            terms = generator_gan_terms_tape(tape, gen, disc, x, z, config.mu, config.eta, subset)
            g_grads = tape.backward(terms["loss"])
            g_params, g_state = adam_step(g_params, g_grads, g_state, lr_g)
            gen = LocalGenerator(
                param_unflatten(g_params, g_acts, GEN_PREFIX), gen.ambient_dim, gen.coord_dim
            )

            sums["d_loss"] += float(d_loss.value)
            sums["g_adversarial"] += float(terms["adversarial"].value)
            for key in ("omega", "locality", "orthonormality"):
                sums[key] += float(terms[key].value)
            batches += 1
        row = {"epoch": epoch, "lr_discriminator": lr_d, "lr_generator": lr_g}
        row.update({k: v / batches for k, v in sums.items()})
        _check_finite(epoch, row)
        log.append(row)
        logger.debug("gan epoch %d: %s", epoch, row)
    return GanResult(gen, disc, log)
