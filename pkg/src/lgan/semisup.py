"""Locally consistent semi-supervised classification with a local generator.

The classifier objective has four terms: supervised cross-entropy, the
"some real class" likelihood of unlabeled points, the fake-class likelihood of
generated points, and the squared manifold gradient of every real-class
log-probability.  The generator objective combines label preservation,
feature matching and the locality/orthonormality regularizer.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .classifier import (
    CLF_PREFIX,
    ClassifierModel,
    bind_classifier,
    classifier_tape,
    predict_class,
)
from .geometry import (
    GEN_PREFIX,
    LocalGenerator,
    bind_generator,
    generate_tape,
    jacobians,
    local_generate,
    omega_tape,
    sample_local_noise,
    subsample_coordinates,
)
from .manifold import gradient_penalty_tape
from .nets import Mlp, param_flatten, param_unflatten
from .training import (
    TrainConfig,
    TrainingDivergedError,
    adam_init,
    adam_step,
    anneal_lr,
    early_stop_check,
    minibatches,
)

logger = logging.getLogger(__name__)

CLASSIFIER_TERMS = ("supervised", "unsupervised", "fake", "manifold_penalty")
GENERATOR_TERMS = ("label_preservation", "feature_matching", "omega")


def _empty(d: int) -> np.ndarray:
    return np.zeros((0, d))


def _check_labels(labels: np.ndarray, k: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        bad = labels[(labels < 0) | (labels >= k)][0]
        raise ValueError(f"label {bad} outside [0, {k})")
    return labels.astype(np.int64)


def _one_hot(labels: np.ndarray, width: int) -> np.ndarray:
    out = np.zeros((len(labels), width))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def _nll(tape: ad.Tape, logits: ad.Var, labels: np.ndarray) -> ad.Var:
    """Mean negative log-likelihood of ``labels`` under row-wise softmax."""
    picked = ad.sum(ad.mul(ad.log_softmax(logits), tape.const(_one_hot(labels, logits.shape[-1]))), axis=-1)
    return -ad.mean(picked)


def _batch(points, d: int) -> np.ndarray:
    if points is None:
        return _empty(d)
    return np.asarray(points, dtype=np.float64).reshape(-1, d)


# ---------------------------------------------------------------------------
# Classifier objective
# ---------------------------------------------------------------------------


def classifier_terms_tape(
    tape: ad.Tape,
    clf: ClassifierModel,
    gen: LocalGenerator,
    labeled: tuple[np.ndarray, np.ndarray],
    unlabeled: np.ndarray,
    rng: np.random.Generator,
    zero_weight: float = 0.1,
    gradient_penalty: bool = True,
    include_labeled: bool = False,
    trainable: bool = True,
) -> dict[str, ad.Var]:
    """Record the four classifier terms (each a mean over its batch) and their sum.

    Empty batches contribute a constant 0 for their terms.  Randomness is
    consumed only for the generated batch of the fake-class term.
    """
    d, k = clf.in_dim, clf.num_classes
    xl, yl = _batch(labeled[0], d), _check_labels(labeled[1], k)
    xu = _batch(unlabeled, d)
    net = bind_classifier(tape, clf, trainable)
    zero = tape.const(0.0)
    terms = dict.fromkeys(CLASSIFIER_TERMS, zero)

    if len(xl):
        _, z, _ = classifier_tape(net, tape.const(xl))
        terms["supervised"] = _nll(tape, z, yl)
    if len(xu):
        _, z, _ = classifier_tape(net, tape.const(xu))
        real = ad.logsumexp(ad.take(z, np.arange(k), axis=-1))
        terms["unsupervised"] = -ad.mean(ad.sub(real, ad.logsumexp(z)))

        noise = sample_local_noise(gen.coord_dim, zero_weight, rng, size=len(xu))
        fake = local_generate(gen, xu, noise)
        _, z, _ = classifier_tape(net, tape.const(fake))
        terms["fake"] = _nll(tape, z, np.full(len(xu), k))

    anchors = np.concatenate([xu, xl]) if include_labeled else xu
    if gradient_penalty and len(anchors):
        rows = np.swapaxes(jacobians(gen, anchors), -1, -2)
        _, z, zt = classifier_tape(net, tape.const(anchors), tape.const(rows))
        terms["manifold_penalty"] = ad.mean(gradient_penalty_tape(z, zt, k))

    total = terms["supervised"]
    for name in CLASSIFIER_TERMS[1:]:
        total = ad.add(total, terms[name])
    terms["loss"] = total
    return terms


def classifier_objective(
    clf: ClassifierModel,
    gen: LocalGenerator,
    labeled: tuple[np.ndarray, np.ndarray],
    unlabeled: np.ndarray,
    rng: np.random.Generator,
    zero_weight: float = 0.1,
    gradient_penalty: bool = True,
    include_labeled: bool = False,
) -> float:
    tape = ad.Tape()
    terms = classifier_terms_tape(
        tape, clf, gen, labeled, unlabeled, rng, zero_weight, gradient_penalty, include_labeled, False
    )
    return float(terms["loss"].value)


# ---------------------------------------------------------------------------
# Generator objective
# ---------------------------------------------------------------------------


def label_preservation_tape(
    tape: ad.Tape, clf_net, gen: LocalGenerator, core, labeled, rng, zero_weight: float
) -> ad.Var:
    xl, yl = labeled
    if not len(xl):
        return tape.const(0.0)
    noise = sample_local_noise(gen.coord_dim, zero_weight, rng, size=len(xl))
    moved, _ = generate_tape(tape, gen, core, tape.const(xl), noise)
    _, z, _ = classifier_tape(clf_net, moved)
    return _nll(tape, z, yl)


def feature_discrepancy_tape(real_features: ad.Var, fake_features: ad.Var) -> ad.Var:
    """||mean real feature - mean generated feature||^2."""
    return ad.squared_norm(ad.sub(ad.mean(real_features, axis=0), ad.mean(fake_features, axis=0)))


def feature_matching_tape(
    tape: ad.Tape, clf_net, gen: LocalGenerator, core, real: np.ndarray, rng, zero_weight: float
) -> ad.Var:
    if not len(real):
        return tape.const(0.0)
    noise = sample_local_noise(gen.coord_dim, zero_weight, rng, size=len(real))
    moved, _ = generate_tape(tape, gen, core, tape.const(real), noise)
    real_feats, _, _ = classifier_tape(clf_net, tape.const(real))
    fake_feats, _, _ = classifier_tape(clf_net, moved)
    return feature_discrepancy_tape(real_feats, fake_feats)


def generator_terms_tape(
    tape: ad.Tape,
    clf: ClassifierModel,
    gen: LocalGenerator,
    labeled: tuple[np.ndarray, np.ndarray],
    unlabeled: np.ndarray,
    config: TrainConfig,
    rng: np.random.Generator,
    trainable: bool = True,
) -> dict[str, ad.Var]:
    """Record label preservation, feature matching and Omega (in that rng order) plus their sum."""
    d, k = clf.in_dim, clf.num_classes
    xl, yl = _batch(labeled[0], d), _check_labels(labeled[1], k)
    xu = _batch(unlabeled, d)
    clf_net = bind_classifier(tape, clf, trainable=False)
    core = bind_generator(tape, gen, trainable)
    terms = {
        "label_preservation": label_preservation_tape(
            tape, clf_net, gen, core, (xl, yl), rng, config.zero_weight
        ),
        "feature_matching": feature_matching_tape(tape, clf_net, gen, core, xu, rng, config.zero_weight),
    }
    subset = subsample_coordinates(gen.coord_dim, config.coord_sample_size, rng)
    if len(xu):
        reg = omega_tape(tape, gen, core, tape.const(xu), config.mu, config.eta, subset)
        terms["omega"] = reg["omega"]
        terms["locality"], terms["orthonormality"] = reg["locality"], reg["orthonormality"]
    else:
        terms["omega"] = terms["locality"] = terms["orthonormality"] = tape.const(0.0)
    terms["loss"] = ad.add(
        ad.add(terms["label_preservation"], terms["feature_matching"]), terms["omega"]
    )
    return terms


def label_preservation_loss(
    clf: ClassifierModel,
    gen: LocalGenerator,
    labeled: tuple[np.ndarray, np.ndarray],
    rng: np.random.Generator,
    zero_weight: float = 0.1,
) -> float:
    """-mean log P(y_l | G(x_l, z)) with z from the noise mixture."""
    xl, yl = _batch(labeled[0], clf.in_dim), _check_labels(labeled[1], clf.num_classes)
    tape = ad.Tape()
    value = label_preservation_tape(
        tape,
        bind_classifier(tape, clf, False),
        gen,
        bind_generator(tape, gen, False),
        (xl, yl),
        rng,
        zero_weight,
    )
    return float(value.value)


def feature_matching_loss(
    clf: ClassifierModel,
    gen: LocalGenerator,
    real: np.ndarray,
    rng: np.random.Generator,
    zero_weight: float = 0.1,
) -> float:
    real = _batch(real, clf.in_dim)
    if not len(real):
        raise ValueError("feature_matching_loss needs a non-empty batch")
    tape = ad.Tape()
    value = feature_matching_tape(
        tape,
        bind_classifier(tape, clf, False),
        gen,
        bind_generator(tape, gen, False),
        real,
        rng,
        zero_weight,
    )
    return float(value.value)


def generator_semisup_objective(
    clf: ClassifierModel,
    gen: LocalGenerator,
    labeled: tuple[np.ndarray, np.ndarray],
    unlabeled: np.ndarray,
    config: TrainConfig,
    rng: np.random.Generator,
) -> float:
    tape = ad.Tape()
    return float(generator_terms_tape(tape, clf, gen, labeled, unlabeled, config, rng, False)["loss"].value)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def classification_error(predictions: np.ndarray, labels: np.ndarray) -> float:
    predictions, labels = np.asarray(predictions), np.asarray(labels)
    if predictions.shape != labels.shape or predictions.size == 0:
        raise ValueError(
            f"need equally long non-empty sequences, got {predictions.shape} and {labels.shape}"
        )
    return float(np.mean(predictions != labels))


@dataclass
class SemisupResult:
    classifier: ClassifierModel
    generator: LocalGenerator
    log: list[dict[str, float]] = field(default_factory=list)
    stopped_early: bool = False


def _rebuild_classifier(params, acts, k) -> ClassifierModel:
    net = param_unflatten(params, acts, CLF_PREFIX)
    return ClassifierModel(Mlp(net.layers[:-1]), net.layers[-1], k)


def train_semisup(
    config: TrainConfig,
    labeled: tuple[np.ndarray, np.ndarray],
    unlabeled: np.ndarray,
    validation: tuple[np.ndarray, np.ndarray] | None,
    classifier: ClassifierModel,
    generator: LocalGenerator,
) -> SemisupResult:
    """Alternate a classifier step and a generator step per unlabeled minibatch.

    When there are more labeled examples than ``batch_size``, each step uses a
    random labeled minibatch; otherwise the whole labeled set.
    """
    d, k = classifier.in_dim, classifier.num_classes
    if generator.ambient_dim != d:
        raise ValueError(f"classifier input {d} but generator ambient dimension {generator.ambient_dim}")
    xl, yl = _batch(labeled[0], d), _check_labels(labeled[1], k)
    xu = _batch(unlabeled, d)
    if len(xl) + len(xu) == 0:
        raise ValueError("no training data")
    if validation is not None:
        xv, yv = _batch(validation[0], d), _check_labels(validation[1], k)
    rng = np.random.default_rng(config.seed)
    c_params = param_flatten(classifier.net, CLF_PREFIX)
    g_params = param_flatten(generator.core, GEN_PREFIX)
    c_acts, g_acts = classifier.net.activations, generator.core.activations
    c_state = adam_init(c_params, config.beta1, config.beta2, config.adam_eps)
    g_state = adam_init(g_params, config.beta1, config.beta2, config.adam_eps)
    clf, gen = classifier, generator
    log, history = [], []
    stopped = False
    # Epochs iterate over the unlabeled set; labeled-only training iterates over labels.
    pool = xu if len(xu) else xl
    for epoch in range(config.epochs):
        lr_c = anneal_lr(config.lr_discriminator, epoch, config.epochs, config.anneal_start_epoch)
        lr_g = anneal_lr(config.lr_generator, epoch, config.epochs, config.anneal_start_epoch)
        sums = dict.fromkeys(CLASSIFIER_TERMS + GENERATOR_TERMS, 0.0)
        batches = 0
        for idx in minibatches(len(pool), config.batch_size, rng):
            ub = xu[idx] if len(xu) else _empty(d)
            if len(xl) > config.batch_size:
                pick = rng.choice(len(xl), size=config.batch_size, replace=False)
                lb = (xl[pick], yl[pick])
            else:
                lb = (xl, yl)

            tape = ad.Tape()
            c_terms = classifier_terms_tape(
                tape,
                clf,
                gen,
                lb,
                ub,
                rng,
                config.zero_weight,
                config.gradient_penalty,
                config.include_labeled_in_penalty,
            )
            c_grads = tape.backward(c_terms["loss"])
            c_params, c_state = adam_step(c_params, c_grads, c_state, lr_c)
            clf = _rebuild_classifier(c_params, c_acts, k)

            tape = ad.Tape()
            g_terms = generator_terms_tape(tape, clf, gen, lb, ub, config, rng)
            g_grads = {n: g for n, g in tape.backward(g_terms["loss"]).items() if n in g_params}
            g_params, g_state = adam_step(g_params, g_grads, g_state, lr_g)
            gen = LocalGenerator(param_unflatten(g_params, g_acts, GEN_PREFIX), gen.ambient_dim, gen.coord_dim)

            for name in CLASSIFIER_TERMS:
                sums[name] += float(c_terms[name].value)
            for name in GENERATOR_TERMS:
                sums[name] += float(g_terms[name].value)
            batches += 1
        row = {"epoch": epoch, "lr_classifier": lr_c, "lr_generator": lr_g}
        row.update({name: v / batches for name, v in sums.items()})
        for term, value in row.items():
            if not np.isfinite(value):
                raise TrainingDivergedError(epoch, term, value)
        if validation is not None and len(xv):
            row["val_error"] = classification_error(predict_class(clf, xv), yv)
            history.append(row["val_error"])
        log.append(row)
        logger.debug("semisup epoch %d: %s", epoch, row)
        if history and early_stop_check(history, config.early_stop_patience, config.early_stop_min_epoch):
            stopped = True
            break
    return SemisupResult(clf, gen, log, stopped)
