import numpy as np
import pytest

from lgan import autodiff as ad
from lgan.classifier import CLF_PREFIX, ClassifierModel, log_probs, make_classifier, predict_class, predict_from_logits
from lgan.data import make_two_moons, split_labeled
from lgan.geometry import make_local_generator
from lgan.nets import DenseLayer, Mlp, param_flatten, param_unflatten
from lgan.semisup import (
    CLASSIFIER_TERMS,
    GENERATOR_TERMS,
    classification_error,
    classifier_objective,
    classifier_terms_tape,
    feature_discrepancy_tape,
    feature_matching_loss,
    generator_semisup_objective,
    generator_terms_tape,
    label_preservation_loss,
    train_semisup,
)
from lgan.training import TrainConfig


def head_only(w, b):
    head = DenseLayer(np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64))
    return ClassifierModel(Mlp(()), head, head.out_dim - 1)


def uniform_classifier(d=2, k=2, hidden=(4,)):
    clf = make_classifier(d, k, hidden, seed=0)
    head = DenseLayer(np.zeros_like(clf.head.weights), np.zeros(k + 1))
    return ClassifierModel(clf.trunk, head, k)


GEN = make_local_generator(2, 1, (6,), "tanh", 3)
RNG = np.random.default_rng


def empty():
    return np.zeros((0, 2))


def terms(clf, labeled, unlabeled, penalty=True):
    tape = ad.Tape()
    t = classifier_terms_tape(tape, clf, GEN, labeled, unlabeled, RNG(0), 0.1, penalty, False, False)
    return {k: float(v.value) for k, v in t.items()}


def test_perfect_classifier_gives_zero():
    clf = head_only([[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]], [800.0, 0.0, 0.0])
    got = classifier_objective(clf, GEN, (np.ones((1, 2)), np.array([0])), empty(), RNG(0))
    assert got == pytest.approx(0.0, abs=1e-300)


def test_uniform_classifier_terms():
    clf = uniform_classifier()
    t = terms(clf, (np.ones((3, 2)), np.array([0, 1, 1])), np.zeros((5, 2)), penalty=False)
    assert t["supervised"] == pytest.approx(np.log(3), abs=1e-12)
    assert t["unsupervised"] == pytest.approx(-np.log(2 / 3), abs=1e-12)
    assert t["fake"] == pytest.approx(np.log(3), abs=1e-12)
    assert t["manifold_penalty"] == 0.0
    assert t["loss"] == pytest.approx(sum(t[k] for k in CLASSIFIER_TERMS), abs=1e-12)


def test_perfect_fake_detection():
    clf = head_only(np.zeros((3, 2)), [0.0, 0.0, 900.0])
    assert terms(clf, (empty(), np.zeros(0)), np.ones((4, 2)))["fake"] == pytest.approx(0.0, abs=1e-300)


def test_label_range_checked():
    clf = uniform_classifier()
    with pytest.raises(ValueError, match="label"):
        classifier_objective(clf, GEN, (np.ones((1, 2)), np.array([2])), empty(), RNG(0))
    with pytest.raises(ValueError, match="label"):
        label_preservation_loss(clf, GEN, (np.ones((1, 2)), np.array([-1])), RNG(0))


def test_softmax_and_term_two_identity():
    clf = make_classifier(2, 3, (5,), seed=1)
    lp = log_probs(clf, np.random.default_rng(0).normal(size=(7, 2)))
    p = np.exp(lp)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    real = np.exp(np.logaddexp.reduce(lp[:, :3], axis=1))
    np.testing.assert_allclose(real + p[:, 3], 1.0, atol=1e-12)


def test_label_preservation_values():
    sure = head_only(np.zeros((3, 2)), [500.0, 0.0, 0.0])
    assert label_preservation_loss(sure, GEN, (np.ones((3, 2)), np.zeros(3, int)), RNG(0)) == pytest.approx(0.0, abs=1e-300)
    clf = uniform_classifier()
    assert label_preservation_loss(clf, GEN, (np.ones((2, 2)), np.array([0, 1])), RNG(0)) == pytest.approx(np.log(3))
    clf = make_classifier(2, 2, (5,), seed=4)
    x, y = np.random.default_rng(1).normal(size=(4, 2)), np.array([0, 1, 1, 0])
    plain = -np.mean(log_probs(clf, x)[np.arange(4), y])
    assert label_preservation_loss(clf, GEN, (x, y), RNG(0), zero_weight=1.0) == plain


def test_feature_matching_values():
    tape = ad.Tape()
    assert feature_discrepancy_tape(tape.const([[0.0, 0.0]]), tape.const([[1.0, 1.0]])).value == 2.0
    assert feature_discrepancy_tape(tape.const([[3.0]]), tape.const([[1.0]])).value == 4.0
    clf = make_classifier(2, 2, (5,), seed=4)
    x = np.random.default_rng(1).normal(size=(4, 2))
    assert feature_matching_loss(clf, GEN, x, RNG(0), zero_weight=1.0) == 0.0
    with pytest.raises(ValueError):
        feature_matching_loss(clf, GEN, empty(), RNG(0))


def test_generator_objective_is_sum_of_components():
    clf = make_classifier(2, 2, (5,), seed=4)
    x, y = np.random.default_rng(1).normal(size=(4, 2)), np.array([0, 1, 1, 0])
    xu = np.random.default_rng(2).normal(size=(6, 2))
    cfg = TrainConfig(mu=1.0, eta=0.3)
    total = generator_semisup_objective(clf, GEN, (x, y), xu, cfg, RNG(5))
    tape = ad.Tape()
    t = generator_terms_tape(tape, clf, GEN, (x, y), xu, cfg, RNG(5), False)
    parts = sum(float(t[k].value) for k in GENERATOR_TERMS)
    assert total == pytest.approx(parts, abs=1e-12)
    rng = RNG(5)
    kg = label_preservation_loss(clf, GEN, (x, y), rng, cfg.zero_weight)
    lg = feature_matching_loss(clf, GEN, xu, rng, cfg.zero_weight)
    assert float(t["label_preservation"].value) == kg
    assert float(t["feature_matching"].value) == lg


def test_generator_objective_with_zero_noise_and_weights():
    clf = make_classifier(2, 2, (5,), seed=4)
    x, y = np.random.default_rng(1).normal(size=(4, 2)), np.array([0, 1, 1, 0])
    cfg = TrainConfig(mu=0.0, eta=0.0, zero_weight=1.0)
    tape = ad.Tape()
    t = generator_terms_tape(tape, clf, GEN, (x, y), x, cfg, RNG(0), False)
    assert float(t["feature_matching"].value) == 0.0
    assert float(t["omega"].value) == 0.0
    assert float(t["label_preservation"].value) == -np.mean(log_probs(clf, x)[np.arange(4), y])


def test_classifier_gradient_through_penalty_matches_fd():
    gen = make_local_generator(2, 2, (4,), "tanh", 0)
    clf = make_classifier(2, 2, (4,), "tanh", seed=1)
    labeled = (np.random.default_rng(0).normal(size=(2, 2)), np.array([0, 1]))
    xu = np.random.default_rng(1).normal(size=(3, 2))
    def record(tape, v, trainable):
        net = param_unflatten(v, clf.net.activations, CLF_PREFIX)
        c = ClassifierModel(Mlp(net.layers[:-1]), net.layers[-1], 2)
        return classifier_terms_tape(tape, c, gen, labeled, xu, RNG(3), 0.1, True, True, trainable)

    worst = ad.check_gradient_terms(record, param_flatten(clf.net, CLF_PREFIX))
    assert max(max(v.values()) for v in worst.values()) < 1e-5


def test_predict_class_rules():
    assert predict_from_logits(np.array([0.1, 2.0, -1.0, 5.0]), 3) == 1
    assert predict_from_logits(np.array([1.0, 0.0, 1.0, 0.0]), 3) == 0
    clf = head_only(np.random.default_rng(0).normal(size=(2, 2)), [0.0, 3.0])
    assert np.all(predict_class(clf, np.random.default_rng(1).normal(size=(9, 2))) == 0)
    assert predict_class(clf, np.zeros(2)) == 0


def test_classification_error():
    assert classification_error(np.array([1, 0]), np.array([1, 0])) == 0.0
    assert classification_error(np.array([1, 0]), np.array([0, 1])) == 1.0
    assert classification_error(np.array([1, 0, 1, 1]), np.array([1, 0, 1, 0])) == 0.25
    with pytest.raises(ValueError):
        classification_error(np.array([1]), np.array([1, 0]))


def small_semisup(epochs, seed=0, validation=True):
    data = make_two_moons(20, 0.05, np.random.default_rng(0))
    lab, unl = split_labeled(data, 3, np.random.default_rng(1))
    val = make_two_moons(10, 0.05, np.random.default_rng(2))
    clf = make_classifier(2, 2, (6,), seed=3)
    gen = make_local_generator(2, 1, (6,), seed=4)
    cfg = TrainConfig(epochs=epochs, batch_size=16, seed=seed, lr_discriminator=1e-3)
    res = train_semisup(cfg, (lab.points, lab.labels), unl.points,
                        (val.points, val.labels) if validation else None, clf, gen)
    return clf, gen, res


def test_train_semisup_zero_epochs_and_determinism():
    clf, gen, res = small_semisup(0)
    assert res.log == [] and not res.stopped_early
    for a, b in zip(param_flatten(clf.net).values(), param_flatten(res.classifier.net).values()):
        np.testing.assert_array_equal(a, b)
    _, _, a = small_semisup(3)
    _, _, b = small_semisup(3)
    assert a.log == b.log
    row = a.log[0]
    for key in CLASSIFIER_TERMS + GENERATOR_TERMS + ("val_error",):
        assert np.isfinite(row[key])


def test_train_semisup_early_stop():
    data = make_two_moons(10, 0.05, np.random.default_rng(0))
    lab, unl = split_labeled(data, 3, np.random.default_rng(1))
    cfg = TrainConfig(epochs=20, early_stop_patience=2, early_stop_min_epoch=3, lr_discriminator=0.0, lr_generator=0.0)
    res = train_semisup(cfg, (lab.points, lab.labels), unl.points, (lab.points, lab.labels),
                        make_classifier(2, 2, (4,), seed=0), make_local_generator(2, 1, (4,), seed=0))
    assert res.stopped_early
    assert len(res.log) == 3
