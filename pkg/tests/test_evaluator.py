import numpy as np
import pytest
from scipy.stats import binom

from mmdd.data_io import LabeledSet, ToyDatasetSpec, synth_dataset
from mmdd.errors import DegenerateData, InvalidArgument
from mmdd.evaluator import (EvalConfig, EvalResult, accuracy_gain, aggregate, eval_csv, evaluate,
                            run_evaluation, train_classifier)


class Constant:
    def __init__(self, k):
        self.k = k

    def predict(self, x):
        return np.full(len(x), self.k)


class Uniform:
    def __init__(self, n, seed):
        self.n, self.rng = n, np.random.default_rng(seed)

    def predict(self, x):
        return self.rng.integers(0, self.n, len(x))


def separable(n=40):
    r = np.random.default_rng(0)
    x = np.concatenate([r.normal(-3, 0.5, (n, 2)), r.normal(3, 0.5, (n, 2))])
    return LabeledSet(x, np.repeat([0, 1], n), 2)


def test_separable_data_fits_perfectly(backend):
    data = separable()
    clf = train_classifier(data, EvalConfig(epochs=50), 0)
    assert evaluate(clf, data) == 100.0


def test_zero_epochs_returns_initialisation():
    data = separable()
    clf = train_classifier(data, EvalConfig(epochs=0), 7)
    from mmdd.evaluator import Classifier
    ref = Classifier(2, 2, (128,), np.random.default_rng(7))
    assert np.array_equal(clf.params, ref.params)


def test_same_seed_same_weights():
    data = separable()
    a = train_classifier(data, EvalConfig(epochs=5), 3)
    b = train_classifier(data, EvalConfig(epochs=5), 3)
    assert np.array_equal(a.params, b.params)


def test_single_class_is_degenerate():
    with pytest.raises(DegenerateData):
        train_classifier(LabeledSet(np.zeros((3, 2)), [1, 1, 1], 2), EvalConfig(), 0)


def test_constant_predictor_accuracy():
    test = LabeledSet(np.zeros((10, 2)), np.zeros(10, dtype=int), 3)
    assert evaluate(Constant(0), test) == 100.0
    assert evaluate(Constant(1), test) == 0.0


def test_uniform_predictor_near_chance():
    n = 20000
    test = LabeledSet(np.zeros((n, 1)), np.arange(n) % 4, 4)
    acc = evaluate(Uniform(4, 1), test)
    # 25 +- 2 is far wider than the 99.99% binomial interval for n = 20000
    lo, hi = binom.ppf([5e-5, 1 - 5e-5], n, 0.25) / n * 100
    assert 23.0 < lo <= acc <= hi < 27.0


def test_evaluate_dim_mismatch():
    clf = train_classifier(separable(), EvalConfig(epochs=1), 0)
    with pytest.raises(InvalidArgument):
        evaluate(clf, LabeledSet(np.zeros((2, 3)), [0, 1], 2))


@pytest.mark.parametrize("acc,n,gain", [(6.53, 2560, 2.55), (5.39, 4544, 1.19), (4.19, 800, 5.24)])
def test_accuracy_gain_examples(acc, n, gain):
    assert accuracy_gain(acc, n) == pytest.approx(gain, abs=0.005)


def test_accuracy_gain_needs_samples():
    with pytest.raises(InvalidArgument):
        accuracy_gain(10.0, 0)


def test_population_std_on_hand_triples():
    assert aggregate([1.0, 2.0, 3.0]) == pytest.approx((2.0, np.sqrt(2.0 / 3.0)), abs=1e-15)
    assert aggregate([5.0, 5.0, 5.0]) == (5.0, 0.0)
    assert aggregate([3.0, 1.0, 2.0]) == aggregate([1.0, 2.0, 3.0])


def test_run_evaluation_and_csv():
    tr, te = synth_dataset(ToyDatasetSpec(samples_per_class=50, separation=8.0))
    res = run_evaluation(tr, te, EvalConfig(epochs=20, repeats=2))
    assert isinstance(res, EvalResult)
    assert len(res.accuracies) == 2 and 0 <= res.accuracy_mean <= 100 and res.accuracy_std >= 0
    assert res.n_samples == len(tr) and res.ipc == len(tr) // 4
    lines = eval_csv(res).splitlines()
    assert lines[0] == "repeat,accuracy" and lines[3] == "mean,std,samples,ipc,gain"


def test_separation_zero_is_chance_level():
    tr, te = synth_dataset(ToyDatasetSpec(n_classes=2, samples_per_class=2000, separation=0.0))
    acc = run_evaluation(tr, te, EvalConfig(epochs=3, repeats=1)).accuracy_mean
    assert 44.0 < acc < 56.0


def test_more_training_data_does_not_degrade():
    tr, te = synth_dataset(ToyDatasetSpec(seed=2, separation=3.0))
    r = np.random.default_rng(0)
    idx = r.permutation(len(tr))
    small = LabeledSet(tr.samples[idx[:200]], tr.labels[idx[:200]], 4)
    large = LabeledSet(tr.samples[idx[:400]], tr.labels[idx[:400]], 4)
    cfg = EvalConfig(epochs=30)
    assert run_evaluation(large, te, cfg).accuracy_mean >= run_evaluation(small, te, cfg).accuracy_mean - 1.0
