import numpy as np
import pytest

from scorepath.errors import EmptyDataset, SingleClassData
from scorepath.learn import (Dataset, GridSpec, SvmHyperParams, evaluate_classifier, generate_dataset, label_rule,
                             train_linear_svm)
from scorepath.score import LinearScoreModel
from scorepath.sensor import Corridor, SensorConfig


def test_label_rule_examples():
    assert label_rule(0.3, 0.1)[0] == -1
    assert label_rule(-0.2, 0.1)[0] == 1


def test_dataset_count_by_enumeration():
    grid = GridSpec(theta_max=0.6, d_max=0.9, n_theta=21, n_d=21)
    data = generate_dataset(Corridor(), SensorConfig(), grid, exclusion_margin=0.05)
    want = 0
    for t in np.linspace(-0.6, 0.6, 21):
        for d in np.linspace(-0.9, 0.9, 21):
            want += abs(-t - d) >= 0.05
    assert len(data) == want
    assert data.scans.shape == (want, 64)


def test_dataset_rejects_wide_grid():
    with pytest.raises(ValueError):
        generate_dataset(Corridor(), SensorConfig(), GridSpec(d_max=1.1))


def test_dataset_exclusion_removes_everything():
    with pytest.raises(EmptyDataset):
        generate_dataset(Corridor(), SensorConfig(), GridSpec(n_theta=3, n_d=3, theta_max=0.01, d_max=0.01),
                         exclusion_margin=1.0)


def test_dataset_csv_roundtrip(tmp_path):
    data = generate_dataset(Corridor(), SensorConfig(n_rays=8), GridSpec(n_theta=5, n_d=5))
    data.to_csv(tmp_path / "d.csv")
    back = Dataset.from_csv(tmp_path / "d.csv")
    assert np.array_equal(back.scans, data.scans) and np.array_equal(back.label, data.label)


def _toy():
    return Dataset(np.zeros(2), np.zeros(2), np.array([1, -1]), np.array([[1.0, 0.0], [-1.0, 0.0]]))


def test_svm_separable_pair():
    m = train_linear_svm(_toy(), SvmHyperParams(epochs=50))
    assert np.sign(m([1.0, 0.0])) == 1 and np.sign(m([-1.0, 0.0])) == -1


def test_svm_deterministic():
    a = train_linear_svm(_toy(), SvmHyperParams(epochs=20, seed=5))
    b = train_linear_svm(_toy(), SvmHyperParams(epochs=20, seed=5))
    assert a.to_json() == b.to_json()


def test_svm_single_class():
    data = Dataset(np.zeros(2), np.zeros(2), np.array([1, 1]), np.eye(2))
    with pytest.raises(SingleClassData):
        train_linear_svm(data)


def test_corridor_training_accuracy(trained):
    assert trained.model.feature_meta["train_accuracy"] >= 0.9


def test_held_out_shifted_grid(trained):
    held = generate_dataset(trained.corridor, trained.sensor_cfg, GridSpec(theta_max=1.17, d_max=0.93, n_theta=40, n_d=40))
    acc = evaluate_classifier(trained.model, held)["accuracy"]
    assert abs(acc - trained.model.feature_meta["train_accuracy"]) <= 0.05


def test_perfect_model_accuracy():
    data = _toy()
    assert evaluate_classifier(LinearScoreModel([1.0, 0.0], 0.0), data)["accuracy"] == 1.0


def test_zero_model_majority():
    data = Dataset(np.zeros(3), np.zeros(3), np.array([1, 1, -1]), np.ones((3, 2)))
    # score 0 predicts +1, the majority class here
    assert evaluate_classifier(LinearScoreModel([0.0, 0.0], 0.0), data)["accuracy"] == pytest.approx(2 / 3)


def test_hyperparam_validation():
    with pytest.raises(ValueError):
        SvmHyperParams(reg_lambda=0.0)
    with pytest.raises(ValueError):
        SvmHyperParams(average_tail=1.5)
