import csv
import dataclasses

import numpy as np
import pytest

from mminet.data import Dataset, gen_monk3
from mminet.errors import DataError, NumericalError
from mminet.harness import (
    METHODS,
    TIDY_COLUMNS,
    CvReport,
    DataSource,
    ExperimentSpec,
    fold_seed,
    run_experiment,
    run_sweep,
    write_tidy_csv,
)

MONK = DataSource(generator="monk3", gen_seed=0)


@pytest.fixture(scope="module")
def monk():
    return MONK.load()


def test_source_validation(tmp_path):
    with pytest.raises(DataError):
        DataSource()
    with pytest.raises(DataError):
        DataSource(path="x.csv", generator="monk3")
    with pytest.raises(DataError):
        DataSource(generator="mnist")
    assert DataSource(path=str(tmp_path / "wdbc.csv")).name == "wdbc"


def test_spec_validation():
    with pytest.raises(DataError):
        ExperimentSpec(MONK, "lasso", 1)
    with pytest.raises(DataError):
        ExperimentSpec(MONK, "fisher", 0)
    with pytest.raises(DataError):
        ExperimentSpec(MONK, "fisher", 1, folds=1)
    with pytest.raises(DataError):
        run_experiment(ExperimentSpec(MONK, "fisher", 7))


def test_spec_echo_has_every_default():
    spec = ExperimentSpec(MONK, "mminet", 2)
    echo = spec.to_dict()
    assert set(echo) == {f.name for f in dataclasses.fields(ExperimentSpec)}
    assert echo["learning_rate"] == 0.005 and echo["momentum"] == 0.9 and echo["svm_lambda"] == 1e-3
    assert ExperimentSpec(**echo) == spec


def test_fold_seed_deterministic():
    assert fold_seed(3, 1) == fold_seed(3, 1)
    assert len({fold_seed(3, f) for f in range(5)}) == 5


@pytest.mark.parametrize("method", METHODS)
def test_report_fields_and_determinism(monk, method):
    spec = ExperimentSpec(MONK, method, 2, seed=4)
    a = run_experiment(spec, monk)
    b = run_experiment(spec, monk)
    assert a.same_outcome(b)
    assert len(a.fold_accuracies) == 5 and len(a.fold_times) == 5
    assert abs(a.mean - sum(a.fold_accuracies) / 5) <= 1e-12
    assert a.std == pytest.approx(np.std(a.fold_accuracies), abs=1e-15)
    assert all(0 <= v <= 1 for v in a.fold_accuracies)
    assert a.dataset == "monk3"


def test_json_round_trip(monk):
    rep = run_experiment(ExperimentSpec(MONK, "mrmr", 2), monk)
    back = CvReport.from_json(rep.to_json())
    assert back == rep


def test_parallel_matches_serial(monk):
    spec = ExperimentSpec(MONK, "mminet", 1, seed=2)
    serial = run_experiment(spec, monk)
    parallel = run_experiment(spec, monk, workers=2)
    assert serial.same_outcome(parallel)


def test_method_order_invariance(monk):
    spec = ExperimentSpec(MONK, "fisher", 1, seed=1)
    first = [run_experiment(dataclasses.replace(spec, method=m), monk) for m in METHODS]
    second = [run_experiment(dataclasses.replace(spec, method=m), monk) for m in reversed(METHODS)]
    for a, b in zip(first, reversed(second)):
        assert a.fold_accuracies == b.fold_accuracies


def test_sweep_and_tidy_csv(monk, tmp_path):
    reports = run_sweep(ExperimentSpec(MONK, "fisher", 1), [1, 2, 3], METHODS, monk)
    assert len(reports) == 12
    assert {(r.spec["method"], r.spec["d_y"]) for r in reports} == {(m, d) for m in METHODS for d in (1, 2, 3)}
    rows = write_tidy_csv(reports, tmp_path / "sweep.csv")
    assert rows == 4 * 3 * 5
    with open(tmp_path / "sweep.csv") as fh:
        table = list(csv.reader(fh))
    assert tuple(table[0]) == TIDY_COLUMNS and len(table) == rows + 1
    assert float(table[1][4]) == reports[0].fold_accuracies[0]
    with pytest.raises(DataError):
        run_sweep(ExperimentSpec(MONK, "fisher", 1), [1, 9], METHODS, monk)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_fold_errors_are_annotated(monk):
    spec = ExperimentSpec(MONK, "mminet", 1, learning_rate=1e300, momentum=0.0)
    with pytest.raises(NumericalError) as exc:
        run_experiment(spec, monk)
    assert str(exc.value).startswith("fold 0:")
