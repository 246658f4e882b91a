import numpy as np
import pytest

from harmon.features import apply_normalizer, fit_normalizer
from harmon.lm import TrainConfig
from harmon.nn import Topology, init_nguyen_widrow, train_lm
from harmon.pipeline import Model, PipelineConfig
from harmon.synth import synthetic_dataset

_acceptance = {}


@pytest.fixture(scope="session")
def small_dataset():
    return synthetic_dataset(10, seed=5)


@pytest.fixture(scope="session")
def trained_model(small_dataset):
    cfg = PipelineConfig()
    stats = fit_normalizer(small_dataset.features)
    params = init_nguyen_widrow(Topology(22, (7, 7)), 3)
    params, log = train_lm(params, apply_normalizer(stats, small_dataset.features),
                           small_dataset.labels.astype(float), TrainConfig())
    return Model(params, stats, cfg, {"seed": 3, "stop_reason": log.stop_reason,
                                      "final_mse": log.final_mse})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        _acceptance[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    grouped = {}
    for name, outcome in _acceptance.items():
        # test_criterion_<n>_<what>[param]
        parts = name.split("[")[0].split("_", 3)
        key = (int(parts[2]), parts[3].replace("_", " "))
        grouped.setdefault(key, []).append(outcome)
    for (n, what), outcomes in sorted(grouped.items()):
        verdict = "PASS" if all(o == "passed" for o in outcomes) else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {verdict}  {what}")
