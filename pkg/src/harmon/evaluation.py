"""Cross-validated evaluation: decoding, stratified folds, repeated runs, sweeps.

Per-cell seeds come from a splitmix64 stream keyed on the master seed, so a
report is replayable from that one integer.  Fold assignment is fixed per
master seed; only the weight initialization changes between runs.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, DecodeError, StratificationError
from .features import LABELS, apply_normalizer, bin_frequency, fit_normalizer
from .lm import TrainConfig
from .nn import MlpParams, Topology, forward, initialize, train_lm

N_CLASSES = len(LABELS)
WALK_BAND_HZ = (1.5, 2.5)
RUN_BAND_HZ = (2.5, 5.0)
DEFAULT_REST_THRESHOLD = 5.0

_MASK64 = (1 << 64) - 1


def splitmix64(state: int):
    """Yield the splitmix64 sequence for ``state``."""
    state &= _MASK64
    while True:
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        yield z ^ (z >> 31)


def derive_seeds(master: int, n: int) -> list[int]:
    gen = splitmix64(master)
    return [next(gen) for _ in range(n)]


def decode_class(output: float) -> int:
    """Nearest class code, ties away from zero, clamped to 0..2."""
    if not math.isfinite(output):
        raise DecodeError(f"cannot decode non-finite output {output!r}")
    r = math.floor(abs(output) + 0.5)
    r = r if output >= 0 else -r
    return int(min(max(r, 0), N_CLASSES - 1))


def decode_many(outputs) -> np.ndarray:
    return np.array([decode_class(float(o)) for o in np.ravel(outputs)], dtype=int)


@dataclass
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray  # class codes

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.labels = np.asarray(self.labels, dtype=int).ravel()
        if len(self.features) != len(self.labels):
            raise DataError("feature and label counts differ")
        if np.any((self.labels < 0) | (self.labels >= N_CLASSES)):
            raise DataError("labels must be class codes 0, 1 or 2")

    def __len__(self):
        return len(self.labels)

    @classmethod
    def from_named(cls, features, names) -> "LabeledDataset":
        codes = []
        for n in names:
            if n not in LABELS:
                raise DataError(f"missing or unknown label {n!r}")
            codes.append(LABELS.index(n))
        return cls(features, codes)

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=int)
        return LabeledDataset(self.features[idx], self.labels[idx])


def make_folds(labels, k: int = 3, seed: int = 0) -> list[np.ndarray]:
    """Stratified split: per-class seeded shuffle, then round-robin over folds."""
    labels = np.asarray(getattr(labels, "labels", labels), dtype=int)
    if k < 2:
        raise ConfigError("need at least two folds")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for c in range(N_CLASSES):
        members = np.flatnonzero(labels == c)
        if len(members) < k:
            raise StratificationError(
                f"class {LABELS[c]} has {len(members)} samples, fewer than {k} folds")
        members = rng.permutation(members)
        for j, idx in enumerate(members):
            # rotating the start keeps fold sizes within one when classes don't divide evenly
            folds[(j + offset) % k].append(int(idx))
        offset += len(members) % k
    return [np.array(sorted(f), dtype=int) for f in folds]


def confusion_matrix(true, pred) -> np.ndarray:
    cm = np.zeros((N_CLASSES, N_CLASSES), dtype=int)
    for t, p in zip(np.ravel(true), np.ravel(pred)):
        cm[int(t), int(p)] += 1
    return cm


def predict_codes(params: MlpParams, normstats, features) -> np.ndarray:
    x = apply_normalizer(normstats, np.atleast_2d(features))
    out, _ = forward(params, x)
    return decode_many(out)


def classification_rate(params: MlpParams, normstats, dataset: LabeledDataset) -> float:
    if len(dataset) == 0:
        raise DataError("cannot score an empty dataset")
    pred = predict_codes(params, normstats, dataset.features)
    return 100.0 * float(np.sum(pred == dataset.labels)) / len(dataset)


def _sample_std(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(v.std(ddof=1)) if len(v) > 1 else 0.0


@dataclass
class CellResult:
    run: int
    fold: int
    seed: int
    train_rate: float
    test_rate: float
    confusion: np.ndarray  # test confusion, rows = true class
    stop_reason: str
    epochs: int
    final_mse: float
    norm_fit_indices: np.ndarray
    test_indices: np.ndarray


@dataclass
class EvalReport:
    topology: Topology
    cells: list[CellResult] = field(default_factory=list)
    runs: int = 0
    k: int = 3

    def run_rates(self, which: str = "test") -> np.ndarray:
        """Per-run rate, averaged over the fold rotations."""
        attr = f"{which}_rate"
        return np.array([np.mean([getattr(c, attr) for c in self.cells if c.run == r])
                         for r in range(self.runs)])

    @property
    def mean_train(self) -> float:
        return float(np.mean(self.run_rates("train")))

    @property
    def std_train(self) -> float:
        return _sample_std(self.run_rates("train"))

    @property
    def mean_test(self) -> float:
        return float(np.mean(self.run_rates("test")))

    @property
    def std_test(self) -> float:
        return _sample_std(self.run_rates("test"))

    def confusion(self) -> np.ndarray:
        return sum((c.confusion for c in self.cells), np.zeros((3, 3), dtype=int))

    def stalled_runs(self, threshold: float = 40.0) -> list[int]:
        return [r for r, rate in enumerate(self.run_rates("test")) if rate <= threshold]

    def label(self) -> str:
        return "-".join(str(h) for h in self.topology.hidden_sizes) or "linear"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["topology", "run", "fold", "seed", "train_rate", "test_rate",
                    "stop_reason", "epochs", "final_mse", "confusion"])
        for c in self.cells:
            w.writerow([self.label(), c.run, c.fold, c.seed, repr(c.train_rate),
                        repr(c.test_rate), c.stop_reason, c.epochs, repr(c.final_mse),
                        ";".join(str(v) for v in c.confusion.ravel())])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [
            f"topology {self.label()}  runs={self.runs}  folds={self.k}",
            f"  mean training classification rate %  {self.mean_train:8.2f}",
            f"  training standard deviation          {self.std_train:8.2f}",
            f"  mean testing classification rate %   {self.mean_test:8.2f}",
            f"  testing standard deviation           {self.std_test:8.2f}",
        ]
        stalled = self.stalled_runs()
        if stalled:
            lines.append(f"  runs stalled at <= 40% test rate: {stalled}")
        cm = self.confusion()
        lines.append("  test confusion (rows true rest/walk/run):")
        for name, row in zip(LABELS, cm):
            lines.append(f"    {name:5s} " + " ".join(f"{v:5d}" for v in row))
        return "\n".join(lines)


def cross_validate(dataset: LabeledDataset, topology: Topology | None = None,
                   config: TrainConfig | None = None, runs: int = 10, seed: int = 0,
                   k: int = 3) -> EvalReport:
    """Repeated k-fold evaluation with a fresh initialization per cell.

    Normalization statistics are fit on each rotation's training folds only.
    """
    topology = topology or Topology(dataset.features.shape[1], (7, 7))
    config = config or TrainConfig()
    if runs < 1:
        raise ConfigError("runs must be >= 1")
    seeds = derive_seeds(seed, 1 + runs * k)
    folds = make_folds(dataset.labels, k, seeds[0] % (1 << 32))
    report = EvalReport(topology, runs=runs, k=k)
    all_idx = np.arange(len(dataset))
    for r in range(runs):
        for f in range(k):
            cell_seed = seeds[1 + r * k + f]
            test_idx = folds[f]
            train_idx = np.setdiff1d(all_idx, test_idx)
            train, test = dataset.subset(train_idx), dataset.subset(test_idx)
            stats = fit_normalizer(train.features)
            params = initialize(topology, config, cell_seed % (1 << 32))
            xtr = apply_normalizer(stats, train.features)
            params, log = train_lm(params, xtr, train.labels.astype(float), config)
            test_pred = predict_codes(params, stats, test.features)
            report.cells.append(CellResult(
                run=r, fold=f, seed=cell_seed,
                train_rate=classification_rate(params, stats, train),
                test_rate=100.0 * float(np.mean(test_pred == test.labels)),
                confusion=confusion_matrix(test.labels, test_pred),
                stop_reason=log.stop_reason, epochs=log.epochs_run,
                final_mse=log.final_mse, norm_fit_indices=train_idx, test_indices=test_idx,
            ))
    return report


def topology_sweep(dataset: LabeledDataset, hidden_size_lists, config: TrainConfig | None = None,
                   runs: int = 10, seed: int = 0, k: int = 3) -> list[EvalReport]:
    hidden_size_lists = list(hidden_size_lists)
    if not hidden_size_lists:
        raise ConfigError("topology sweep needs at least one topology")
    n_in = dataset.features.shape[1]
    return [cross_validate(dataset, Topology(n_in, tuple(h)), config, runs, seed, k)
            for h in hidden_size_lists]


def sweep_table(reports: list[EvalReport]) -> str:
    """Rows of mean/std train/test rates, one column per topology."""
    heads = [r.label() for r in reports]
    rows = [
        ("Mean Training Classification Rate %", [r.mean_train for r in reports]),
        ("Training Standard Deviation", [r.std_train for r in reports]),
        ("Mean Testing Classification Rate %", [r.mean_test for r in reports]),
        ("Testing Standard Deviation", [r.std_test for r in reports]),
    ]
    width = max(len(name) for name, _ in rows)
    out = [" " * width + "".join(f"{h:>10s}" for h in heads)]
    for name, vals in rows:
        out.append(f"{name:<{width}s}" + "".join(f"{v:10.2f}" for v in vals))
    return "\n".join(out)


def sweep_csv(reports: list[EvalReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["topology", "mean_train", "std_train", "mean_test", "std_test"])
    for r in reports:
        w.writerow([r.label(), repr(r.mean_train), repr(r.std_train),
                    repr(r.mean_test), repr(r.std_test)])
    return buf.getvalue()


def baseline_classify(magnitudes, sample_rate_hz: float = 50.0, n_fft: int = 128,
                      rest_threshold: float = DEFAULT_REST_THRESHOLD) -> int:
    """Frequency-band rule without a network, on un-normalized FFT magnitudes.

    The dominant non-DC bin decides: below ``rest_threshold`` it is rest,
    otherwise walk for 1.5-2.5 Hz, run for 2.5-5 Hz, rest elsewhere.
    """
    m = np.asarray(magnitudes, dtype=float)
    if len(m) < 2:
        return 0
    k = int(np.argmax(m[1:])) + 1
    if m[k] < rest_threshold:
        return 0
    f = float(bin_frequency(k, sample_rate_hz, n_fft))
    if WALK_BAND_HZ[0] <= f < WALK_BAND_HZ[1]:
        return 1
    if RUN_BAND_HZ[0] <= f <= RUN_BAND_HZ[1]:
        return 2
    return 0


def baseline_rate(dataset: LabeledDataset, sample_rate_hz: float = 50.0, n_fft: int = 128,
                  rest_threshold: float = DEFAULT_REST_THRESHOLD) -> float:
    pred = np.array([baseline_classify(row, sample_rate_hz, n_fft, rest_threshold)
                     for row in dataset.features])
    return 100.0 * float(np.mean(pred == dataset.labels))


__all__ = [
    "LabeledDataset", "EvalReport", "CellResult", "decode_class", "make_folds",
    "classification_rate", "cross_validate", "topology_sweep", "sweep_table",
    "baseline_classify", "baseline_rate", "derive_seeds",
]
