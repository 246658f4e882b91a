"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 training abort.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import plotting
from .errors import ConfigError, DataError, HarmonError, TrainingAbort
from .evaluation import (LabeledDataset, baseline_rate, cross_validate, sweep_csv,
                         sweep_table, topology_sweep)
from .features import LABELS, fit_normalizer, apply_normalizer, read_features_csv, write_features_csv
from .nn import Topology, initialize, train_lm
from .pipeline import (Model, PipelineConfig, extract_features, predict_features,
                       predict_trace, StreamClassifier)
from .sigproc import read_calibration, read_trace_csv, write_trace_csv
from .synth import SynthSpec, dataset_specs, synth_trace, synthetic_dataset

log = logging.getLogger("harmon")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TRAIN = 0, 1, 2, 3

TABLE_PRESETS = {
    "1": [[3], [5], [7], [9]],
    "2": [[7, 3], [7, 5], [7, 7], [7, 8]],
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if getattr(args, "config", None) else PipelineConfig()
    if getattr(args, "rate", None) is not None:
        cfg = replace(cfg, sample_rate_hz=args.rate)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed, train=replace(cfg.train, rng_seed=args.seed))
    if getattr(args, "calibration", None):
        cfg = replace(cfg, calibration=read_calibration(args.calibration))
    if getattr(args, "hidden", None):
        cfg = replace(cfg, hidden_sizes=tuple(args.hidden))
    if getattr(args, "hop", None) is not None:
        cfg = replace(cfg, hop=args.hop)
    if getattr(args, "init_range", None) is not None:
        cfg = replace(cfg, train=replace(cfg.train, init="uniform", init_range=args.init_range))
    return cfg


def _load_dataset(args, cfg: PipelineConfig) -> LabeledDataset:
    if args.features:
        matrix, labels, _ = read_features_csv(args.features)
        if len(matrix) == 0:
            raise DataError(f"{args.features}: no feature rows")
        return LabeledDataset.from_named(matrix, labels)
    return synthetic_dataset(args.synthetic, seed=cfg.seed, config=cfg)


def _write(path, text: str):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# -- subcommands -------------------------------------------------------------------

def cmd_config(args):
    cfg = _load_config(args)
    _write(args.out, cfg.to_json())


def cmd_synth(args):
    cfg = _load_config(args)
    if args.dataset:
        out = Path(args.dataset)
        out.mkdir(parents=True, exist_ok=True)
        window_s = cfg.window_size / cfg.sample_rate_hz
        rows = []
        for i, spec in enumerate(dataset_specs(args.per_class, cfg.seed, window_s=window_s)):
            raw, label = synth_trace(spec, cfg.calibration, cfg.sample_rate_hz)
            name = f"{label}_{i:04d}.csv"
            write_trace_csv(out / name, raw)
            skip = (len(raw) - cfg.window_size) // cfg.window_size
            rows.append((name, label, skip))
        with (out / "manifest.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["trace", "label", "skip_windows"])
            w.writerows(rows)
        print(f"wrote {len(rows)} traces and {out / 'manifest.csv'}")
        return
    if not args.out:
        raise ConfigError("synth needs --out or --dataset")
    spec = SynthSpec(args.activity, args.duration, args.fundamental, args.amp,
                     args.harmonic, args.noise, seed=cfg.seed)
    raw, label = synth_trace(spec, cfg.calibration, cfg.sample_rate_hz)
    write_trace_csv(args.out, raw)
    Path(args.out).with_suffix(".label").write_text(label + "\n")
    print(f"wrote {len(raw)} samples of {label} to {args.out}")


def cmd_filter_design(args):
    cfg = _load_config(args)
    f = cfg.filter
    cfg = replace(cfg, filter=replace(
        f, order=args.order or f.order, passband_edge_hz=args.edge or f.passband_edge_hz,
        passband_ripple_db=args.ripple or f.passband_ripple_db,
        stopband_atten_db=args.atten or f.stopband_atten_db))
    filt = cfg.design_filter()
    meta = filt.design_meta
    print(f"# high-pass elliptic: order {meta['order']}, edge {meta['passband_edge_hz']} Hz, "
          f"ripple {meta['passband_ripple_db']} dB, atten {meta['stopband_atten_db']} dB, "
          f"fs {meta['sample_rate_hz']} Hz, stopband edge {meta['stopband_edge_hz']:.4f} Hz")
    print("section,b0,b1,b2,a1,a2,pole_radius")
    for i, s in enumerate(filt.sections):
        r = float(np.max(np.abs(s.poles())))
        print(f"{i},{s.b[0]!r},{s.b[1]!r},{s.b[2]!r},{s.a[0]!r},{s.a[1]!r},{r:.6f}")
    print()
    print("freq_hz,gain,gain_db")
    grid = np.array([0.0, 0.1, 0.25, 0.4, 0.5, 0.6, 0.8, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0, 12.0,
                     16.0, 20.0, 24.5])
    grid = grid[grid < cfg.sample_rate_hz / 2]
    h = np.abs(filt.response(grid))
    for fr, g in zip(grid, h):
        print(f"{fr:g},{g:.6f},{20 * np.log10(max(g, 1e-300)):.2f}")
    if args.figures:
        p = plotting.plot_filter_response(filt, Path(args.figures) / "filter_response.png")
        print(f"# figure: {p}", file=sys.stderr)


def _featurize_one(path, cfg, label, skip=0):
    raw = read_trace_csv(path, cfg.sample_rate_hz)
    feats, starts = extract_features(raw, cfg)
    if len(feats) == 0:
        log.warning("%s: %d samples is shorter than one %d-sample window; no features",
                    path, len(raw), cfg.window_size)
    t = raw.times_ms()
    return feats[skip:], [label] * len(feats[skip:]), [float(t[s]) for s in starts[skip:]]


def _sidecar_label(path):
    side = Path(path).with_suffix(".label")
    if side.exists():
        return side.read_text().strip() or None
    return None


def cmd_featurize(args):
    cfg = _load_config(args)
    mats, labels, times = [], [], []
    if args.manifest:
        base = Path(args.manifest).parent
        with open(args.manifest, newline="") as fh:
            for row in csv.DictReader(fh):
                feats, labs, ts = _featurize_one(base / row["trace"], cfg, row["label"],
                                                 int(row.get("skip_windows") or 0))
                mats.append(feats)
                labels += labs
                times += ts
    else:
        if not args.trace:
            raise ConfigError("featurize needs a trace file or --manifest")
        label = args.label or _sidecar_label(args.trace)
        if label is not None and label not in LABELS:
            raise DataError(f"unknown label {label!r}")
        feats, labs, ts = _featurize_one(args.trace, cfg, label)
        mats.append(feats)
        labels += labs
        times += ts
    matrix = np.vstack(mats) if mats else np.zeros((0, cfg.n_features))
    write_features_csv(args.out, matrix, labels, {"t_ms": times})
    print(f"wrote {len(matrix)} feature rows to {args.out}")


def cmd_train(args):
    cfg = _load_config(args)
    ds = _load_dataset(args, cfg)
    stats = fit_normalizer(ds.features)
    topo = Topology(ds.features.shape[1], cfg.hidden_sizes)
    params = initialize(topo, cfg.train, cfg.seed)
    params, tlog = train_lm(params, apply_normalizer(stats, ds.features),
                            ds.labels.astype(float), cfg.train)
    cfg = replace(cfg, n_features=ds.features.shape[1])
    model = Model(params, stats, cfg, {
        "seed": cfg.seed, "stop_reason": tlog.stop_reason,
        "final_mse": tlog.final_mse, "epochs": tlog.epochs_run, "n_samples": len(ds),
    })
    model.save(args.out)
    rate = 100.0 * float(np.mean(np.array(model.classify(ds.features)) == ds.labels))
    print(f"stop: {tlog.stop_reason} after {tlog.epochs_run} epochs, mse {tlog.final_mse:.6g}, "
          f"training rate {rate:.2f}%")
    if args.figures:
        plotting.plot_training(tlog, Path(args.figures) / "training.png")


def cmd_eval(args):
    cfg = _load_config(args)
    ds = _load_dataset(args, cfg)
    topo = Topology(ds.features.shape[1], cfg.hidden_sizes)
    report = cross_validate(ds, topo, cfg.train, args.runs, cfg.seed, args.folds)
    if args.report:
        _write(args.report, report.to_csv())
    print(report.summary())
    if args.baseline:
        print(f"  spectral baseline (no network) rate % {baseline_rate(ds, cfg.sample_rate_hz, cfg.window_size):8.2f}")
    if args.figures:
        d = Path(args.figures)
        plotting.plot_run_rates(report, d / "run_rates.png")
        plotting.plot_confusion(report.confusion(), d / "confusion.png")
        plotting.plot_class_spectra(ds.features, ds.labels, d / "class_spectra.png",
                                    cfg.sample_rate_hz, cfg.window_size)


def _parse_topologies(text: str):
    out = []
    for part in text.split(";"):
        part = part.strip()
        if part:
            out.append([int(v) for v in part.replace(",", " ").split()])
    return out


def cmd_sweep(args):
    cfg = _load_config(args)
    ds = _load_dataset(args, cfg)
    if args.table:
        tops = TABLE_PRESETS[args.table]
    else:
        tops = _parse_topologies(args.topologies or "")
    reports = topology_sweep(ds, tops, cfg.train, args.runs, cfg.seed, args.folds)
    print(sweep_table(reports))
    if args.report:
        _write(args.report, sweep_csv(reports))
    if args.figures:
        plotting.plot_sweep(reports, Path(args.figures) / "sweep.png")


def _emit(preds, out):
    for p in preds:
        out.write(f"{p.t_ms!r},{p.label}\n")


def cmd_predict(args):
    model = Model.load(args.model)
    path = Path(args.input)
    with path.open(newline="") as fh:
        first = fh.readline()
    if first.startswith("label"):
        matrix, _, extra = read_features_csv(path)
        t = [float(v) for v in extra["t_ms"]] if "t_ms" in extra else None
        preds = predict_features(model, matrix, t)
    else:
        raw = read_trace_csv(path, model.config.sample_rate_hz)
        preds = predict_trace(model, raw)
    sys.stdout.write("t_ms,label\n")
    _emit(preds, sys.stdout)


def cmd_stream(args):
    model = Model.load(args.model)
    clf = StreamClassifier(model)
    out = sys.stdout
    out.write("t_ms,label\n")
    out.flush()
    has_t = None
    for lineno, line in enumerate(sys.stdin, 1):
        line = line.strip()
        if not line:
            continue
        if line[0].isalpha():
            has_t = line.split(",")[0].strip() == "t_ms"
            continue
        fields = line.split(",")
        if has_t is None:
            has_t = len(fields) == 4
        try:
            vals = [float(v) for v in fields]
        except ValueError:
            clf.skipped += 1
            log.warning("line %d: unparseable sample skipped", lineno)
            continue
        if len(vals) != (4 if has_t else 3):
            clf.skipped += 1
            log.warning("line %d: wrong field count, skipped", lineno)
            continue
        t = vals[0] if has_t else None
        preds = clf.push(*vals[-3:], t_ms=t)
        if preds:
            _emit(preds, out)
            out.flush()
    _emit(clf.finish(), out)
    out.flush()


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="harmon", description="Accelerometer activity classification")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed=True, data=False):
        sp.add_argument("--config", help="pipeline config JSON")
        sp.add_argument("--rate", type=float, help="sample rate in Hz")
        if seed:
            sp.add_argument("--seed", type=int)
        if data:
            g = sp.add_mutually_exclusive_group(required=True)
            g.add_argument("features", nargs="?", help="feature CSV")
            g.add_argument("--synthetic", type=int, metavar="N",
                           help="generate N synthetic windows per class instead")
            sp.add_argument("--hidden", type=int, nargs="+", help="hidden layer sizes")
            sp.add_argument("--init-range", type=float,
                            help="uniform init in [-R, R] instead of Nguyen-Widrow")
            sp.add_argument("--figures", help="directory for PNG figures")
        return sp

    sp = common(sub.add_parser("config", help="print the effective pipeline config"))
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_config)

    sp = common(sub.add_parser("synth", help="generate synthetic raw traces"))
    sp.add_argument("--activity", choices=LABELS, default="walk")
    sp.add_argument("--duration", type=float, default=10.0)
    sp.add_argument("--fundamental", type=float)
    sp.add_argument("--amp", type=float)
    sp.add_argument("--harmonic", type=float, default=0.3)
    sp.add_argument("--noise", type=float, default=0.05)
    sp.add_argument("--out")
    sp.add_argument("--dataset", help="write a labeled dataset directory instead")
    sp.add_argument("--per-class", type=int, default=30)
    sp.add_argument("--calibration", help="calibration JSON")
    sp.set_defaults(func=cmd_synth)

    sp = common(sub.add_parser("filter-design", help="print the high-pass cascade"), seed=False)
    sp.add_argument("--order", type=int)
    sp.add_argument("--edge", type=float)
    sp.add_argument("--ripple", type=float)
    sp.add_argument("--atten", type=float)
    sp.add_argument("--figures")
    sp.set_defaults(func=cmd_filter_design)

    sp = common(sub.add_parser("featurize", help="trace CSV -> feature CSV"), seed=False)
    sp.add_argument("trace", nargs="?")
    sp.add_argument("--manifest")
    sp.add_argument("--label", choices=LABELS)
    sp.add_argument("--hop", type=int)
    sp.add_argument("--calibration")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_featurize)

    sp = common(sub.add_parser("train", help="train a model on all rows"), data=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_train)

    sp = common(sub.add_parser("eval", help="repeated k-fold cross-validation"), data=True)
    sp.add_argument("--runs", type=int, default=10)
    sp.add_argument("--folds", type=int, default=3)
    sp.add_argument("--report", help="per-cell CSV path, or - for stdout")
    sp.add_argument("--baseline", action="store_true", help="also score the band-rule baseline")
    sp.set_defaults(func=cmd_eval)

    sp = common(sub.add_parser("sweep", help="cross-validate several topologies"), data=True)
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--topologies", help="e.g. '3;5;7;9' or '7 3;7 5'")
    g.add_argument("--table", choices=sorted(TABLE_PRESETS))
    sp.add_argument("--runs", type=int, default=10)
    sp.add_argument("--folds", type=int, default=3)
    sp.add_argument("--report")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("predict", help="classify a feature or trace CSV")
    sp.add_argument("model")
    sp.add_argument("input")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("stream", help="classify t_ms,x_mV,y_mV,z_mV lines from stdin")
    sp.add_argument("model")
    sp.set_defaults(func=cmd_stream)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except BrokenPipeError:
        # downstream closed early (e.g. piped into head)
        sys.stderr.close()
        return EXIT_OK
    except TrainingAbort as exc:
        print(f"harmon: training aborted: {exc}", file=sys.stderr)
        return EXIT_TRAIN
    except ConfigError as exc:
        print(f"harmon: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (HarmonError, OSError) as exc:
        print(f"harmon: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
