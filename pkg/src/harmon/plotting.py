"""Figures written next to the CSV reports.

All functions take an output path, draw with the non-interactive Agg
backend, and return the path written.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .features import LABELS, bin_frequency  # noqa: E402

COLORS = {"rest": "#4c72b0", "walk": "#55a868", "run": "#c44e52"}


def _figure(width=6.4, height=None):
    golden = (np.sqrt(5) - 1.0) / 2.0
    return plt.subplots(figsize=(width, height or width * golden))


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    # fixed metadata keeps repeated runs byte-identical
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_filter_response(filt, path, f_max=None, n=2000) -> Path:
    meta = filt.design_meta
    fs = meta["sample_rate_hz"]
    f = np.linspace(fs / (2 * n), f_max or fs / 2, n)
    mag_db = 20 * np.log10(np.maximum(np.abs(filt.response(f)), 1e-12))
    fig, ax = _figure()
    ax.semilogx(f, mag_db, color="k", lw=1.2)
    ax.axvline(meta["passband_edge_hz"], color="0.5", ls="--", lw=0.8)
    ax.axhline(-meta["passband_ripple_db"], color=COLORS["walk"], ls=":", lw=0.8)
    ax.axhline(-meta["stopband_atten_db"], color=COLORS["run"], ls=":", lw=0.8)
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel("|H| (dB)")
    ax.set_title(f"order {meta['order']} elliptic high-pass, edge {meta['passband_edge_hz']} Hz")
    ax.set_ylim(-meta["stopband_atten_db"] - 30, 5)
    return _save(fig, path)


def plot_class_spectra(features, labels, path, sample_rate_hz=50.0, n_fft=128) -> Path:
    """Mean (+/- one std) un-normalized feature spectrum per activity."""
    features = np.atleast_2d(features)
    labels = np.asarray(labels)
    freqs = bin_frequency(np.arange(features.shape[1]), sample_rate_hz, n_fft)
    fig, ax = _figure()
    for code, name in enumerate(LABELS):
        rows = features[labels == code]
        if not len(rows):
            continue
        mu, sd = rows.mean(axis=0), rows.std(axis=0)
        ax.plot(freqs, mu, marker="o", ms=3, color=COLORS[name], label=f"{name} (n={len(rows)})")
        ax.fill_between(freqs, mu - sd, mu + sd, color=COLORS[name], alpha=0.15)
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel("|X[k]|")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_sweep(reports, path) -> Path:
    labels = [r.label() for r in reports]
    x = np.arange(len(reports))
    fig, ax = _figure()
    ax.errorbar(x - 0.08, [r.mean_train for r in reports], [r.std_train for r in reports],
                fmt="o", capsize=3, label="train", color=COLORS["rest"])
    ax.errorbar(x + 0.08, [r.mean_test for r in reports], [r.std_test for r in reports],
                fmt="s", capsize=3, label="test", color=COLORS["run"])
    ax.set_xticks(x, labels)
    ax.set_xlabel("hidden layer sizes")
    ax.set_ylabel("classification rate (%)")
    ax.set_ylim(0, 105)
    ax.legend(frameon=False, loc="lower right")
    return _save(fig, path)


def plot_run_rates(report, path) -> Path:
    rates = report.run_rates("test")
    fig, ax = _figure()
    ax.bar(np.arange(len(rates)), rates, color=COLORS["walk"])
    ax.axhline(100.0 / 3.0, color="0.3", ls="--", lw=0.8)
    ax.set_xlabel("run")
    ax.set_ylabel("test rate (%)")
    ax.set_ylim(0, 105)
    ax.set_title(f"topology {report.label()}")
    return _save(fig, path)


def plot_confusion(cm, path) -> Path:
    cm = np.asarray(cm)
    fig, ax = _figure(4.0, 3.6)
    ax.imshow(cm, cmap="Greys")
    for i in range(cm.shape[0]):
        for j in range(cm.shape[1]):
            ax.text(j, i, str(cm[i, j]), ha="center", va="center",
                    color="w" if cm[i, j] > cm.max() / 2 else "k")
    ax.set_xticks(range(len(LABELS)), LABELS)
    ax.set_yticks(range(len(LABELS)), LABELS)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    return _save(fig, path)


def plot_training(log, path) -> Path:
    mse = log.accepted_mse()
    mus = log.mu_history
    fig, ax = _figure()
    ax.semilogy(np.arange(len(mse)), mse, color="k", label="mse")
    ax.set_xlabel("accepted step")
    ax.set_ylabel("mse")
    ax2 = ax.twinx()
    ax2.semilogy(np.linspace(0, max(len(mse) - 1, 1), len(mus)), mus, color=COLORS["run"],
                 lw=0.8, label="mu")
    ax2.set_ylabel("mu", color=COLORS["run"])
    return _save(fig, path)
