"""Figures for the experiment reports.

matplotlib is imported lazily so the codec itself never needs it.
"""

from __future__ import annotations

from pathlib import Path

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.figsize": (5.0, 3.2),
    "savefig.dpi": 150,
}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update(RC)
    return plt


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path)
    fig.clf()
    import matplotlib.pyplot as plt

    plt.close(fig)
    return path


def plot_avalanche(reports, path) -> Path:
    plt = _pyplot()
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7.5, 3.2))
    x = [r.flip_bit_position / r.payload_bits for r in reports]
    y = [r.first_corrupted_symbol_index / r.msg_len for r in reports]
    ax1.scatter(x, y, s=6, alpha=0.6)
    ax1.plot([0, 1], [0, 1], lw=0.8, color="0.5", ls="--")
    ax1.set_xlabel("flipped bit / payload bits")
    ax1.set_ylabel("first corrupted symbol / length")
    ser = [r.symbol_error_rate for r in reports if r.first_corrupted_symbol_index < r.msg_len]
    ax2.hist(ser, bins=30, range=(0, 1))
    ax2.set_xlabel("symbol error rate after the flip")
    ax2.set_ylabel("trials")
    return _save(fig, path)


def plot_redundancy(reports, path) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots()
    n = [r.n_symbols for r in reports]
    ax.loglog(n, [r.predicted_realized_bits for r in reports], "-", label="predicted")
    ax.loglog(n, [max(r.measured_extra_bits, 1e-3) for r in reports], "o", label="measured")
    ax.set_xlabel("symbols per block")
    ax.set_ylabel("extra bits per block")
    ax.legend()
    return _save(fig, path)


def plot_cost_ratio(reports, path) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots()
    sizes = [r.mean_cds_bytes for r in reports]
    ax.loglog(sizes, [r.expected_ratio for r in reports], "-", label="CDS bytes / 16")
    ax.loglog(sizes, [r.measured_ratio for r in reports], "o", label="hashed bytes ratio")
    ax.loglog(sizes, [r.time_ratio for r in reports], "x", label="hash time ratio")
    ax.set_xlabel("mean CDS size (bytes)")
    ax.set_ylabel("whole-stream / tail-only")
    ax.legend()
    return _save(fig, path)


def plot_expansion(report, path) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots()
    labels = ["original", "naive swap", "keyed permutation"]
    bits = [report.original_bits, report.naive_bits, report.permuted_bits]
    ax.bar(labels, bits)
    for i, b in enumerate(bits):
        ax.text(i, b, str(b), ha="center", va="bottom")
    ax.set_ylabel("minimum code length (bits)")
    ax.set_title(report.message)
    return _save(fig, path)
