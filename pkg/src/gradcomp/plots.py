"""PNG views of experiment tables. Plots only read the rows that go to CSV."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

COLORS = {"haar": "tab:blue", "norm": "tab:orange", "rand": "tab:green"}


def _by_scheme(rows, **match):
    groups = {}
    for r in rows:
        if all(r.get(k) == v for k, v in match.items()):
            groups.setdefault(r["scheme"], []).append(r)
    return groups


def plot_fig1(rows, path):
    kinds = list(dict.fromkeys(r["kind"] for r in rows))
    fig, axes = plt.subplots(2, 2, figsize=(9, 7), squeeze=False)
    for ax, kind in zip(axes.flat, kinds):
        for scheme, rs in _by_scheme(rows, kind=kind, seed_index=0).items():
            ax.plot([r["k"] for r in rs], [r["qnorm_mc"] for r in rs], "o-",
                    color=COLORS.get(scheme), label=f"{scheme}-k")
            ax.plot([r["k"] for r in rs], [r["qnorm_exact"] for r in rs], "--",
                    color=COLORS.get(scheme), alpha=0.5)
        ax.set_title(kind)
        ax.set_xlabel("k")
        ax.set_ylabel("Q-seminorm")
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_fig2(rows, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    for mode, style in (("qnorm", "-"), ("omega", ":")):
        for scheme, rs in _by_scheme(rows, mode=mode).items():
            ax.plot([r["k"] for r in rs], [r["penalty"] for r in rs], style,
                    color=COLORS.get(scheme), label=f"{scheme}-k ({mode})")
    ax.set_yscale("log")
    ax.set_xlabel("k")
    ax.set_ylabel("predicted penalty")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_ratio(rows, path, predicted=False):
    fig, ax = plt.subplots(figsize=(6, 4))
    for scheme, rs in _by_scheme(rows).items():
        ks = [r["k"] for r in rs]
        ax.errorbar(ks, [r["ratio_mean"] for r in rs], yerr=[r["ratio_std"] for r in rs],
                    fmt="o-", capsize=3, color=COLORS.get(scheme), label=f"{scheme}-k")
        if predicted:
            ax.plot(ks, [r["predicted_mean"] for r in rs], "x", color=COLORS.get(scheme),
                    markersize=9)
    ax.set_xlabel("k")
    ax.set_ylabel("compressed / uncompressed")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_trace(rows, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy([r["t"] for r in rows], [max(r["grad_sq"], 1e-300) for r in rows])
    ax.set_xlabel("t")
    ax.set_ylabel("||grad f(x_t)||^2")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_rows(experiment, rows, path):
    if experiment == "fig1":
        plot_fig1(rows, path)
    elif experiment == "fig2":
        plot_fig2(rows, path)
    elif experiment in ("linreg-ratio", "linreg-iters"):
        plot_ratio(rows, path, predicted=experiment == "linreg-ratio")
    elif experiment == "sgd":
        plot_trace(rows, path)
    else:
        fig, ax = plt.subplots(figsize=(6, 4))
        for scheme, rs in _by_scheme(rows).items():
            ax.plot([r["k"] for r in rs], [r["qnorm_exact"] for r in rs], "o-",
                    color=COLORS.get(scheme), label=f"{scheme}-k")
        ax.set_xlabel("k")
        ax.set_ylabel("Q-seminorm")
        ax.legend()
        fig.savefig(path, dpi=120)
        plt.close(fig)
