"""Report rendering: JSON + text table + CSV, with matplotlib figures.

Every report path writes a small family of files next to the requested
JSON path: `<base>.txt` (summary table), `<base>.csv` (per-item scores),
and `<base>.png` (figure).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .evaluation import AblationResult, EvalReport  # noqa: E402


def _base(json_path: str | Path) -> Path:
    p = Path(json_path)
    return p.with_suffix("") if p.suffix == ".json" else p


def write_metrics_history(history, path: str | Path) -> None:
    """One JSON object per epoch per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for entry in history:
            fh.write(json.dumps(vars(entry)) + "\n")


def plot_loss_curve(history, png_path: str | Path, title: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    epochs = [e.epoch for e in history]
    ax.plot(epochs, [e.loss for e in history], marker="o", label="loss")
    if history and hasattr(history[0], "accuracy"):
        ax2 = ax.twinx()
        ax2.plot(epochs, [e.accuracy for e in history], marker="s",
                 color="tab:green", label="accuracy")
        ax2.set_ylabel("accuracy")
        ax2.set_ylim(0, 1.05)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)


def write_eval_report(report: EvalReport, json_path: str | Path) -> dict[str, Path]:
    base = _base(json_path)
    base.parent.mkdir(parents=True, exist_ok=True)
    paths = {"json": Path(json_path), "txt": base.with_suffix(".txt"),
             "csv": base.with_suffix(".csv"), "png": base.with_suffix(".png")}

    paths["json"].write_text(json.dumps(report.to_dict(), indent=2), encoding="utf-8")

    lines = [
        "BLEU-4 evaluation",
        "=================",
        f"items        {report.item_count}",
        f"corpus mean  {report.corpus_mean:.6f}",
        f"min / max    {min(report.item_scores):.6f} / {max(report.item_scores):.6f}",
        f"smoothing    {report.config.get('smoothing_eps')}",
        f"tokenizer    {report.config.get('tokenizer')}",
    ]
    paths["txt"].write_text("\n".join(lines) + "\n", encoding="utf-8")

    with paths["csv"].open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item", "bleu4"])
        for i, s in enumerate(report.item_scores):
            writer.writerow([i, f"{s:.10f}"])

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(report.item_scores, bins=20, range=(0.0, 1.0), color="tab:blue", alpha=0.8)
    ax.axvline(report.corpus_mean, color="tab:red", linestyle="--",
               label=f"mean {report.corpus_mean:.3f}")
    ax.set_xlabel("per-item BLEU-4")
    ax.set_ylabel("count")
    ax.set_title("Per-item BLEU-4 distribution")
    ax.legend()
    fig.tight_layout()
    fig.savefig(paths["png"], dpi=120)
    plt.close(fig)
    return paths


def write_ablation_report(results: list[AblationResult], json_path: str | Path) -> dict[str, Path]:
    base = _base(json_path)
    base.parent.mkdir(parents=True, exist_ok=True)
    paths = {"json": Path(json_path), "txt": base.with_suffix(".txt"),
             "csv": base.with_suffix(".csv"), "png": base.with_suffix(".png")}

    payload = {
        "seeds": [r.seed for r in results],
        "fusion_on_means": [r.fusion_on.corpus_mean for r in results],
        "fusion_off_means": [r.fusion_off.corpus_mean for r in results],
        "differences": [r.difference for r in results],
        "mean_difference": sum(r.difference for r in results) / len(results),
        "wins": sum(r.difference > 0 for r in results),
    }
    paths["json"].write_text(json.dumps(payload, indent=2), encoding="utf-8")

    rows = [f"{'seed':>6} {'fusion on':>12} {'fusion off':>12} {'diff':>10}"]
    for r in results:
        rows.append(f"{r.seed:>6} {r.fusion_on.corpus_mean:>12.6f} "
                    f"{r.fusion_off.corpus_mean:>12.6f} {r.difference:>10.6f}")
    rows.append(f"mean difference: {payload['mean_difference']:.6f} "
                f"({payload['wins']}/{len(results)} seeds positive)")
    paths["txt"].write_text("\n".join(rows) + "\n", encoding="utf-8")

    with paths["csv"].open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "fusion_on", "fusion_off", "difference"])
        for r in results:
            writer.writerow([r.seed, f"{r.fusion_on.corpus_mean:.10f}",
                             f"{r.fusion_off.corpus_mean:.10f}", f"{r.difference:.10f}"])

    fig, ax = plt.subplots(figsize=(6, 4))
    x = range(len(results))
    width = 0.38
    ax.bar([i - width / 2 for i in x], payload["fusion_on_means"], width,
           label="fusion on", color="tab:blue")
    ax.bar([i + width / 2 for i in x], payload["fusion_off_means"], width,
           label="fusion off", color="tab:orange")
    ax.set_xticks(list(x))
    ax.set_xticklabels([str(r.seed) for r in results])
    ax.set_xlabel("seed")
    ax.set_ylabel("corpus BLEU-4")
    ax.set_title("Emotion-fusion ablation")
    ax.legend()
    fig.tight_layout()
    fig.savefig(paths["png"], dpi=120)
    plt.close(fig)
    return paths
