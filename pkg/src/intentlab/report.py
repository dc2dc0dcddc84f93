"""Static tables and charts built from run logs."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import NoMetricsFound

SETTING_COLUMNS = (("Frozen", 0.1, "Linear 10%"), ("Frozen", 1.0, "Linear 100%"), ("Finetuned", 1.0, "Finetune 100%"))


def _pct(v):
    return "-" if v is None or (isinstance(v, float) and np.isnan(v)) else f"{100 * v:.1f}"


def _lookup(rows, rep, regime, fraction):
    for r in rows:
        if r.get("representation", "pretrained") == rep and r["regime"] == regime \
                and abs(r["labeled_fraction"] - fraction) < 1e-9:
            return r
    return None


def eval_tables(rows) -> str:
    """Markdown tables: classification by setting, localization and anticipation."""
    reps = list(dict.fromkeys(r.get("representation", "pretrained") for r in rows))
    small = sorted({r["labeled_fraction"] for r in rows if r["labeled_fraction"] < 1.0})
    cols = [(reg, small[0] if frac < 1 and small else frac, label if frac == 1 or not small
             else f"Linear {100 * small[0]:g}%") for reg, frac, label in SETTING_COLUMNS]
    lines = ["## Classification accuracy", "", "| Representation | " + " | ".join(c[2] for c in cols) + " |",
             "|---" * (len(cols) + 1) + "|"]
    for rep in reps:
        cells = [_pct((_lookup(rows, rep, reg, frac) or {}).get("cls_accuracy")) for reg, frac, _ in cols]
        lines.append(f"| {rep} | " + " | ".join(cells) + " |")

    thresholds = []
    for r in rows:
        for k in r["loc_accuracy_at"]:
            if k not in thresholds:
                thresholds.append(k)
    lines += ["", "## Localization accuracy (Linear 100%)", "",
              "| Representation | " + " | ".join(f"within {t} s" for t in thresholds) + " |",
              "|---" * (len(thresholds) + 1) + "|"]
    for rep in reps:
        r = _lookup(rows, rep, "Frozen", 1.0) or {"loc_accuracy_at": {}}
        lines.append(f"| {rep} | " + " | ".join(_pct(r["loc_accuracy_at"].get(t)) for t in thresholds) + " |")

    lines += ["", "## Anticipation accuracy", "", "| Representation | Linear 100% | Finetune 100% |",
              "|---|---|---|"]
    for rep in reps:
        lin = (_lookup(rows, rep, "Frozen", 1.0) or {}).get("ant_accuracy")
        fin = (_lookup(rows, rep, "Finetuned", 1.0) or {}).get("ant_accuracy")
        lines.append(f"| {rep} | {_pct(lin)} | {_pct(fin)} |")
    return "\n".join(lines) + "\n"


def ablation_table(summary) -> str:
    lines = ["## Ablation (mean ± std over seeds)", "",
             "| Scope | Loss | Classification | Loc 1 s | Loc 0.25 s | Anticipation | ok/failed |",
             "|---|---|---|---|---|---|---|"]
    for e in summary:
        cells = [f"{_pct(e[f'{k}_mean'])} ± {_pct(e[f'{k}_std'])}"
                 for k in ("cls_acc", "loc_acc_1.0", "loc_acc_0.25", "ant_acc")]
        lines.append(f"| {e['scope']} | {e['loss_mode']} | " + " | ".join(cells)
                     + f" | {e['n_ok']}/{e['n_failed']} |")
    return "\n".join(lines) + "\n"


def _read_jsonl(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]


def _figure():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "intentlab"
    plt.rcParams["svg.fonttype"] = "none"
    return plt


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})


def training_curve(rows, path) -> None:
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    steps = [r["step"] for r in rows]
    for key in ("l_total", "l_temp", "l_ord"):
        ax.plot(steps, [r[key] for r in rows], label=key, linewidth=1)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def ablation_bars(summary, path) -> int:
    """Grouped bar chart with one group per grid cell; returns the group count."""
    plt = _figure()
    keys = ("cls_acc", "loc_acc_1.0", "loc_acc_0.25", "ant_acc")
    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(summary)), 3.5))
    x = np.arange(len(summary))
    width = 0.8 / len(keys)
    for i, key in enumerate(keys):
        bars = ax.bar(x + i * width, [e[f"{key}_mean"] for e in summary], width,
                      yerr=[e[f"{key}_std"] for e in summary], label=key)
        for j, patch in enumerate(bars.patches):
            patch.set_gid(f"bar-{key}-{j}")
    ax.set_xticks(x + 0.4 - width / 2)
    ax.set_xticklabels([f"{e['scope']}\n{e['loss_mode']}" for e in summary], fontsize=7)
    ax.set_ylim(0, 1)
    ax.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)
    return len(summary)


def cmd_report(logs_dir, out_dir) -> list:
    """Regenerate report.md and SVG charts from whatever logs exist in ``logs_dir``."""
    from .evaluation import summarize_ablation

    logs_dir, out_dir = Path(logs_dir), Path(out_dir)
    metrics = sorted(logs_dir.rglob("metrics.jsonl"))
    pre_logs = sorted(logs_dir.rglob("pretrain_log.jsonl"))
    abl = sorted(logs_dir.rglob("ablation_metrics.jsonl"))
    if not (metrics or pre_logs or abl):
        raise NoMetricsFound(f"no metrics logs under {logs_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    parts = ["# Run report", ""]
    for path in metrics:
        parts += [f"### {path.relative_to(logs_dir)}", "", eval_tables(_read_jsonl(path))]
    for i, path in enumerate(pre_logs):
        rows = _read_jsonl(path)
        if not rows:
            continue
        name = f"training_curve_{i}.svg" if len(pre_logs) > 1 else "training_curve.svg"
        training_curve(rows, out_dir / name)
        written.append(out_dir / name)
        parts += [f"Training curve for {path.relative_to(logs_dir)}: `{name}`", ""]
    for i, path in enumerate(abl):
        summary = summarize_ablation(_read_jsonl(path))
        name = f"ablation_bars_{i}.svg" if len(abl) > 1 else "ablation_bars.svg"
        ablation_bars(summary, out_dir / name)
        written.append(out_dir / name)
        parts += [ablation_table(summary), f"Chart: `{name}`", ""]
    report = out_dir / "report.md"
    report.write_text("\n".join(parts))
    written.insert(0, report)
    return written
