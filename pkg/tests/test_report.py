import pytest

from intentlab.errors import NoMetricsFound
from intentlab.report import ablation_bars, cmd_report, eval_tables


def eval_rows():
    rows = []
    for rep, base in (("pretrained", 0.7), ("scratch", 0.35)):
        for regime, frac, bump in (("Frozen", 0.1, 0.0), ("Frozen", 1.0, 0.02), ("Finetuned", 1.0, 0.04)):
            rows.append({"representation": rep, "regime": regime, "labeled_fraction": frac,
                         "cls_accuracy": base + bump, "ant_accuracy": base - 0.1,
                         "loc_accuracy_at": {"1": base - 0.2, "0.25": base - 0.5}})
    return rows


def test_eval_table_structure():
    text = eval_tables(eval_rows())
    header = [line for line in text.splitlines() if line.startswith("| Representation")][0]
    assert header == "| Representation | Linear 10% | Linear 100% | Finetune 100% |"
    assert "| pretrained | 70.0 | 72.0 | 74.0 |" in text
    assert "| scratch | 35.0 | 37.0 | 39.0 |" in text
    assert "| pretrained | 50.0 | 20.0 |" in text


def summary(cells):
    return [{"scope": s, "loss_mode": m, "n_ok": 1, "n_failed": 0,
             **{f"{k}_{stat}": 0.5 for k in ("cls_acc", "loc_acc_1.0", "loc_acc_0.25", "ant_acc")
                for stat in ("mean", "std")}} for s, m in cells]


@pytest.mark.parametrize("n", [1, 3, 8])
def test_ablation_bars_one_group_per_cell(tmp_path, n):
    cells = [(s, m) for s in ("Global", "Local") for m in ("TempOnly", "OrdOnly", "Combined", "CombinedPermutation")][:n]
    assert ablation_bars(summary(cells), tmp_path / "bars.svg") == n
    svg = (tmp_path / "bars.svg").read_text()
    for key in ("cls_acc", "loc_acc_1.0", "loc_acc_0.25", "ant_acc"):
        assert svg.count(f'id="bar-{key}-') == n
    assert sum(svg.count(m) for _, m in cells) >= n


def test_report_empty(tmp_path):
    with pytest.raises(NoMetricsFound):
        cmd_report(tmp_path, tmp_path)
