"""
A small ablation grid
=====================

Pretrain one encoder per (negative scope, loss mode, seed) cell and evaluate
each with a frozen probe. Cells run in a thread pool; the table comes out the
same whatever the worker count.
"""

from pathlib import Path

from intentlab.evaluation import ProbeConfig, run_ablation_matrix
from intentlab.nncore.model import ModelDims
from intentlab.report import ablation_bars, ablation_table
from intentlab.synthgen import GenConfig, generate_dataset
from intentlab.training import PretrainConfig

OUT = Path(__file__).with_name("_output")
OUT.mkdir(exist_ok=True)

###########################################################################
# Reduced sizes so the whole grid finishes quickly.

ds = generate_dataset(GenConfig(seed=0), counts=(150, 40, 40))
grid = [(scope, mode) for scope in ("Global", "Local") for mode in ("TempOnly", "OrdOnly", "Combined")]
table = run_ablation_matrix(ds, grid, seeds=[0, 1], dims=ModelDims(), pretrain_cfg=PretrainConfig(steps=300),
                            cfg=ProbeConfig(steps=200), threads=2)

print(table.csv_text())
print(ablation_table(table.summary))
print("direction check:", table.direction)
print("bar groups:", ablation_bars(table.summary, OUT / "ablation_bars.svg"))
