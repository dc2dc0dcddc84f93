"""
The command-line driver
=======================

The same pipeline is available as the ``intentlab`` command. This demo calls
its entry point in-process with a reduced config, writing everything into a
scratch directory.
"""

import json
import tempfile
from pathlib import Path

from intentlab.cli import main

work = Path(tempfile.mkdtemp(prefix="intentlab-demo-"))
cfg = work / "config.json"
cfg.write_text(json.dumps({"pretrain": {"steps": 200}, "probe": {"steps": 100}}))

###########################################################################
# Each subcommand takes ``--config`` plus flag overrides; flags win.

for argv in (
    ["generate-data", "--counts", "100", "40", "40", "--seed", "7"],
    ["pretrain", "--data", str(work), "--loss-mode", "Combined", "--scope", "Global"],
    ["evaluate", "--data", str(work), "--checkpoint", str(work / "checkpoint.bin"), "--with-scratch-baseline"],
):
    print("$ intentlab", " ".join(argv))
    assert main(argv + ["--config", str(cfg), "--out", str(work)]) == 0

###########################################################################
# Reports are rebuilt from whatever logs sit in a directory.

assert main(["report", "--logs", str(work), "--out", str(work / "report")]) == 0
print(sorted(p.name for p in (work / "report").iterdir()))
print(json.loads((work / "manifest.json").read_text())["config_digest"])
