"""End-to-end experiment: run an eps-sweep from a YAML config, analyse it and
write plot data, the same steps as

    bvlab solve demos/configs/prototype.yaml --output <dir>
    bvlab plotdata <dir>

    python demos/06_cli_sweep.py [config]      (prototype: about 20 s)
"""
import sys
import tempfile
from pathlib import Path

from bvlab import emit_plotdata, run_experiment
from bvlab.experiment import read_csv

config = sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent / "configs" / "prototype.yaml"
with tempfile.TemporaryDirectory() as tmp:
    out = run_experiment(config, output=tmp, workers=2)
    header, rows = read_csv(Path(out) / "summary.csv")
    print(" ".join(f"{h:>12}" for h in header))
    for row in rows:
        print(" ".join(f"{float(x):12.4e}" for x in row))
    missing = emit_plotdata(out)
    print("plot data:", sorted(p.name for p in (Path(out) / "plotdata").iterdir()), "missing:", missing)
