"""The batch pipeline, end to end, through the command-line interface.

Generates a scenario cache, runs three estimators on it, compares them,
and exports a trajectory -- the same flow you would drive from a shell:

    srifkit simulate --scenario default --out scen.bin
    srifkit run --scenario scen.bin --estimator srif --out runs/srif
    srifkit compare runs/* --tolerance 1e-6
    srifkit export --run runs/srif --out traj.txt
"""

import dataclasses
import tempfile
from pathlib import Path

from srifkit import cli
from srifkit.sim import default_scenario

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    spec = dataclasses.replace(default_scenario(seed=3), duration=20.0)
    (tmp / "scen.json").write_text(spec.to_json())

    cli.main(["simulate", "--scenario", str(tmp / "scen.json"),
              "--out", str(tmp / "scen.bin")])

    rundirs = []
    for est in ("kf", "srif", "pcsrif"):
        out = tmp / f"run-{est}"
        cli.main(["run", "--scenario", str(tmp / "scen.bin"),
                  "--estimator", est, "--out", str(out)])
        rundirs.append(str(out))

    print()
    cli.main(["compare", *rundirs, "--tolerance", "1e-6"])

    print()
    cli.main(["export", "--run", rundirs[1], "--out", str(tmp / "traj.txt")])
    lines = (tmp / "traj.txt").read_text().splitlines()
    print(f"exported {len(lines)} poses; first line:")
    print(" ", lines[0])
    print("\nrun directory contents:", *sorted(
        p.name for p in Path(rundirs[1]).iterdir()))
