from __future__ import annotations

import subprocess
import sys
from pathlib import Path

import pytest

DEMOS = Path(__file__).resolve().parents[1] / "demos"


@pytest.mark.parametrize(
    "script, args",
    [("01_sensitivity_grid.py", []), ("02_thresholds.py", []), ("03_simulation_study.py", ["5"]), ("04_bounds_figure.py", None)],
)
def test_demo_runs(script, args, tmp_path):
    if args is None:
        pytest.importorskip("matplotlib")
        args = [str(tmp_path)]
    proc = subprocess.run([sys.executable, str(DEMOS / script), *args], capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip()
