"""
Bound envelopes and sensitivity curves as SVG
=============================================

Writes two figures per instrument strength: Delta(a) against a for a few
gamma values (inside the shaded sharp bounds), and Delta(0), Delta(1)
against gamma. Weaker instruments bend the gamma curves more.
Needs matplotlib.
"""

import sys
from pathlib import Path

from late_bounds.sweep import default_sweep_a_grid, rows_to_csv, sweep_rows, write_svgs

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_figures")
out.mkdir(exist_ok=True)

itt = -0.5
for mu in (0.35, 0.5, 0.75):
    rows = sweep_rows(itt, mu, (0.0, 0.25, 0.5, 0.75, 1.0), default_sweep_a_grid())
    stem = out / f"bounds_mu{round(mu * 100):03d}"
    stem.with_suffix(".csv").write_text(rows_to_csv(rows))
    for path in write_svgs(rows, itt, mu, stem.with_suffix(".svg")):
        print("wrote", path)
