"""
How the non-capturable region responds to one defender's speed, to the
communication graph and to which defenders can sense the intruder.

    python demos/capability_sweeps.py [out_dir] [n]   # n x n grid, default 41
"""
import sys
from pathlib import Path

from simcapture import scenarios as S
from simcapture.experiments import GridSpec, run_sweep
from simcapture.graph_core import build_capture_matrices
from simcapture.plotting import overlay_svg
from simcapture.scenario_io import setting_label, sweep_boundaries_to_csv

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
n = int(sys.argv[2]) if len(sys.argv) > 2 else 41
out.mkdir(exist_ok=True)
grid = GridSpec(nx=n, ny=n)

studies = {
    "speed": S.speed_sweep(),
    "communication": S.communication_sweep(),
    "sensing": S.sensing_sweep(),
}

for name, spec in studies.items():
    print(f"\n== {name} ({spec.parameter})")
    results = run_sweep(spec, grid, jobs=None)
    for r in results:
        cm = build_capture_matrices(spec.apply(r.setting).graph)
        print(f"  {setting_label(r.setting):>28}  non-capture cells {r.capture_map.breach_cells:5d}"
              f"   lambda2(W1)={cm.lambda2_w1:.3f}  lambda_min(W)={cm.lambda_min_w:.3f}")
    csv_path = out / f"{name}_boundaries.csv"
    csv_path.write_text(sweep_boundaries_to_csv(results))
    (out / f"{name}_overlay.svg").write_text(overlay_svg(csv_path, title=f"{name} sweep"))

# A faster fourth defender shrinks the region steadily. Richer communication
# helps overall, but not edge by edge: the chord 1-3 added to the ring
# slightly enlarges the region for this team.
