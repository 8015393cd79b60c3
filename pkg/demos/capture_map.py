"""
Capture time over intruder starting points for the homogeneous square team
with a fast (speed 0.5) intruder, plus the boundary of the region from which
a breach cannot be prevented.

    python demos/capture_map.py [out_dir] [n]      # n x n grid, default 81
"""
import math
import sys
from pathlib import Path

import numpy as np

from simcapture import scenarios as S
from simcapture.experiments import GridSpec, capture_map, encloses, extract_boundary, is_closed, polygon_area
from simcapture.plotting import heatmap_svg
from simcapture.scenario_io import boundary_to_csv, map_to_csv

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
n = int(sys.argv[2]) if len(sys.argv) > 2 else 81
out.mkdir(exist_ok=True)

cmap = capture_map(S.capture_map_base(0.5), GridSpec(nx=n, ny=n), jobs=None)
print(f"{n}x{n} cells: {cmap.count(0)} captured, {cmap.breach_cells} breached or undecided")

lines = extract_boundary(cmap)
main = lines[0]
print(f"{len(lines)} boundary curve(s); main one closed={is_closed(main)}, "
      f"encloses target={encloses(main, (0, 0))}, area={polygon_area(main):.2f}")

# The square team is invariant under quarter turns, and so is the map.
for k in (1, 2, 3):
    print(f"agreement with {90 * k:3d} deg rotation: {np.mean(cmap.classes == np.rot90(cmap.classes, k)):.2%}")

# Capture takes longer the further out the intruder starts.
t = cmap.t_star
mid = n // 2
east = t[mid, mid:]
print("capture time along the +x axis:", np.round(east[~np.isnan(east)][:: max(1, n // 20)], 2))

(out / "map.csv").write_text(map_to_csv(cmap))
(out / "boundary.csv").write_text(boundary_to_csv(lines))
(out / "heatmap.svg").write_text(heatmap_svg(out / "map.csv", out / "boundary.csv"))
print(f"wrote {out}/map.csv, boundary.csv, heatmap.svg")
