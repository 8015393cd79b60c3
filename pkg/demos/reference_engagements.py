"""
Two four-defender engagements: a homogeneous team and a heterogeneous one.

For each we print the capture certificate, simulate the engagement, audit
the sqrt(V) decay along the trace and draw the trajectories.

    python demos/reference_engagements.py [out_dir]
"""
import sys
from pathlib import Path

import numpy as np

from simcapture import scenarios as S
from simcapture.analysis import certify, verify_consensus_rate
from simcapture.dynamics import simulate
from simcapture.plotting import trajectory_svg
from simcapture.scenario_io import trace_to_csv

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(exist_ok=True)

for name, scenario in [("homogeneous", S.homogeneous()), ("heterogeneous", S.heterogeneous())]:
    cert = certify(scenario)
    print(f"\n== {name}")
    print(f"lambda_min(W) = {cert.lambda_min_w:.6f}, m = {cert.m}, c = {cert.c:.6f}")
    print(f"V(0) = {cert.v0:.3f}  ->  capture guaranteed by t = {cert.t_star_bound:.3f}")

    trace = simulate(scenario)
    print(f"simulated outcome: {trace.outcome.kind} at t = {trace.outcome.time:.4f}")

    # sqrt(V) should fall at least at rate c until capture
    rep = verify_consensus_rate(trace, cert)
    print(f"rate audit: worst excess {rep.max_violation:.2e} (slack {rep.tolerance:.2e}) over {rep.n_samples} samples")

    # how much of the guaranteed decay is actually used
    root = np.sqrt(trace.lyapunov)
    print(f"sqrt(V) falls from {root[0]:.2f} to {root[-1]:.3f}; the guarantee alone would reach "
          f"{max(root[0] - cert.c * trace.outcome.time, 0):.2f}")

    csv_path = out / f"{name}_trace.csv"
    csv_path.write_text(trace_to_csv(trace))
    (out / f"{name}_trajectory.svg").write_text(trajectory_svg(csv_path))
    print(f"wrote {csv_path} and {name}_trajectory.svg")

# The sufficient conditions are conservative; the homogeneous team captures
# even though the speed condition built on the graph-only bound fails.
cert = certify(S.homogeneous())
print("\nhomogeneous sufficient conditions:")
print(f"  direct form   holds={cert.sufficient_capture.holds}  slack={cert.sufficient_capture.slack:+.4f}")
print(f"  ratio form    holds={cert.speed_ratio_ok.holds}  slack={cert.speed_ratio_ok.slack:+.4f}")
print(f"  graph-only    holds={cert.lemma_speed_ok.holds}  slack={cert.lemma_speed_ok.slack:+.4f}")
