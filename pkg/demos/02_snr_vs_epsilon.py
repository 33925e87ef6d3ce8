"""How the reconstruction SNR of GI, DGI and ODGI depends on object size.

A two-level object blocks a fraction eps of a 28 x 34 grid.  For each eps
we simulate a handful of acquisitions, reconstruct them with all three
protocols and compare the spatial SNR to the closed-form prediction.  The
table is written to ``demo_output/snr_vs_eps.csv`` in the results format the
``ghostsim fit`` command reads.

    python3 demos/02_snr_vs_epsilon.py [output_dir]
"""
import os
import sys

from ghostsim import io
from ghostsim.experiments import SWEEP_EXTRA_COLUMNS, sweep
from ghostsim.simulator import SourceParams

out_dir = sys.argv[1] if len(sys.argv) > 1 else "demo_output"
os.makedirs(out_dir, exist_ok=True)

params = SourceParams("twin", n2=1000.0, M=5e10, eta=0.794, delta_el=5.0)
rows = sweep(params, "epsilon", [0.1, 0.3, 0.5, 0.7, 0.9], width=34, height=28, H=10000,
             n_seeds=4, master_seed=11)

print(" eps   protocol  measured        model")
for r in rows:
    print(f"{r.epsilon:5.3f}  {r.protocol:5s}    {r.snr:6.3f} +- {r.snr_err:5.3f}   {r.extra['snr_pred']:6.3f}")

# Small objects favour the differential protocols: the bucket fluctuation
# they subtract dominates when most of the field is transmitted.
path = os.path.join(out_dir, "snr_vs_eps.csv")
io.results_table(rows, path, extra_columns=SWEEP_EXTRA_COLUMNS)
print(f"wrote {path}")
