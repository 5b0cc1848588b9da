"""
Coherence between the ground and first excited state
====================================================

Prepare the HOMO/LUMO superposition on a short chain, average an ensemble
of Ehrenfest trajectories started from Wigner samples, and extract the
envelope of the polarization.  A few hundred trajectories are enough to
see the recurrences; the noise floor drops as 1/sqrt(count).

Run with an argument to change the ensemble size, e.g.
``python3 02_ground_excited_recurrences.py 300``.
"""

import sys

import numpy as np

from ssh_coherence import ModelParams, RunSettings, SuperpositionSpec, extract_metrics, run_ensemble
from ssh_coherence.cli import write_result_csv

count = int(sys.argv[1]) if len(sys.argv) > 1 else 100
params = ModelParams(nSites=4)
spec = SuperpositionSpec("GroundExcited")
run = RunSettings(dt=0.02, tFinal=350.0, recordStride=5, watchedLevels=spec.levels(params))

result = run_ensemble(spec, params, run, count, masterSeed=2024)
write_result_csv("n4_ground_excited.csv", result)

m = extract_metrics(result)
print(f"{count} trajectories, max energy drift {result.maxEnergyDrift:.1e} eV")
print("recurrences at (fs):", np.round(m.recurrenceTimes, 1))
print("spacings (fs):", np.round(m.recurrencePeriods, 1))
print(f"envelope falls below 1/e of its start at {m.decoherenceTime:.1f} fs")

try:
    import matplotlib.pyplot as plt
except ImportError:
    sys.exit(0)
fig, ax = plt.subplots(figsize=(8, 3.5))
ax.plot(result.times, result.meanPolarization, lw=0.4)
ax.plot(result.times, m.envelopeSeries, "k")
ax.axhline(m.threshold, ls="--", c="gray")
ax.set_xlabel("t (fs)")
ax.set_ylabel("<mu(t)> (e A)")
fig.tight_layout()
fig.savefig("n4_ground_excited.png", dpi=150)
