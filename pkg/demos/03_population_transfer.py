"""
Which superpositions leak population?
=====================================

Superpose two conduction levels (i, i+1) of a 20-site chain on top of the
ground-state geometry, or on the geometry relaxed for the excited state.
Track how much of the pair population survives and how long the
polarization stays coherent.
"""

import sys

from ssh_coherence import ModelParams, RunSettings, SuperpositionSpec, extract_metrics, run_ensemble

count = int(sys.argv[1]) if len(sys.argv) > 1 else 40
params = ModelParams(nSites=20)

for kind in ("PairGroundGeometry", "PairExcitedGeometry"):
    for i in (11, 15, 19):
        spec = SuperpositionSpec(kind, i)
        run = RunSettings(dt=0.02, tFinal=200.0, recordStride=5, watchedLevels=(i, i + 1))
        res = run_ensemble(spec, params, run, count, masterSeed=7)
        pair = res.population(i) + res.population(i + 1)
        m = extract_metrics(res)
        print(f"{kind:20s} i={i:2d}: pair population {pair[0]:.2f} -> {pair[-1]:.2f}, "
              f"coherence {m.decoherenceTime:6.1f} fs")
