"""Acceptance criteria 1-11, each reported as one PASS/FAIL line.

The lines are printed as the tests run and repeated in the terminal summary.
Ensembles are checkpointed under ``.acceptance_cache/`` (or
``$SSH_ACCEPTANCE_CACHE``), so a second session reuses them.  Ensemble sizes:

    SSH_ACCEPTANCE_TRAJECTORIES       ground/excited runs, N = 4 and 20 (1000)
    SSH_ACCEPTANCE_PAIR_TRAJECTORIES  level-pair runs, N = 20 (500)
    SSH_ACCEPTANCE_LONG_TRAJECTORIES  N = 50 and 100 short runs (200)
"""

import functools
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from ssh_coherence import (
    ModelParams,
    RunSettings,
    SuperpositionSpec,
    analyze,
    extract_metrics,
    ground_state_occupation,
    optimize_geometry,
    run_ensemble,
)
from ssh_coherence.relax import adiabatic_energy
from ssh_coherence.wigner import harmonic_energy, sample_ensemble

ROOT = Path(__file__).resolve().parent.parent
CACHE = Path(os.environ.get("SSH_ACCEPTANCE_CACHE", ROOT / ".acceptance_cache"))
GE_COUNT = int(os.environ.get("SSH_ACCEPTANCE_TRAJECTORIES", 1000))
PAIR_COUNT = int(os.environ.get("SSH_ACCEPTANCE_PAIR_TRAJECTORIES", 500))
LONG_COUNT = int(os.environ.get("SSH_ACCEPTANCE_LONG_TRAJECTORIES", 200))
SEED = 20240611
WORKERS = os.cpu_count() or 1

REPORT = {}


def report(k, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
    REPORT[k] = line
    print(line)
    return ok


@functools.lru_cache(maxsize=None)
def ensemble(n, kind, level, tFinal, count):
    params = ModelParams(nSites=n)
    spec = SuperpositionSpec(kind, level)
    run = RunSettings(dt=0.02, tFinal=tFinal, recordStride=5, watchedLevels=spec.levels(params))
    CACHE.mkdir(parents=True, exist_ok=True)
    ckpt = CACHE / f"n{n}_{kind}_{level}_{tFinal:g}fs_{count}_{SEED}.npz"
    res = run_ensemble(spec, params, run, count, SEED, workers=WORKERS, checkpoint=str(ckpt))
    return res, extract_metrics(res)


def _within(value, target, rel):
    return abs(value - target) <= rel * target


def _fmt(xs):
    return "[" + ", ".join(f"{x:.1f}" for x in xs) + "]"


def _last_recurrence(m):
    # informational: when the revivals stop, as opposed to the 1/e decay of the first beat
    last = m.recurrenceTimes[-1] if len(m.recurrenceTimes) else 0.0
    return f"last recurrence above noise at {last:.1f} fs (not graded)"


# --- static structure ------------------------------------------------------


def test_c01_spectrum_structure():
    rows, ok, gaps = [], True, []
    for n in (20, 50, 100):
        params = ModelParams(nSites=n)
        r = optimize_geometry(ground_state_occupation(params), params)
        e = r.orbitalEnergies
        width = e[-1] - e[0]
        split = np.sum(e < 0) == n // 2 and np.sum(e > 0) == n // 2
        ok &= bool(split) and abs(width - 10.0) <= 0.3 and r.gap > 0
        gaps.append(r.gap)
        rows.append(f"N={n} width {width:.3f} eV gap {r.gap:.3f} eV")
    ok &= bool(np.all(np.diff(gaps) < 0))
    assert report(1, ok, "; ".join(rows))


def test_c02_dimerization():
    rows, ok = [], True
    for n in (20, 100):
        params = ModelParams(nSites=n)
        bonds = np.diff(optimize_geometry(ground_state_occupation(params), params).u0)
        alternating = np.all(bonds != 0) and np.all(np.sign(bonds[1:]) == -np.sign(bonds[:-1]))
        ok &= bool(alternating)
        rows.append(f"N={n} strict alternation {bool(alternating)}, min |du| {np.min(np.abs(bonds)):.4f} A")
    assert report(2, ok, "; ".join(rows))


def test_c03_zero_point_energy():
    params = ModelParams(nSites=20)
    f = ground_state_occupation(params)
    relaxed = optimize_geometry(f, params)
    modes = analyze(relaxed, params)
    u, p, _, _ = sample_ensemble(modes, SEED, 10_000)
    zpe = modes.zeroPointEnergy
    harmonic = float(np.mean(harmonic_energy(u, p, modes)))
    # second route: kinetic energy plus the full anharmonic surface
    e0 = adiabatic_energy(relaxed.u0, f, params)
    full = float(np.mean([np.sum(b**2) / (2 * params.massM) + adiabatic_energy(a, f, params) - e0
                          for a, b in zip(u, p)]))
    ok = _within(harmonic, zpe, 0.02) and _within(full, zpe, 0.02)
    assert report(3, ok, f"ZPE {zpe:.5f} eV, harmonic mean {harmonic:.5f} eV "
                         f"({harmonic / zpe - 1:+.2%}), full surface {full:.5f} eV ({full / zpe - 1:+.2%})")


# --- ground/excited ensembles ----------------------------------------------


@pytest.mark.slow
def test_c04_short_chain_recurrences():
    res, m = ensemble(4, "GroundExcited", None, 350.0, GE_COUNT)
    periods = m.recurrencePeriods
    period_ok = len(periods) >= 1 and _within(np.mean(periods), 30.0, 0.2)
    tdec_ok = _within(m.decoherenceTime, 250.0, 0.2)
    detail = (f"{res.trajectoriesCompleted} traj, recurrence spacings {_fmt(periods)} fs "
              f"(target 30 +-20%: {'ok' if period_ok else 'miss'}), decoherence time "
              f"{m.decoherenceTime:.1f} fs (target 250 +-20%: {'ok' if tdec_ok else 'miss'}); "
              f"{_last_recurrence(m)}")
    assert report(4, period_ok and tdec_ok, detail)


@pytest.mark.slow
def test_c05_twenty_site_recurrences():
    res, m = ensemble(20, "GroundExcited", None, 200.0, GE_COUNT)
    periods = m.recurrencePeriods
    count_ok = len(periods) >= 2
    period_ok = len(periods) >= 1 and _within(np.mean(periods), 46.0, 0.2)
    tdec_ok = _within(m.decoherenceTime, 100.0, 0.25)
    detail = (f"{res.trajectoriesCompleted} traj, recurrences at {_fmt(m.recurrenceTimes)} fs, "
              f"spacings {_fmt(periods)} fs (target 46 +-20%, >=2 visible: "
              f"{'ok' if period_ok and count_ok else 'miss'}), decoherence time "
              f"{m.decoherenceTime:.1f} fs (target 100 +-25%: {'ok' if tdec_ok else 'miss'}); "
              f"{_last_recurrence(m)}")
    assert report(5, count_ok and period_ok and tdec_ok, detail)


@pytest.mark.slow
def test_c06_long_chains_decohere_fast():
    rows, ok = [], True
    for n in (50, 100):
        res, m = ensemble(n, "GroundExcited", None, 60.0, LONG_COUNT)
        good = m.decohered and m.decoherenceTime < 15.0 and len(m.recurrenceTimes) == 0
        ok &= good
        rows.append(f"N={n} ({res.trajectoriesCompleted} traj) decoherence time "
                    f"{m.decoherenceTime:.1f} fs, recurrences {_fmt(m.recurrenceTimes)}")
    assert report(6, ok, "; ".join(rows))


# --- level-pair superpositions ---------------------------------------------


def _pair_retention(res, i, t=200.0):
    k = int(np.argmin(np.abs(res.times - t)))
    pair = res.population(i) + res.population(i + 1)
    return pair[k] / pair[0]


@pytest.mark.slow
def test_c07_population_transfer():
    kept = {i: _pair_retention(ensemble(20, "PairGroundGeometry", i, 200.0, PAIR_COUNT)[0], i)
            for i in (11, 15, 19)}
    ok = kept[11] > 0.9 and kept[15] > 0.9 and kept[19] < 0.75
    detail = ", ".join(f"i={i} keeps {v:.3f}" for i, v in kept.items())
    assert report(7, ok, detail + " of the pair population at 200 fs")


@pytest.mark.slow
def test_c08_nuclear_preparation():
    life = {(kind, i): ensemble(20, kind, i, 200.0, PAIR_COUNT)[1].decoherenceTime
            for kind in ("PairGroundGeometry", "PairExcitedGeometry") for i in (11, 19)}
    r11 = life["PairExcitedGeometry", 11] / life["PairGroundGeometry", 11]
    r19 = life["PairExcitedGeometry", 19] / life["PairGroundGeometry", 19]
    ok = r11 >= 2.0 and abs(r19 - 1.0) < 0.3
    detail = (f"i=11 lifetime {life['PairGroundGeometry', 11]:.1f} -> {life['PairExcitedGeometry', 11]:.1f} fs "
              f"(x{r11:.2f}, need >=2); i=19 {life['PairGroundGeometry', 19]:.1f} -> "
              f"{life['PairExcitedGeometry', 19]:.1f} fs (x{r19:.2f}, need change <30%)")
    assert report(8, ok, detail)


@pytest.mark.slow
def test_c09_long_lived_pair():
    life = {kind: ensemble(20, kind, 15, 200.0, PAIR_COUNT)[1]
            for kind in ("PairGroundGeometry", "PairExcitedGeometry")}
    ok = any(m.decoherenceTime >= 150.0 for m in life.values())
    detail = "; ".join(f"{kind} i=15 coherent for {m.decoherenceTime:.1f} fs"
                       f"{'' if m.decohered else ' (not decohered by t_final)'}" for kind, m in life.items())
    assert report(9, ok, detail + " (need >=150 fs in either class)")


# --- property suite and performance ----------------------------------------

PROPERTY_TESTS = [
    "tests/test_dynamics.py::test_conservation_over_300_fs",
    "tests/test_dynamics.py::test_unitarity_per_step",
    "tests/test_dynamics.py::test_trace_derivative_vanishes",
    "tests/test_dynamics.py::test_step_halving_order",
    "tests/test_model.py::test_uniform_chain_spectrum",
    "tests/test_model.py::test_gradient_matches_finite_difference",
    "tests/test_phonons.py::test_alpha_zero_is_spring_chain",
    "tests/test_phonons.py::test_hessian_matches_finite_difference",
    "tests/test_phonons.py::test_excited_hessian_at_n20_matches_finite_difference",
    "tests/test_superpos.py::test_matches_fock_oracle",
    "tests/test_ensemble.py::test_worker_count_is_bitwise_irrelevant",
]


def test_c10_property_suite():
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *PROPERTY_TESTS],
                          cwd=ROOT, capture_output=True, text=True)
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    assert report(10, proc.returncode == 0, f"{len(PROPERTY_TESTS)} property groups: {summary}"), proc.stdout


@pytest.mark.slow
def test_c11_performance():
    params = ModelParams(nSites=20)
    spec = SuperpositionSpec("GroundExcited")
    run = RunSettings(dt=0.02, tFinal=300.0, recordStride=5, watchedLevels=spec.levels(params))
    count = 8
    run_ensemble(spec, params, run, 1, SEED)  # warm the compiled kernels
    start = time.perf_counter()
    run_ensemble(spec, params, run, count, SEED)
    per = (time.perf_counter() - start) / count
    single = per * 1000 / 60
    eight = single / 8
    ok = eight < 30.0
    detail = (f"{per:.2f} s per 300 fs trajectory; 1000 trajectories extrapolate to {single:.1f} min on one "
              f"core, {eight:.1f} min on 8 cores assuming linear speedup (not measurable: {WORKERS} core here)")
    assert report(11, ok, detail)
