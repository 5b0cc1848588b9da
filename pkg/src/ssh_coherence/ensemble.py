"""Monte Carlo ensembles of trajectories and their averaged observables.

Trajectories are independent, so they are farmed out to worker processes in
fixed chunks of indices.  Finished chunks are folded into running sums in
strict trajectory-index order with compensated summation, which makes the
result independent of the number of workers and of completion order.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import RunSettings, propagate_trajectory
from .errors import InvalidInputError, SSHError, TrajectoryError
from .model import ModelParams
from .phonons import NormalModeBasis, analyze
from .relax import RelaxedGeometry, ground_state_occupation, optimize_geometry
from .superpos import OccupationMatrix, SuperpositionSpec, build_superposition
from .wigner import sample_initial_condition

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


@dataclass
class Preparation:
    """Everything a worker needs to run trajectories of one ensemble."""

    params: ModelParams
    spec: SuperpositionSpec
    groundGeometry: RelaxedGeometry
    nuclearGeometry: RelaxedGeometry
    modes: NormalModeBasis
    gamma: OccupationMatrix


def prepare(spec: SuperpositionSpec, params: ModelParams, **relax_opts) -> Preparation:
    """Relax the lattice on the surface named by ``spec`` and quantize it."""
    spec.validate(params)
    ground = optimize_geometry(ground_state_occupation(params), params, **relax_opts)
    occ = spec.nuclear_occupation(params)
    if np.array_equal(occ, ground.occupation):
        nuclear = ground
    else:
        nuclear = optimize_geometry(occ, params, u_init=ground.u0, **relax_opts)
    modes = analyze(nuclear, params)
    return Preparation(params, spec, ground, nuclear, modes, build_superposition(spec, params))


@dataclass
class EnsembleResult:
    times: np.ndarray
    meanPolarization: np.ndarray
    stderrPolarization: np.ndarray
    meanPopulations: np.ndarray  # (records, watched levels)
    trajectoriesCompleted: int
    masterSeed: int
    watchedLevels: tuple = ()
    maxEnergyDrift: float = 0.0

    def population(self, level: int) -> np.ndarray:
        return self.meanPopulations[:, self.watchedLevels.index(level)]


# --- compensated running sums ----------------------------------------------


class _Accumulator:
    """Neumaier-compensated running sums of a few per-trajectory series."""

    def __init__(self, shapes: dict):
        self.count = 0
        self.sums = {k: np.zeros(s) for k, s in shapes.items()}
        self.comp = {k: np.zeros(s) for k, s in shapes.items()}
        self.maxDrift = 0.0

    def add(self, **series):
        for key, x in series.items():
            s, c = self.sums[key], self.comp[key]
            t = s + x
            big = np.abs(s) >= np.abs(x)
            c += np.where(big, (s - t) + x, (x - t) + s)
            self.sums[key] = t
        self.count += 1

    def total(self, key) -> np.ndarray:
        return self.sums[key] + self.comp[key]

    def state(self) -> dict:
        out = {"count": np.array(self.count), "maxDrift": np.array(self.maxDrift)}
        for k in self.sums:
            out[f"sum_{k}"] = self.sums[k]
            out[f"comp_{k}"] = self.comp[k]
        return out

    def load(self, data):
        self.count = int(data["count"])
        self.maxDrift = float(data["maxDrift"])
        for k in self.sums:
            self.sums[k] = np.array(data[f"sum_{k}"])
            self.comp[k] = np.array(data[f"comp_{k}"])


# --- checkpoints -----------------------------------------------------------


def parameter_hash(params: ModelParams, spec: SuperpositionSpec, run: RunSettings, masterSeed: int,
                   zero_variance: bool = False) -> str:
    """Digest of everything that determines the per-trajectory records."""
    payload = {
        "params": dataclasses.asdict(params),
        "spec": {"kind": spec.kind.value, "level": spec.level,
                 "coefficients": [repr(complex(c)) for c in spec.coefficients]},
        "run": {k: v for k, v in dataclasses.asdict(run).items() if k != "chunkSteps"},
        "masterSeed": int(masterSeed),
        "zeroVariance": bool(zero_variance),
        "version": CHECKPOINT_VERSION,
    }
    blob = json.dumps(payload, sort_keys=True, default=repr).encode()
    return hashlib.sha256(blob).hexdigest()


def checkpoint_write(path, digest: str, acc: _Accumulator):
    """Atomically persist the folded prefix of trajectories ``0 .. count-1``."""
    tmp = f"{path}.tmp.npz"
    np.savez(tmp, version=np.array(CHECKPOINT_VERSION), digest=np.array(digest), **acc.state())
    os.replace(tmp, path)


def checkpoint_resume(path, digest: str, acc: _Accumulator) -> int:
    """Load partial sums into ``acc``; returns the number of completed trajectories.

    A missing or empty file is a clean start.  A file written for different
    parameters, or by another format version, is refused.
    """
    if path is None or not os.path.exists(path) or os.path.getsize(path) == 0:
        return 0
    try:
        with np.load(path, allow_pickle=False) as data:
            if int(data["version"]) != CHECKPOINT_VERSION:
                raise InvalidInputError(f"checkpoint {path} has unsupported version {int(data['version'])}")
            if str(data["digest"]) != digest:
                raise InvalidInputError(f"checkpoint {path} was written for different run parameters")
            acc.load(data)
    except InvalidInputError:
        raise
    except Exception as exc:
        raise InvalidInputError(f"checkpoint {path} is unreadable: {exc}") from exc
    return acc.count


# --- workers ---------------------------------------------------------------

_WORKER_PREP = None


def _init_worker(prep):
    global _WORKER_PREP
    _WORKER_PREP = prep


def _run_chunk(args):
    indices, run, masterSeed, zero_variance = args
    return _simulate(_WORKER_PREP, indices, run, masterSeed, zero_variance)


def _simulate(prep: Preparation, indices, run: RunSettings, masterSeed: int, zero_variance: bool):
    out = []
    for i in indices:
        try:
            ic = sample_initial_condition(prep.modes, masterSeed, i, zero_variance=zero_variance)
            rec = propagate_trajectory(ic, prep.gamma, prep.params, run)
        except SSHError as exc:
            raise TrajectoryError(i, exc) from exc
        drift = float(np.max(np.abs(rec.totalEnergy - rec.totalEnergy[0])))
        out.append((i, rec.polarization, rec.levelPopulations, drift))
    return out


def _chunks(start: int, stop: int, size: int):
    return [list(range(a, min(a + size, stop))) for a in range(start, stop, size)]


def run_ensemble(
    spec: SuperpositionSpec,
    params: ModelParams,
    run: RunSettings,
    trajectoryCount: int,
    masterSeed: int,
    workers: int = 1,
    checkpoint=None,
    preparation: Preparation | None = None,
    zero_variance: bool = False,
    chunk_size: int = 8,
    progress=None,
) -> EnsembleResult:
    """Average ``trajectoryCount`` trajectories sampled from the Wigner distribution.

    ``checkpoint`` names a file that receives the folded sums after every
    chunk and is resumed from when it exists.  ``progress(done, total)`` is
    called after each fold; an exception it raises stops the run with the
    checkpoint already on disk.
    """
    if trajectoryCount < 1:
        raise InvalidInputError("trajectoryCount must be at least 1")
    if workers < 1:
        raise InvalidInputError("workers must be at least 1")
    prep = preparation if preparation is not None else prepare(spec, params)
    nrec = run.nRecords
    nlev = len(run.watchedLevels)
    acc = _Accumulator({"pol": nrec, "pol2": nrec, "pops": (nrec, nlev)})
    digest = parameter_hash(params, spec, run, masterSeed, zero_variance)
    start = checkpoint_resume(checkpoint, digest, acc)
    if start > trajectoryCount:
        raise InvalidInputError(
            f"checkpoint already holds {start} trajectories, more than the {trajectoryCount} requested"
        )
    if start:
        log.info("resuming from %s with %d trajectories done", checkpoint, start)

    pending = {}

    def fold(chunk_result):
        for i, pol, pops, drift in chunk_result:
            pending[i] = (pol, pops, drift)
        while acc.count in pending:
            pol, pops, drift = pending.pop(acc.count)
            acc.add(pol=pol, pol2=pol * pol, pops=pops)
            acc.maxDrift = max(acc.maxDrift, drift)
        if checkpoint is not None:
            checkpoint_write(checkpoint, digest, acc)
        if progress is not None:
            progress(acc.count, trajectoryCount)

    tasks = [(c, run, masterSeed, zero_variance) for c in _chunks(start, trajectoryCount, chunk_size)]
    if workers == 1 or len(tasks) <= 1:
        _init_worker(prep)
        for task in tasks:
            fold(_run_chunk(task))
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(prep,)) as pool:
            for res in pool.map(_run_chunk, tasks):
                fold(res)

    return _result(acc, run, masterSeed)


def _result(acc: _Accumulator, run: RunSettings, masterSeed: int) -> EnsembleResult:
    m = acc.count
    mean = acc.total("pol") / m
    if m > 1:
        var = np.maximum(acc.total("pol2") / m - mean**2, 0.0) * m / (m - 1)
        stderr = np.sqrt(var / m)
    else:
        stderr = np.zeros_like(mean)
    return EnsembleResult(
        times=run.times(),
        meanPolarization=mean,
        stderrPolarization=stderr,
        meanPopulations=acc.total("pops") / m,
        trajectoriesCompleted=m,
        masterSeed=int(masterSeed),
        watchedLevels=tuple(run.watchedLevels),
        maxEnergyDrift=acc.maxDrift,
    )


# --- decoherence metrics ---------------------------------------------------

LATE_FRACTION = 0.2  # tail of the run used to estimate the noise floor
NOISE_FACTOR = 3.0


@dataclass
class DecoherenceMetrics:
    decoherenceTime: float  # fs
    recurrencePeriods: list  # fs
    envelopeSeries: np.ndarray  # e*A, on the result time grid
    decohered: bool = True
    threshold: float = 0.0
    noiseFloor: float = 0.0
    recurrenceTimes: list = field(default_factory=list)


def _refined_peaks(t, a):
    """Local maxima of ``a`` refined from the three samples around each one.

    The samples are fitted by a local sinusoid ``A cos(w (t - tp))``, which is
    exact for an undamped oscillation however coarsely it is sampled.  Where
    that fit is ill-conditioned (slow, flat or noisy tops) a parabola is used.
    """
    from scipy.signal import find_peaks

    idx, _ = find_peaks(a)
    if idx.size == 0:
        return np.empty(0), np.empty(0)
    dt = t[1] - t[0]
    l, c, r = a[idx - 1], a[idx], a[idx + 1]
    den = l - 2.0 * c + r
    with np.errstate(divide="ignore", invalid="ignore"):
        off = np.where(den < 0, 0.5 * (l - r) / den, 0.0)
        height = c - 0.25 * (l - r) * off
        times = t[idx] + off * dt
        q = (l + r) / (2.0 * c)
        # below ~30 samples per period the parabola is already accurate
        ok = (c > 0) & (q > 0.0) & (q < np.cos(0.2))
        wh = np.arccos(np.where(ok, q, 0.5))
        s = -(r - l) / (2.0 * np.sin(wh))
        amp = np.hypot(c, s)
        ok &= amp < 1.5 * c
        phase = np.arctan2(s, c)
    times = np.where(ok, t[idx] - phase / wh * dt, times)
    height = np.where(ok, amp, height)
    return times, height


def envelope(times, series) -> np.ndarray:
    """Linear interpolation through the local maxima of ``|series|``.

    The first sample is always a node so the envelope starts at the prepared
    amplitude; past the last maximum it holds that value.
    """
    t = np.asarray(times, dtype=float)
    a = np.abs(np.asarray(series, dtype=float))
    pt, ph = _refined_peaks(t, a)
    nodes_t = np.concatenate(([t[0]], pt))
    nodes_h = np.concatenate(([a[0]], ph))
    return np.interp(t, nodes_t, nodes_h)


def noise_floor(stderr) -> float:
    s = np.asarray(stderr, dtype=float)
    tail = s[int(len(s) * (1.0 - LATE_FRACTION)) :]
    return NOISE_FACTOR * float(np.median(tail)) if tail.size else 0.0


def extract_metrics(result: EnsembleResult) -> DecoherenceMetrics:
    """Decoherence time and recurrence spacing of the averaged polarization.

    The decoherence time is the earliest time after which the envelope stays
    below ``1/e`` of its initial maximum.  Recurrences are local maxima of the
    envelope that rise at least one noise floor above both neighbouring
    valleys and above zero; their spacings are measured from ``t = 0``.
    """
    from scipy.signal import find_peaks

    t = np.asarray(result.times, dtype=float)
    if t.size < 3:
        raise InvalidInputError("metrics need at least three recorded times")
    a = np.abs(np.asarray(result.meanPolarization, dtype=float))
    pt, ph = _refined_peaks(t, a)
    env = np.interp(t, np.concatenate(([t[0]], pt)), np.concatenate(([a[0]], ph)))

    # initial maximum: the prepared amplitude or the first fast peak after it
    start = max(a[0], ph[0]) if ph.size else a[0]
    threshold = start / np.e
    above = np.flatnonzero(env >= threshold)
    if above.size == 0:
        tdec, decohered = float(t[0]), True
    elif above[-1] == t.size - 1:
        tdec, decohered = float(t[-1]), False
    else:
        k = above[-1]
        # linear crossing between the last sample above and the first below
        e0, e1 = env[k], env[k + 1]
        frac = (e0 - threshold) / (e0 - e1) if e0 != e1 else 0.0
        tdec, decohered = float(t[k] + frac * (t[k + 1] - t[k])), True

    floor = noise_floor(result.stderrPolarization)
    rec_times = []
    if ph.size >= 3:
        idx, _ = find_peaks(ph, height=floor, prominence=max(floor, np.finfo(float).tiny))
        rec_times = [float(pt[i]) for i in idx]
    spacings = np.diff(np.concatenate(([t[0]], rec_times))).tolist() if rec_times else []
    return DecoherenceMetrics(
        decoherenceTime=tdec,
        recurrencePeriods=spacings,
        envelopeSeries=env,
        decohered=decohered,
        threshold=float(threshold),
        noiseFloor=floor,
        recurrenceTimes=rec_times,
    )
