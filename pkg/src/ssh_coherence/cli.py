"""Command-line entry points and CSV serialization.

Subcommands::

    relax         relax a chain and export u0 and the gap
    modes         normal-mode frequency table and zero-point energy
    sample-check  validate Wigner sample moments against their targets
    run           full ensemble; writes the polarization/population CSV
    metrics       decoherence metrics of a CSV written by ``run``

Exit codes: 0 success, 2 configuration, 3 convergence, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import csv
import logging
import os
import sys
import time
import traceback

import numpy as np

from . import config as cfgmod
from .ensemble import EnsembleResult, extract_metrics, prepare, run_ensemble
from .errors import ConfigError, SSHError
from .phonons import analyze
from .relax import excited_occupation, ground_state_occupation, optimize_geometry
from .wigner import harmonic_energy, mode_widths, sample_ensemble, write_samples_csv

log = logging.getLogger("ssh_coherence")

RUN_COLUMNS = ("time_fs", "mean_polarization_eA", "stderr_eA")
MODE_COLUMNS = ("j", "omega_fs_inv", "omega_eV", "participation")


# --- CSV -------------------------------------------------------------------


def write_result_csv(path, result: EnsembleResult):
    header = list(RUN_COLUMNS) + [f"pop_{lv}" for lv in result.watchedLevels]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for r, t in enumerate(result.times):
            row = [t, result.meanPolarization[r], result.stderrPolarization[r]]
            row += list(result.meanPopulations[r])
            out.writerow([repr(float(x)) for x in row])


def read_result_csv(path) -> EnsembleResult:
    """Inverse of :func:`write_result_csv`; stderr defaults to zero if absent."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(str(path), "empty CSV")
    header = [h.strip() for h in rows[0]]
    for col in RUN_COLUMNS[:2]:
        if col not in header:
            raise ConfigError(str(path), f"missing column {col}")
    try:
        data = np.array([[float(x) for x in row] for row in rows[1:] if row], dtype=float)
    except ValueError as exc:
        raise ConfigError(str(path), f"non-numeric entry: {exc}") from None
    if data.ndim != 2 or data.shape[0] == 0:
        raise ConfigError(str(path), "no data rows")
    col = {h: data[:, k] for k, h in enumerate(header)}
    levels = tuple(int(h[4:]) for h in header if h.startswith("pop_"))
    pops = np.column_stack([col[f"pop_{lv}"] for lv in levels]) if levels else np.zeros((len(data), 0))
    return EnsembleResult(
        times=col["time_fs"],
        meanPolarization=col["mean_polarization_eA"],
        stderrPolarization=col.get("stderr_eA", np.zeros(len(data))),
        meanPopulations=pops,
        trajectoriesCompleted=0,
        masterSeed=0,
        watchedLevels=levels,
    )


PLOT_SCRIPT = '''"""Plot a polarization/population CSV written by `ssh-coherence run`."""
import sys

import matplotlib.pyplot as plt
import numpy as np

path = sys.argv[1] if len(sys.argv) > 1 else {csv!r}
d = np.genfromtxt(path, delimiter=",", names=True)
pops = [n for n in d.dtype.names if n.startswith("pop_")]
fig, axes = plt.subplots(2 if pops else 1, 1, sharex=True, figsize=(7, 6), squeeze=False)
ax = axes[0, 0]
ax.plot(d["time_fs"], d["mean_polarization_eA"], lw=0.6)
ax.fill_between(d["time_fs"], d["mean_polarization_eA"] - d["stderr_eA"],
                d["mean_polarization_eA"] + d["stderr_eA"], alpha=0.3)
ax.set_ylabel("<mu(t)> (e A)")
if pops:
    for name in pops:
        axes[1, 0].plot(d["time_fs"], d[name], label=name.replace("pop_", "level "))
    axes[1, 0].set_ylabel("population")
    axes[1, 0].legend()
axes[-1, 0].set_xlabel("t (fs)")
fig.tight_layout()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
'''


def emit_plot_script(csv_path) -> str:
    stem = os.path.splitext(csv_path)[0]
    path = stem + "_plot.py"
    with open(path, "w") as fh:
        fh.write(PLOT_SCRIPT.format(csv=os.path.basename(csv_path)))
    return path


def _write_config_beside(cfg, output):
    path = os.path.splitext(output)[0] + ".ini"
    with open(path, "w") as fh:
        fh.write(cfgmod.serialize_config(cfg))
    return path


# --- subcommands -----------------------------------------------------------


def _occupation(cfg, level):
    if level is None:
        return ground_state_occupation(cfg.params)
    return excited_occupation(level, cfg.params)


def cmd_relax(cfg, args):
    relaxed = optimize_geometry(_occupation(cfg, args.excite), cfg.params, maxIter=args.max_iter)
    print(f"N = {cfg.nSites}  sweeps = {relaxed.iterations}  residual = {relaxed.residual:.2e} A")
    print(f"gap = {relaxed.gap:.6f} eV  energy = {relaxed.electronicEnergy:.8f} eV")
    if args.output:
        with open(args.output, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["site", "u0_A"])
            for n, u in enumerate(relaxed.u0, start=1):
                out.writerow([n, repr(float(u))])
    else:
        print("u0 (A):", np.array2string(relaxed.u0, precision=5, max_line_width=100))
    return 0


def cmd_modes(cfg, args):
    relaxed = optimize_geometry(_occupation(cfg, args.excite), cfg.params, maxIter=args.max_iter)
    modes = analyze(relaxed, cfg.params)
    part = modes.participation()
    rows = [(j + 1, w, modes.hbar * w, part[j]) for j, w in enumerate(modes.frequencies)]
    print(f"zero-point energy = {modes.zeroPointEnergy:.8f} eV over {modes.count} modes")
    if args.output:
        with open(args.output, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(MODE_COLUMNS)
            for row in rows:
                out.writerow([row[0]] + [repr(float(x)) for x in row[1:]])
        with open(os.path.splitext(args.output)[0] + "_zpe.txt", "w") as fh:
            fh.write(f"zeroPointEnergy_eV = {modes.zeroPointEnergy!r}\n")
    else:
        for j, w, e, p in rows:
            print(f"{j:4d}  {w:.6e} fs^-1  {e:.6f} eV  participation {p:.2f}")
    return 0


def cmd_sample_check(cfg, args):
    relaxed = optimize_geometry(cfg.superposition().nuclear_occupation(cfg.params), cfg.params)
    modes = analyze(relaxed, cfg.params)
    u, p, Q, P = sample_ensemble(modes, cfg.masterSeed, args.samples)
    sq, sp = mode_widths(modes)
    energy = float(np.mean(harmonic_energy(u, p, modes)))
    rel = abs(energy / modes.zeroPointEnergy - 1.0)
    # sampling error of a variance estimate is sqrt(2/M) relative
    vtol = args.sigmas * np.sqrt(2.0 / args.samples)
    qdev = np.max(np.abs(np.var(Q, axis=0) / sq**2 - 1.0))
    pdev = np.max(np.abs(np.var(P, axis=0) / sp**2 - 1.0))
    checks = [
        ("mean energy vs ZPE", rel, args.energy_tol),
        ("max relative var(Q_j) error", qdev, vtol),
        ("max relative var(P_j) error", pdev, vtol),
    ]
    print(f"{args.samples} samples, ZPE = {modes.zeroPointEnergy:.6f} eV, mean energy = {energy:.6f} eV")
    ok = True
    for name, value, tol in checks:
        good = value <= tol
        ok &= good
        print(f"{'PASS' if good else 'FAIL'}  {name}: {value:.3e} (tolerance {tol:.3e})")
    if args.output:
        write_samples_csv(args.output, modes, cfg.masterSeed, args.samples)
    return 0 if ok else 1


def cmd_run(cfg, args):
    out = cfg.outputPath
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    prep = prepare(cfg.superposition(), cfg.params)
    run = cfg.run_settings()
    started = time.perf_counter()

    def progress(done, total):
        log.info("%d/%d trajectories", done, total)

    result = run_ensemble(
        cfg.superposition(),
        cfg.params,
        run,
        cfg.trajectoryCount,
        cfg.masterSeed,
        workers=cfg.workers,
        checkpoint=cfg.checkpoint or None,
        preparation=prep,
        progress=progress,
    )
    write_result_csv(out, result)
    ini = _write_config_beside(dataclasses.replace(cfg, watchedLevels=cfg.levels()), out)
    print(f"wrote {out} ({result.trajectoriesCompleted} trajectories, "
          f"{time.perf_counter() - started:.1f} s); config in {ini}")
    if args.emit_plot_script:
        print(f"plot script: {emit_plot_script(out)}")
    _print_metrics(extract_metrics(result))
    return 0


def _print_metrics(m):
    state = "decohered" if m.decohered else "not decohered"
    print(f"decoherence time = {m.decoherenceTime:.2f} fs ({state}; threshold {m.threshold:.4f} e A)")
    periods = ", ".join(f"{p:.1f}" for p in m.recurrencePeriods) or "none"
    print(f"recurrence periods (fs) = {periods}  [noise floor {m.noiseFloor:.4f} e A]")


def cmd_metrics(cfg, args):
    result = read_result_csv(args.csv)
    m = extract_metrics(result)
    _print_metrics(m)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["time_fs", "envelope_eA"])
            for t, e in zip(result.times, m.envelopeSeries):
                out.writerow([repr(float(t)), repr(float(e))])
    return 0


# --- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="INI file with [model], [superposition] and [run] sections")
    common.add_argument("-s", "--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration key (repeatable), e.g. -s nSites=50")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="ssh-coherence", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("relax", parents=[common], help="relax a chain")
    p.add_argument("--excite", type=int, metavar="I",
                   help="promote a spin-up HOMO electron to level I before relaxing")
    p.add_argument("-o", "--output", help="CSV file for u0")
    p.add_argument("--max-iter", type=int, default=5000, help="relaxation sweep cap")
    p.set_defaults(func=cmd_relax)

    p = sub.add_parser("modes", parents=[common], help="normal modes and zero-point energy")
    p.add_argument("--excite", type=int, metavar="I")
    p.add_argument("-o", "--output", help="CSV file for the frequency table")
    p.add_argument("--max-iter", type=int, default=5000, help="relaxation sweep cap")
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("sample-check", parents=[common], help="validate Wigner sampling")
    p.add_argument("-n", "--samples", type=int, default=10000)
    p.add_argument("--energy-tol", type=float, default=0.02)
    p.add_argument("--sigmas", type=float, default=4.0,
                   help="variance tolerance in sampling standard deviations")
    p.add_argument("-o", "--output", help="CSV file for the samples")
    p.set_defaults(func=cmd_sample_check)

    p = sub.add_parser("run", parents=[common], help="run an ensemble")
    p.add_argument("-o", "--output", help="result CSV (overrides run.outputPath)")
    p.add_argument("--emit-plot-script", action="store_true",
                   help="write a matplotlib script next to the CSV")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("metrics", parents=[common], help="decoherence metrics of a result CSV")
    p.add_argument("csv")
    p.add_argument("-o", "--output", help="CSV file for the envelope")
    p.set_defaults(func=cmd_metrics)
    return ap


def _provenance(exc) -> str:
    """Name of the innermost package module the exception passed through."""
    mod = "cli"
    for frame in traceback.extract_tb(exc.__traceback__):
        name = os.path.splitext(os.path.basename(frame.filename))[0]
        if os.path.dirname(frame.filename) == os.path.dirname(__file__):
            mod = name
    return mod.lstrip("_")


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = list(args.set)
        if args.command == "run" and args.output:
            overrides.append(f"outputPath={args.output}")
        cfg = cfgmod.parse_config(path=args.config, overrides=overrides)
        return args.func(cfg, args)
    except SSHError as exc:
        print(f"error [{_provenance(exc)}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
