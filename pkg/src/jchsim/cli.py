"""Command-line entry point: ``jchsim <command> [options]``.

Commands and their CSV schemas:

``spectrum``      delta_khz, e_minus_khz, e_plus_khz
``evolve``        time_us, then for each site i and observable o in
                  (p_e, p_ntot_ge1, p_ntot_ge2, p_nph_ge1, mean_ntot) a column
                  ``o_ion<i>``; ensemble runs add ``o_ion<i>_stderr`` after it
``leakage``       time_us, leakage, leakage_stderr (window mean on stdout)
``sweep``         delta2_khz, e_minus2_khz, e_plus2_khz, gap1_khz, gap2_khz,
                  mean_leakage, stderr
``compare``       quantity, value, stderr
``hopping-rate``  site_i, site_j, distance_um, k_formula_khz, k_configured_khz,
                  relative_difference

Every CSV gets a ``<name>.manifest.json`` beside it holding the resolved
configuration; passing that manifest back as ``--config`` reproduces the CSV.

Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 I/O failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import blockade_comparison, detuning_sweep, leakage
from .config import ConfigError, RunConfig, load_config
from .csvio import (COMPARE_SCHEMA, HOPPING_SCHEMA, LEAKAGE_SCHEMA, SPECTRUM_SCHEMA, SWEEP_SCHEMA,
                    write_csv, write_manifest)
from .dynamics import OBSERVABLES, NumericalError, run_sequence
from .model import hopping_rate
from .noise import NoiseModel, ensemble_run
from .spectrum import spectrum_curve

log = logging.getLogger("jchsim")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3

COMMANDS = ("spectrum", "evolve", "leakage", "sweep", "compare", "hopping-rate")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jchsim", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", metavar="PATH", help="YAML configuration or run manifest")
    parser.add_argument("--out", metavar="PATH", help="output CSV (default: <command>.csv)")
    parser.add_argument("--seed", type=int, help="Monte Carlo seed")
    parser.add_argument("--shots", type=int, help="Monte Carlo shots")
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                        help="parallel worker processes for ensembles")
    parser.add_argument("--noiseless", action="store_true", help="disable the noise ensemble")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    try:
        cfg = load_config(args.config)
    except OSError as err:
        raise ConfigError(f"cannot read config {args.config}: {err}") from None
    noise = {}
    if args.seed is not None:
        noise["seed"] = args.seed
    if args.shots is not None:
        noise["shots"] = args.shots
    if args.noiseless:
        noise["enabled"] = False
    if noise:
        cfg = cfg.with_overrides(noise=noise)
    if args.out is not None:
        cfg = cfg.with_overrides(output=args.out)
    return cfg


def evolve_schema(n_sites: int, ensemble: bool) -> list[str]:
    cols = ["time_us"]
    for i in range(1, n_sites + 1):
        for name in OBSERVABLES:
            cols.append(f"{name}_ion{i}")
            if ensemble:
                cols.append(f"{name}_ion{i}_stderr")
    return cols


def cmd_spectrum(cfg: RunConfig, workers: int):
    s = cfg.spectrum
    deltas = np.arange(s.delta_start_khz, s.delta_stop_khz + s.delta_step_khz / 2, s.delta_step_khz)
    return SPECTRUM_SCHEMA, spectrum_curve(deltas, s.g_khz, s.p).tolist(), {}


def cmd_evolve(cfg: RunConfig, workers: int):
    space, params = cfg.space(), cfg.params()
    seq, init, noise = cfg.pulse_sequence(), cfg.init_spec(), cfg.noise_model()
    if noise is None:
        traj = run_sequence(seq, init, params, space)
    else:
        traj = ensemble_run(seq, init, params, space, noise, workers=workers, keep_samples=False)
    ensemble = traj.stderr is not None
    columns = [traj.times_us]
    for pos in range(space.n_sites):
        for name in OBSERVABLES:
            columns.append(traj.observables[name][:, pos])
            if ensemble:
                columns.append(traj.stderr[name][:, pos])
    rows = np.column_stack(columns).tolist()
    return evolve_schema(space.n_sites, ensemble), rows, {"shots": traj.shots}


def cmd_leakage(cfg: RunConfig, workers: int):
    a = cfg.analysis
    res = leakage(cfg.params(), cfg.init_spec(), cfg.noise_model(), a.window_us, a.site, a.kind,
                  cfg.space(), workers)
    err = res.series_stderr if res.series_stderr is not None else np.zeros_like(res.series)
    rows = np.column_stack([res.times_us, res.series, err]).tolist()
    stderr = res.stderr or 0.0
    print(f"mean leakage P(N_{a.kind},{a.site} >= 1) over {a.window_us}: {res.mean_leakage:.4f} +- {stderr:.4f}")
    return LEAKAGE_SCHEMA, rows, {"mean_leakage": res.mean_leakage, "stderr": stderr}


def cmd_sweep(cfg: RunConfig, workers: int):
    a = cfg.analysis
    rows = detuning_sweep(a.delta2_list_khz, cfg.init_spec(), cfg.params(), cfg.noise_model(),
                          a.window_us, cfg.space(), workers, a.reference_branch, a.site)
    for r in rows:
        print(f"delta2 {r.delta2_khz:8.1f} kHz  leakage {r.mean_leakage:.4f} +- {r.stderr:.4f}")
    return SWEEP_SCHEMA, [r.as_tuple() for r in rows], {}


def cmd_compare(cfg: RunConfig, workers: int):
    noise = cfg.noise_model() or NoiseModel.noiseless(seed=cfg.noise.seed)
    report = blockade_comparison(cfg.params(), noise, cfg.analysis.window_us, cfg.space(), workers)
    print(f"polariton leakage {report.polariton_noiseless:.4f}, phonon leakage "
          f"{report.phonon_noiseless:.4f} (noiseless), ratio {report.ratio:.2f}")
    return COMPARE_SCHEMA, report.rows(), {"ratio_noiseless": report.ratio}


def cmd_hopping_rate(cfg: RunConfig, workers: int):
    geo = cfg.geometry()
    if geo.n_sites != cfg.model.n_sites:
        raise ConfigError(f"model.geometry.positions_um lists {geo.n_sites} ions, "
                          f"model.n_sites is {cfg.model.n_sites}")
    d = geo.distances_um()
    configured = cfg.hopping_matrix()
    rows = []
    for i in range(geo.n_sites):
        for j in range(i + 1, geo.n_sites):
            k_formula = hopping_rate(d[i, j], geo.nu_khz, geo.mass_amu)
            k_conf = configured[i, j]
            rel = (k_conf - k_formula) / k_formula
            rows.append((i + 1, j + 1, d[i, j], k_formula, k_conf, rel))
            print(f"ions {i + 1}-{j + 1}: d = {d[i, j]:.3g} um, Coulomb formula k = {k_formula:.3f} kHz, "
                  f"configured k = {k_conf:.3f} kHz")
            if abs(rel) > 1e-9:
                print(f"  note: configured hopping rate differs from the formula value by {100 * rel:+.1f}%; "
                      f"set model.hopping_source: geometry to simulate with the formula value")
    return HOPPING_SCHEMA, rows, {}


HANDLERS = {
    "spectrum": cmd_spectrum,
    "evolve": cmd_evolve,
    "leakage": cmd_leakage,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "hopping-rate": cmd_hopping_rate,
}


def run_command(command: str, cfg: RunConfig, workers: int = 1, out: str | Path | None = None) -> Path:
    """Run one command and write its CSV plus manifest; returns the CSV path."""
    schema, rows, results = HANDLERS[command](cfg, max(1, int(workers)))
    path = Path(out or cfg.output or f"{command}.csv")
    write_csv(path, rows, schema)
    write_manifest(path, command, cfg.model_dump(mode="json"), __version__, results)
    return path


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        path = run_command(args.command, cfg, args.workers)
    except (NumericalError, np.linalg.LinAlgError, ArithmeticError) as err:
        print(f"jchsim: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as err:
        print(f"jchsim: I/O failure: {err}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError, IndexError) as err:
        print(f"jchsim: configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
