"""Command-line front end.

Subcommands cover the full workflow: breed a cat state from two heralded
photons, sweep the rate/fidelity trade-off over storage depth, export
Wigner grids at selectable correction stages, run the pulse-level timeline
simulation, generate synthetic homodyne datasets, and reconstruct states
from datasets with optional bootstrap error bars.

Every run writes its outputs plus a manifest.json into one output
directory; outputs are written atomically (temp file + rename) and are
deterministic given the manifest. Exit codes: 0 success, 2 input or
configuration error, 3 numerical or convergence failure, 4 unexpected
internal error.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (CatbreedError, ConfigError, ConvergenceError,
                     DomainError, HeraldImpossibleError, TruncationError)
from .fock import (DensityOperator, FockCutoff, TargetCatSpec, fidelity_to_pure,
                   fock_state, pad_density_operator, target_cat, wigner_grid)
from .optics import AcceptanceWindow, breed, loss_channel, single_photon_state
from .protocol import (ProtocolConfig, calibrate_beta_elec,
                       fidelity_vs_storage_curve, generation_rate,
                       pipeline_states, simulate_timeline, write_curve_csv,
                       write_event_log)
from .tomography import (bootstrap_many, load_dataset_csv, maxlik_reconstruct,
                         read_density_csv, sample_homodyne_phases,
                         save_dataset_csv, uniform_phases, write_density_csv,
                         write_meta)

OUTPUT_ROOT_ENV = "CATBREED_OUTPUT_ROOT"
DEFAULT_GRID = "-4:4:161"
CORRECTION_STAGES = ("none", "storage", "detection", "both")

# ProtocolConfig fields exposed as config-file keys and CLI flags; the
# acceptance window is flattened to (epsilon, window_phase).
_CONFIG_FIELDS = {
    "f_rep": float,
    "f_herald": float,
    "beta_elec": float,
    "epsilon": float,
    "window_phase": float,
    "n_min": int,
    "n_max": int,
    "per_trip_transmission": float,
    "readout_trips": int,
    "eta_homodyne": float,
    "photon_fidelity": float,
    "two_photon_weight": float,
    "condition_with_detector_efficiency": bool,
    "cutoff": int,
    "rng_seed": int,
}


def _read_config_file(path: str) -> dict:
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if not parser.has_section("protocol"):
        raise ConfigError(f"{path}: missing [protocol] section")
    out = {}
    for key, raw in parser.items("protocol"):
        if key not in _CONFIG_FIELDS:
            raise ConfigError(f"{path}: unknown key {key!r} in [protocol]")
        kind = _CONFIG_FIELDS[key]
        try:
            if kind is bool:
                out[key] = parser.getboolean("protocol", key)
            else:
                out[key] = kind(raw)
        except ValueError as exc:
            raise ConfigError(
                f"{path}: key {key!r}: cannot parse {raw!r} as "
                f"{kind.__name__}") from exc
    return out


def _resolve_settings(args) -> dict:
    """Defaults <- config file <- command-line flags, last one wins."""
    base = ProtocolConfig()
    settings = {
        "f_rep": base.f_rep,
        "f_herald": base.f_herald,
        "beta_elec": base.beta_elec,
        "epsilon": base.window.half_width,
        "window_phase": base.window.phase,
        "n_min": base.n_min,
        "n_max": base.n_max,
        "per_trip_transmission": base.per_trip_transmission,
        "readout_trips": base.readout_trips,
        "eta_homodyne": base.eta_homodyne,
        "photon_fidelity": base.photon_fidelity,
        "two_photon_weight": base.two_photon_weight,
        "condition_with_detector_efficiency": base.condition_with_detector_efficiency,
        "cutoff": base.cutoff.n_max,
        "rng_seed": base.rng_seed,
    }
    if getattr(args, "config", None):
        settings.update(_read_config_file(args.config))
    for key in _CONFIG_FIELDS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def _build_config(settings: dict) -> ProtocolConfig:
    return ProtocolConfig(
        f_rep=settings["f_rep"],
        f_herald=settings["f_herald"],
        beta_elec=settings["beta_elec"],
        window=AcceptanceWindow(settings["epsilon"], settings["window_phase"]),
        n_min=settings["n_min"],
        n_max=settings["n_max"],
        per_trip_transmission=settings["per_trip_transmission"],
        readout_trips=settings["readout_trips"],
        eta_homodyne=settings["eta_homodyne"],
        photon_fidelity=settings["photon_fidelity"],
        two_photon_weight=settings["two_photon_weight"],
        condition_with_detector_efficiency=settings["condition_with_detector_efficiency"],
        cutoff=FockCutoff(settings["cutoff"]),
        rng_seed=settings["rng_seed"],
    )


def _output_dir(args) -> Path:
    if getattr(args, "output_dir", None):
        root = Path(args.output_dir)
    else:
        root = Path(os.environ.get(OUTPUT_ROOT_ENV, "catbreed-out")) / args.command
    root.mkdir(parents=True, exist_ok=True)
    return root


def _atomic_write(directory: Path, name: str, writer) -> Path:
    """Write via `writer(tmp_path)` then rename into place."""
    final = directory / name
    tmp = directory / (name + ".tmp")
    writer(tmp)
    os.replace(tmp, final)
    return final


def _write_manifest(directory: Path, command: str, argv, settings: dict,
                    outputs: list, started: float) -> None:
    manifest = {
        "command": command,
        "argv": list(argv),
        "config": dict(sorted(settings.items())),
        "seed": settings["rng_seed"],
        "outputs": sorted(outputs),
        "timestamps": {"started": started, "finished": time.time()},
        "version": __version__,
    }
    text = json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n"
    _atomic_write(directory, "manifest.json",
                  lambda p: Path(p).write_text(text))


def _parse_grid(spec: str):
    parts = spec.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid must be min:max:points, got {spec!r}")
    try:
        lo, hi, num = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"grid must be min:max:points, got {spec!r}") from exc
    if not (lo < hi and num >= 2):
        raise ConfigError(f"grid needs min < max and points >= 2, got {spec!r}")
    return np.linspace(lo, hi, num)


def _parse_phase_spec(spec: str) -> np.ndarray:
    """Either a phase count ('12') or explicit radians ('0,0.26,...')."""
    if "," not in spec:
        try:
            return uniform_phases(int(spec))
        except ValueError:
            pass
    try:
        return np.array([float(tok) for tok in spec.split(",") if tok.strip()])
    except ValueError as exc:
        raise ConfigError(f"cannot parse phases {spec!r}") from exc


def _stage_state(config: ProtocolConfig, stage: str) -> DensityOperator:
    states = pipeline_states(config)
    if stage == "both":
        return states.creation
    if stage == "detection":
        return states.stored
    if stage == "storage":
        return loss_channel(states.creation, config.eta_homodyne)
    return states.measured


# ---------------------------------------------------------------------------
# subcommands

def cmd_breed(args, argv) -> int:
    started = time.time()
    settings = _resolve_settings(args)
    config = _build_config(settings)
    out = _output_dir(args)

    photon = single_photon_state(config.photon_fidelity,
                                 config.two_photon_weight, config.cutoff)
    outcome = breed(photon, photon, config.window,
                    config.conditioning_efficiency)
    target = target_cat(TargetCatSpec(), config.cutoff)
    fid = fidelity_to_pure(outcome.state, target)
    axis = _parse_grid(args.grid)
    wmin = float(wigner_grid(outcome.state, axis, axis).min())

    outputs = [
        _atomic_write(out, "bred_state.csv",
                      lambda p: write_density_csv(outcome.state, p)).name,
        _atomic_write(out, "bred_state.meta", lambda p: write_meta(p, {
            "herald_probability": f"{outcome.probability:.12g}",
            "fidelity_to_target": f"{fid:.12g}",
            "wigner_min": f"{wmin:.12g}",
        })).name,
    ]
    _write_manifest(out, "breed", argv, settings, outputs, started)
    print(f"herald_probability = {outcome.probability:.6f}")
    print(f"fidelity_to_target = {fid:.6f}")
    print(f"wigner_min = {wmin:.6f}")
    print(f"outputs -> {out}")
    return 0


def cmd_curve(args, argv) -> int:
    started = time.time()
    settings = _resolve_settings(args)
    config = _build_config(settings)
    out = _output_dir(args)

    try:
        values = [int(tok) for tok in args.n_max_values.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(
            f"cannot parse n-max values {args.n_max_values!r}") from exc
    if not values:
        raise ConfigError("need at least one storage-depth value")

    if args.calibrate_rate_hz is not None:
        p_cond = pipeline_states(config).mean_condition_probability
        beta = calibrate_beta_elec(config, args.calibrate_rate_hz, p_cond)
        config = dataclasses.replace(config, beta_elec=beta)
        settings["beta_elec"] = beta
        print(f"calibrated beta_elec = {beta:.6f}")

    rows = fidelity_vs_storage_curve(config, values)
    outputs = [
        _atomic_write(out, "curve.csv",
                      lambda p: write_curve_csv(rows, p)).name,
    ]
    _write_manifest(out, "curve", argv, settings, outputs, started)
    rates = [row.rate_hz for row in rows]
    print(f"rows = {len(rows)}")
    print(f"rate_hz range = [{min(rates):.6g}, {max(rates):.6g}]")
    print(f"outputs -> {out}")
    return 0


def cmd_wigner(args, argv) -> int:
    started = time.time()
    settings = _resolve_settings(args)
    out = _output_dir(args)

    corrections = [tok.strip() for tok in args.corrections.split(",") if tok.strip()]
    if not corrections:
        raise ConfigError("need at least one correction stage")
    for tok in corrections:
        if tok not in CORRECTION_STAGES:
            raise ConfigError(
                f"unknown correction {tok!r}; choose from {CORRECTION_STAGES}")

    if (args.state_file is None) == (not args.pipeline):
        raise ConfigError("choose exactly one of --state-file or --pipeline")
    if args.state_file is not None and corrections != ["none"]:
        raise ConfigError(
            "corrections other than 'none' need --pipeline; a state file "
            "carries no stage information")

    axis = _parse_grid(args.grid)
    outputs = []
    if args.state_file is not None:
        stage_states = {"none": read_density_csv(args.state_file)}
    else:
        config = _build_config(settings)
        stage_states = {tok: _stage_state(config, tok) for tok in corrections}

    for tok in corrections:
        grid = wigner_grid(stage_states[tok], axis, axis)

        def writer(path, grid=grid):
            with open(path, "w") as fh:
                fh.write("x,p,w\n")
                for i, x in enumerate(axis):
                    for j, p in enumerate(axis):
                        fh.write(f"{x:.12g},{p:.12g},{grid[i, j]:.12g}\n")

        outputs.append(_atomic_write(out, f"wigner_{tok}.csv", writer).name)
        print(f"wigner_min[{tok}] = {grid.min():.6f}")
        print(f"wigner_max[{tok}] = {grid.max():.6f}")
    _write_manifest(out, "wigner", argv, settings, outputs, started)
    print(f"outputs -> {out}")
    return 0


def cmd_simulate(args, argv) -> int:
    started = time.time()
    settings = _resolve_settings(args)
    config = _build_config(settings)
    out = _output_dir(args)

    if args.duration_s <= 0:
        raise ConfigError(f"duration must be > 0 s, got {args.duration_s}")

    stats, events = simulate_timeline(config, args.duration_s)
    p_cond = pipeline_states(config).mean_condition_probability
    closed_form = generation_rate(config, p_cond)
    sigma = math.sqrt(max(stats.successes, 1)) / stats.duration_s
    gap_sigmas = abs(stats.estimated_rate_hz - closed_form) / sigma

    payload = {
        "attempts": stats.attempts,
        "successes": stats.successes,
        "duration_s": stats.duration_s,
        "estimated_rate_hz": stats.estimated_rate_hz,
        "closed_form_rate_hz": closed_form,
        "rate_gap_sigmas": gap_sigmas,
        "mean_first_photon_storage": None
        if math.isnan(stats.mean_first_photon_storage)
        else stats.mean_first_photon_storage,
        "storage_histogram": {str(k): v for k, v in
                              sorted(stats.storage_histogram.items())},
        "mean_output_fidelity": None
        if math.isnan(stats.mean_output_fidelity)
        else stats.mean_output_fidelity,
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    outputs = [
        _atomic_write(out, "stats.json",
                      lambda p: Path(p).write_text(text)).name,
        _atomic_write(out, "events.jsonl",
                      lambda p: write_event_log(events, p)).name,
    ]
    _write_manifest(out, "simulate", argv, settings, outputs, started)
    print(f"successes = {stats.successes} in {stats.duration_s:.6g} s")
    print(f"estimated_rate_hz = {stats.estimated_rate_hz:.6g}")
    print(f"closed_form_rate_hz = {closed_form:.6g}")
    print(f"rate_gap_sigmas = {gap_sigmas:.3f}")
    print(f"outputs -> {out}")
    return 0


def cmd_sample(args, argv) -> int:
    started = time.time()
    settings = _resolve_settings(args)
    config = _build_config(settings)
    out = _output_dir(args)

    if args.state_file is not None:
        state = read_density_csv(args.state_file)
        source = str(args.state_file)
    else:
        if args.source not in ("creation", "stored", "measured"):
            raise ConfigError(
                f"unknown source {args.source!r}; choose creation, stored, "
                f"measured, or pass --state-file")
        state = _stage_state(config, {"creation": "both",
                                      "stored": "detection",
                                      "measured": "none"}[args.source])
        source = args.source

    phases = _parse_phase_spec(args.phases)
    rng = np.random.default_rng(config.rng_seed)
    dataset = sample_homodyne_phases(state, phases, args.count, rng,
                                     args.phase_noise_sigma)
    outputs = [
        _atomic_write(out, "dataset.csv",
                      lambda p: save_dataset_csv(dataset, p)).name,
        _atomic_write(out, "dataset.meta", lambda p: write_meta(p, {
            "source": source,
            "count": args.count,
            "phases": ",".join(f"{t:.12g}" for t in phases),
            "phase_noise_sigma": args.phase_noise_sigma,
            "seed": config.rng_seed,
        })).name,
    ]
    _write_manifest(out, "sample", argv, settings, outputs, started)
    print(f"samples = {len(dataset)} at {len(phases)} phases from {source}")
    print(f"outputs -> {out}")
    return 0


def cmd_tomography(args, argv) -> int:
    started = time.time()
    settings = _resolve_settings(args)
    out = _output_dir(args)

    data = load_dataset_csv(args.dataset)
    cutoff = FockCutoff(args.reconstruction_cutoff)
    result = maxlik_reconstruct(
        data, cutoff,
        efficiency_model=args.efficiency_model,
        eta_detection=settings["eta_homodyne"],
        storage_transmission=settings["per_trip_transmission"]
        ** settings["readout_trips"],
        max_iter=args.max_iter,
        tol_per_sample=args.tol,
    )
    rho_hat = result.rho_hat
    target_cutoff = FockCutoff(max(cutoff.n_max, 20))
    target = target_cat(TargetCatSpec(), target_cutoff)
    fid = fidelity_to_pure(pad_density_operator(rho_hat, target_cutoff), target)

    outputs = [
        _atomic_write(out, "rho_hat.csv",
                      lambda p: write_density_csv(rho_hat, p)).name,
        _atomic_write(out, "rho_hat.meta", lambda p: write_meta(p, {
            "iterations": result.iterations,
            "stop_reason": result.stop_reason,
            "final_likelihood_gain": f"{result.final_likelihood_gain:.6g}",
            "log_likelihood": f"{result.likelihood_history[-1]:.12g}",
            "efficiency_model": result.efficiency_model,
            "samples": len(data),
            "fidelity_to_target": f"{fid:.12g}",
        })).name,
    ]
    print(f"iterations = {result.iterations} ({result.stop_reason})")
    print(f"fidelity_to_target = {fid:.6f}")
    pops = ", ".join(f"{p:.4f}" for p in rho_hat.populations()[:5])
    print(f"populations[0:5] = [{pops}]")

    if args.bootstrap > 0:
        axis = _parse_grid(args.grid)

        def stat_fidelity(res):
            padded = pad_density_operator(res.rho_hat, target_cutoff)
            return fidelity_to_pure(padded, target)

        def stat_wigner_min(res):
            return float(wigner_grid(res.rho_hat, axis, axis).min())

        statistics = {"fidelity_to_target": stat_fidelity,
                      "wigner_min": stat_wigner_min}
        for n in range(5):
            statistics[f"population_{n}"] = (
                lambda res, n=n: float(res.rho_hat.populations()[n]))

        rng = np.random.default_rng(settings["rng_seed"])
        results = bootstrap_many(
            data, args.bootstrap, statistics, rng,
            cutoff=cutoff,
            efficiency_model=args.efficiency_model,
            eta_detection=settings["eta_homodyne"],
            storage_transmission=settings["per_trip_transmission"]
            ** settings["readout_trips"],
            max_iter=args.max_iter,
            tol_per_sample=args.tol,
        )
        block = {name: {"mean": r.mean, "std": r.std, "ci_low": r.ci_low,
                        "ci_high": r.ci_high, "n_failed": r.n_failed}
                 for name, r in results.items()}
        text = json.dumps(block, indent=2, sort_keys=True) + "\n"
        outputs.append(_atomic_write(out, "bootstrap.json",
                                     lambda p: Path(p).write_text(text)).name)
        for name in sorted(results):
            r = results[name]
            print(f"bootstrap[{name}]: mean = {r.mean:.4f}, "
                  f"ci = [{r.ci_low:.4f}, {r.ci_high:.4f}]")

    _write_manifest(out, "tomography", argv, settings, outputs, started)
    print(f"outputs -> {out}")
    return 0


# ---------------------------------------------------------------------------
# parser wiring

def _add_config_flags(sub) -> None:
    sub.add_argument("--config", help="INI file with a [protocol] section")
    sub.add_argument("--output-dir", help=f"output directory (default: "
                     f"${OUTPUT_ROOT_ENV}/<command>)")
    sub.add_argument("--f-rep", dest="f_rep", type=float)
    sub.add_argument("--f-herald", dest="f_herald", type=float)
    sub.add_argument("--beta-elec", dest="beta_elec", type=float)
    sub.add_argument("--epsilon", type=float,
                     help="acceptance-window half width")
    sub.add_argument("--window-phase", dest="window_phase", type=float)
    sub.add_argument("--n-min", dest="n_min", type=int)
    sub.add_argument("--n-max", dest="n_max", type=int)
    sub.add_argument("--per-trip-transmission", dest="per_trip_transmission",
                     type=float)
    sub.add_argument("--readout-trips", dest="readout_trips", type=int)
    sub.add_argument("--eta-homodyne", dest="eta_homodyne", type=float)
    sub.add_argument("--photon-fidelity", dest="photon_fidelity", type=float)
    sub.add_argument("--two-photon-weight", dest="two_photon_weight",
                     type=float)
    sub.add_argument("--condition-with-detector-efficiency",
                     dest="condition_with_detector_efficiency",
                     action="store_const", const=True,
                     help="fold detector efficiency into conditioning")
    sub.add_argument("--cutoff", type=int, help="Fock-space cutoff n_max")
    sub.add_argument("--seed", dest="rng_seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="catbreed",
        description="Cat-state breeding simulator and analysis toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("breed", help="breed one cat from two photons")
    _add_config_flags(sub)
    sub.add_argument("--grid", default=DEFAULT_GRID,
                     help="Wigner grid as min:max:points")
    sub.set_defaults(func=cmd_breed)

    sub = subs.add_parser("curve", help="rate/fidelity vs storage depth")
    _add_config_flags(sub)
    sub.add_argument("--n-max-values", required=True,
                     help="comma-separated storage depths, e.g. 1,5,15,50")
    sub.add_argument("--calibrate-rate-hz", type=float, default=None,
                     help="pick beta_elec so the configured depth hits this rate")
    sub.set_defaults(func=cmd_curve)

    sub = subs.add_parser("wigner", help="Wigner grids at correction stages")
    _add_config_flags(sub)
    sub.add_argument("--state-file", help="density-matrix CSV to render")
    sub.add_argument("--pipeline", action="store_true",
                     help="render simulated pipeline stages instead of a file")
    sub.add_argument("--corrections", default="none",
                     help="comma list from none,storage,detection,both")
    sub.add_argument("--grid", default=DEFAULT_GRID,
                     help="axis spec min:max:points for both x and p")
    sub.set_defaults(func=cmd_wigner)

    sub = subs.add_parser("simulate", help="pulse-level timeline Monte Carlo")
    _add_config_flags(sub)
    sub.add_argument("--duration-s", dest="duration_s", type=float,
                     required=True)
    sub.set_defaults(func=cmd_simulate)

    sub = subs.add_parser("sample", help="draw synthetic homodyne samples")
    _add_config_flags(sub)
    sub.add_argument("--source", default="measured",
                     help="pipeline stage: creation, stored, or measured")
    sub.add_argument("--state-file", help="density-matrix CSV to sample from")
    sub.add_argument("--count", type=int, default=17000)
    sub.add_argument("--phases", default="12",
                     help="phase count or comma-separated radians")
    sub.add_argument("--phase-noise-sigma", dest="phase_noise_sigma",
                     type=float, default=0.0)
    sub.set_defaults(func=cmd_sample)

    sub = subs.add_parser("tomography", help="reconstruct a state from data")
    _add_config_flags(sub)
    sub.add_argument("--dataset", required=True, help="CSV with theta,x rows")
    sub.add_argument("--reconstruction-cutoff", dest="reconstruction_cutoff",
                     type=int, default=12,
                     help="Fock cutoff n_max for the reconstructed state")
    sub.add_argument("--efficiency-model", dest="efficiency_model",
                     default="none",
                     choices=("none", "detection", "detection+storage"))
    sub.add_argument("--max-iter", dest="max_iter", type=int, default=2000)
    sub.add_argument("--tol", type=float, default=1e-10,
                     help="per-sample log-likelihood gain threshold")
    sub.add_argument("--bootstrap", type=int, default=0,
                     help="number of bootstrap resamples (0 disables)")
    sub.add_argument("--grid", default="-4:4:81",
                     help="Wigner grid for the bootstrap statistic")
    sub.set_defaults(func=cmd_tomography)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TruncationError, HeraldImpossibleError, ConvergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except CatbreedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except Exception:
        import traceback
        traceback.print_exc()
        return 4


if __name__ == "__main__":
    sys.exit(main())
