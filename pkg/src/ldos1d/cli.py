"""
Command-line front end.

    ldos1d ldos --figure 1c --methods exact,uniform,classical,fopt
    ldos1d survival --figure 2a
    ldos1d ring-ldos --disorder --b 32 --dx-over-dxc 3 --realizations 200 --seed 7
    ldos1d regimes --model oscillator --E 100 --dxE 0.5

Settings come from built-in defaults, then a JSON ``--config`` file, then
explicit flags. Output goes to ``--output``, else to a generated file name
in ``$LDOS1D_OUTPUT_DIR`` when it is set, else to stdout.

Exit status: 0 on success, 2 for an invalid configuration, 3 for a numerical failure.
"""

import argparse
import json
import logging
import math
import os
import sys

import numpy as np
from scipy.linalg import LinAlgError

from . import __version__
from .errors import ContractError, DomainError, EvaluationError
from .export import dumps, kernels_columns, realizations_json, series_columns, table_csv, write_text
from .oscillator import OscillatorSpec, ldos_kernel, level_energy
from .regimes import regime_report
from .ring import (
    RingSpec,
    characteristic_scales,
    coupling_row,
    default_levels,
    diagonalization_kernel,
    disorder_averaged_ldos,
    fopt_kernel,
    lorentzian_kernel,
    semiclassical_overlap_kernel,
    wigner_lorentzian,
)
from .survival import survival_series

OUTPUT_DIR_ENV = "LDOS1D_OUTPUT_DIR"
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

LDOS_FIGURES = {"1a": 0.5, "1b": 2.0, "1c": 20.0}
SURVIVAL_FIGURES = {"2a": (0.5, math.pi), "2b": (2.0, math.pi), "2c": (20.0, math.pi), "2d": (20.0, 0.5)}
FIGURE_LEVEL = 100

LDOS_METHODS = ("exact", "uniform", "classical", "fopt")
SURVIVAL_METHODS = ("uniform", "perturbative", "classical_time", "classical_energy", "fourier_of_kernel")
RING_METHODS = ("semiclassical", "fopt", "diagonalization", "mc", "lorentzian", "wigner")

DEFAULTS = {
    "ldos": {"E": FIGURE_LEVEL, "dxE": 2.0, "methods": list(LDOS_METHODS), "window": None,
             "format": "csv", "figure": None},
    "survival": {"E": FIGURE_LEVEL, "dxE": 2.0, "methods": list(SURVIVAL_METHODS[:4]), "samples": 2048,
                 "t_max": math.pi, "format": "csv", "figure": None},
    "ring-ldos": {"potential": "bump", "b": 32.0, "m": None, "V0": 1.0, "dx_over_dxc": 1.0, "dphi": None,
                  "methods": None, "levels": None, "realizations": 200, "seed": None, "jobs": 1,
                  "format": "csv", "realization_file": None},
    "regimes": {"model": "oscillator", "E": FIGURE_LEVEL, "dxE": 0.5, "b": 32.0, "m": None, "V0": 1.0,
                "dx_over_dxc": 1.0, "dphi": None, "seed": None},
}
# execution-only settings, left out of file headers so outputs do not depend on them
NOT_EMBEDDED = ("jobs", "config", "output")


class ConfigError(Exception):
    pass


def _methods(text):
    return [m.strip() for m in text.split(",") if m.strip()]


def build_parser():
    p = argparse.ArgumentParser(prog="ldos1d", description="LDOS and survival probability for 1-d systems.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file with settings (flags take precedence)")
        sp.add_argument("--output", "-o", help="output file ('-' for stdout)")

    def osc(sp):
        sp.add_argument("--E", type=int, default=None, help="reference level m (E_m = m + 1/2)")
        sp.add_argument("--dxE", type=float, default=None, help="(dx/x) E")

    def ring(sp):
        sp.add_argument("--b", type=float, default=None, help="bandwidth L/ell")
        sp.add_argument("--m", type=int, default=None, help="reference level (default: smallest safe level)")
        sp.add_argument("--V0", type=float, default=None)
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--dx-over-dxc", dest="dx_over_dxc", type=float, default=None)
        g.add_argument("--dphi", type=float, default=None,
                       help="phase variation (bump phase for a bump, disorder phase for disorder)")
        sp.add_argument("--seed", type=int, default=None)

    s = sub.add_parser("ldos", help="oscillator LDOS kernels")
    common(s)
    osc(s)
    s.add_argument("--figure", choices=sorted(LDOS_FIGURES), default=None)
    s.add_argument("--methods", type=_methods, default=None)
    s.add_argument("--window", type=int, default=None)
    s.add_argument("--format", choices=("csv", "json"), default=None)

    s = sub.add_parser("survival", help="oscillator survival probability")
    common(s)
    osc(s)
    s.add_argument("--figure", choices=sorted(SURVIVAL_FIGURES), default=None)
    s.add_argument("--methods", type=_methods, default=None)
    s.add_argument("--samples", type=int, default=None)
    s.add_argument("--t-max", dest="t_max", type=float, default=None)
    s.add_argument("--format", choices=("csv", "json"), default=None)

    s = sub.add_parser("ring-ldos", help="ring LDOS kernels (bump or disorder)")
    common(s)
    ring(s)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--disorder", dest="potential", action="store_const", const="disorder", default=None)
    g.add_argument("--bump", dest="potential", action="store_const", const="bump")
    s.add_argument("--methods", type=_methods, default=None)
    s.add_argument("--levels", type=int, default=None, help="half-width of the level window")
    s.add_argument("--realizations", type=int, default=None)
    s.add_argument("--jobs", type=int, default=None)
    s.add_argument("--format", choices=("csv", "json"), default=None)
    s.add_argument("--realization-file", dest="realization_file", default=None,
                   help="also write the bump configurations of all realizations as JSON")

    s = sub.add_parser("regimes", help="regime report (JSON)")
    common(s)
    osc(s)
    ring(s)
    s.add_argument("--model", choices=("oscillator", "bump", "disorder"), default=None)
    return p


def resolve(args):
    """Merge defaults, the optional config file and explicit flags."""
    cfg = dict(DEFAULTS[args.command])
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        cfg.update(loaded)
        if "dphi" in loaded and "dx_over_dxc" not in loaded:
            cfg["dx_over_dxc"] = None
    flags = {k: v for k, v in vars(args).items() if k in cfg and v is not None}
    if "dphi" in flags:
        cfg["dx_over_dxc"] = None
    if "dx_over_dxc" in flags:
        cfg["dphi"] = None
    cfg.update(flags)
    if isinstance(cfg.get("methods"), str):
        cfg["methods"] = _methods(cfg["methods"])
    cfg["command"] = args.command
    return cfg


# oscillator commands

def _apply_figure(cfg, table):
    fig = cfg.get("figure")
    if fig is None:
        return
    if fig not in table:
        raise ConfigError(f"unknown figure {fig!r}")
    preset = table[fig]
    if isinstance(preset, tuple):
        cfg["dxE"], cfg["t_max"] = preset
    else:
        cfg["dxE"] = preset
    cfg["E"] = FIGURE_LEVEL


def _check_methods(methods, allowed):
    if not methods:
        raise ConfigError("at least one method is required")
    bad = [m for m in methods if m not in allowed]
    if bad:
        raise ConfigError(f"unknown methods {bad}; choose from {list(allowed)}")


def _oscillator_spec(cfg):
    try:
        return OscillatorSpec.from_strength(float(cfg["dxE"]), int(cfg["E"]))
    except ContractError as exc:
        raise ConfigError(str(exc)) from exc


def run_ldos(cfg):
    _apply_figure(cfg, LDOS_FIGURES)
    _check_methods(cfg["methods"], LDOS_METHODS)
    spec = _oscillator_spec(cfg)
    kernels = {m: ldos_kernel(spec, m, window=cfg["window"]) for m in cfg["methods"]}
    meta = {"config": _embedded(cfg), "spec": spec.to_dict(),
            "kernels": {m: k.metadata for m, k in kernels.items()}}
    if cfg["format"] == "json":
        return dumps({"schema": "ldos1d.kernels/1", **meta,
                      "kernels": {m: k.to_dict() for m, k in kernels.items()}}), "ldos"
    return table_csv(kernels_columns(kernels, level_energy), meta), "ldos"


def run_survival(cfg):
    _apply_figure(cfg, SURVIVAL_FIGURES)
    _check_methods(cfg["methods"], SURVIVAL_METHODS)
    if int(cfg["samples"]) < 2 or not float(cfg["t_max"]) > 0:
        raise ConfigError("samples must be >= 2 and t_max positive")
    spec = _oscillator_spec(cfg)
    times = np.linspace(0.0, float(cfg["t_max"]), int(cfg["samples"]))
    series = {m: survival_series(spec, m, times=times) for m in cfg["methods"]}
    meta = {"config": _embedded(cfg), "spec": spec.to_dict()}
    if cfg["format"] == "json":
        return dumps({"schema": "ldos1d.survival/1", **meta,
                      "series": {m: s.to_dict() for m, s in series.items()}}), "survival"
    cols = series_columns(series)
    for m, s in series.items():
        if np.any(s.masked):
            cols[f"{m}_masked"] = s.masked.astype(int)
    return table_csv(cols, meta), "survival"


# ring commands

def _ring_template(cfg, potential):
    b = float(cfg["b"])
    if not b > 8:
        raise ConfigError("b must exceed 8 (ell < L/8)")
    ell = 2 * math.pi / b
    v0 = float(cfg["V0"])
    seed = cfg.get("seed")
    if potential == "disorder" and seed is None:
        raise ConfigError("--seed is required for disorder")
    m_guess = int(cfg["m"]) if cfg.get("m") else 1000
    try:
        if potential == "disorder":
            tmpl = RingSpec.disorder(v0, ell, 0.0, m_guess, seed=int(seed))
        else:
            tmpl = RingSpec.single_bump(v0, ell, 0.0, m_guess)
    except ContractError as exc:
        raise ConfigError(str(exc)) from exc
    sc = characteristic_scales(tmpl)
    if cfg.get("dphi") is not None:
        # phase variation -> multiple of dx_c (dphi = 2 pi dx/dx_c for both kinds)
        factor = float(cfg["dphi"]) / (2 * math.pi)
    else:
        factor = float(cfg["dx_over_dxc"])
    if not cfg.get("m"):
        # dx V0 = factor m V0 / sigma must stay below 0.1 E_m = 0.05 m^2
        m_safe = int(math.ceil(25 * abs(factor) * v0 / sc.sigma))
        m = max(1000, m_safe)
        tmpl = RingSpec(v0, ell, tmpl.bumps, 0.0, m, seed=tmpl.seed, realization=tmpl.realization)
        sc = characteristic_scales(tmpl)
    cfg["m_resolved"] = tmpl.ref_level
    cfg["dx_over_dxc_resolved"] = factor
    try:
        return tmpl.with_dx(factor * sc.dx_c)
    except ContractError as exc:
        raise ConfigError(str(exc)) from exc


def run_ring(cfg):
    potential = cfg["potential"]
    if potential not in ("bump", "disorder"):
        raise ConfigError("potential must be 'bump' or 'disorder'")
    methods = cfg["methods"] or (["mc", "lorentzian"] if potential == "disorder" else ["semiclassical", "fopt"])
    cfg["methods"] = methods
    _check_methods(methods, RING_METHODS)
    if potential == "bump" and ("mc" in methods or "lorentzian" in methods):
        raise ConfigError("mc and lorentzian need --disorder")
    spec = _ring_template(cfg, potential)
    n_levels = int(cfg["levels"]) if cfg.get("levels") else default_levels(spec)
    if potential == "disorder" and int(cfg["realizations"]) < 100:
        raise ConfigError("realizations must be >= 100")
    kernels = {}
    for name in methods:
        if name == "semiclassical":
            kernels[name] = semiclassical_overlap_kernel(spec, n_levels)
        elif name == "fopt":
            kernels[name] = fopt_kernel(spec, n_levels)
        elif name == "diagonalization":
            kernels[name] = diagonalization_kernel(spec)
        elif name == "lorentzian":
            kernels[name] = lorentzian_kernel(spec, n_levels)
        elif name == "wigner":
            profile = np.abs(coupling_row(spec)[1]) ** 2
            if spec.kind == "disorder":
                # ensemble profile N_b |B_single(q)|^2
                single = RingSpec.single_bump(spec.V0, spec.ell, 0.0, spec.ref_level)
                profile = len(spec.bumps) * np.abs(coupling_row(single)[1]) ** 2
            kernels[name] = wigner_lorentzian(characteristic_scales(spec), abs(spec.dx), profile)
    if "mc" in methods:
        mc, _ = disorder_averaged_ldos(spec, int(cfg["realizations"]), int(cfg["seed"]), n_levels=n_levels,
                                       jobs=int(cfg["jobs"] or 1))
        kernels["mc"] = mc
        kernels = {m: kernels[m] for m in methods}
    realization_text = None
    if cfg.get("realization_file") and potential == "disorder":
        records = [RingSpec.disorder(spec.V0, spec.ell, spec.dx, spec.ref_level, int(cfg["seed"]), index=i,
                                     n_bumps=len(spec.bumps)).realization_record()
                   for i in range(int(cfg["realizations"]))]
        realization_text = realizations_json(records, {"config": _embedded(cfg)})
    meta = {"config": _embedded(cfg), "spec": spec.to_dict(), "scales": characteristic_scales(spec).to_dict(),
            "kernels": {m: {k: v for k, v in kern.metadata.items() if k != "spec"} for m, kern in kernels.items()}}
    if cfg["format"] == "json":
        text = dumps({"schema": "ldos1d.ring_kernels/1", **meta,
                      "kernels": {m: k.to_dict() for m, k in kernels.items()}})
    else:
        text = table_csv(kernels_columns(kernels, lambda n: 0.5 * np.asarray(n, dtype=float) ** 2), meta)
    return text, "ring_ldos", realization_text


def run_regimes(cfg):
    model = cfg["model"]
    if model == "oscillator":
        spec = _oscillator_spec(cfg)
    else:
        spec = _ring_template(cfg, model)
    if spec.dx == 0:
        raise ConfigError("dx must be non-zero for a regime report")
    report = regime_report(spec).to_dict()
    report["config"] = _embedded(cfg)
    return dumps(report), "regimes"


def _embedded(cfg):
    return {k: v for k, v in sorted(cfg.items()) if k not in NOT_EMBEDDED}


def _auto_name(cfg, stem):
    parts = [stem]
    if cfg.get("figure"):
        parts.append(f"fig{cfg['figure']}")
    ext = "json" if cfg.get("format", "json") == "json" or stem == "regimes" else "csv"
    return "_".join(parts) + "." + ext


def _emit(text, cfg, stem, output):
    if output and output != "-":
        write_text(output, text)
        return output
    env_dir = os.environ.get(OUTPUT_DIR_ENV)
    if output is None and env_dir:
        os.makedirs(env_dir, exist_ok=True)
        path = os.path.join(env_dir, _auto_name(cfg, stem))
        write_text(path, text)
        return path
    try:
        sys.stdout.write(text)
        sys.stdout.flush()
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the interpreter's flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
    return "-"


def main(argv=None):
    logging.basicConfig(format="ldos1d: %(message)s", level=logging.WARNING)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        extra = None
        if args.command == "ldos":
            text, stem = run_ldos(cfg)
        elif args.command == "survival":
            text, stem = run_survival(cfg)
        elif args.command == "ring-ldos":
            text, stem, extra = run_ring(cfg)
        else:
            text, stem = run_regimes(cfg)
        _emit(text, cfg, stem, args.output)
        if extra is not None:
            write_text(cfg["realization_file"], extra)
    except (EvaluationError, LinAlgError, ArithmeticError) as exc:
        print(f"ldos1d: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ContractError, DomainError, ValueError, TypeError) as exc:
        print(f"ldos1d: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
