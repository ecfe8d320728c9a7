"""Command-line front end.

Every subcommand reads an optional YAML config, applies ``--set key=value``
overrides, and writes CSV with a single ``#`` header line carrying the
config hash and units. Numbers are written with 12 significant digits so
identical configs give byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np
import yaml

from . import cycles as cyc
from . import scenarios as scn
from . import threewave as tw
from .coupling import MINUS, PLUS
from .rotor import eigenstates, load_molecule
from .units import CM1_TO_MHZ

SCENARIO_NORM_TOL = 1e-8
THREEWAVE_NORM_TOL = 1e-9

_DEFAULTS = {
    "spectrum": {"molecule": "menthol", "jmax": 1, "band": "all"},
    "cycles": {"molecule": "menthol", "jmax": 1, "band": "all", "format": "csv", "only": "all"},
    "dressed": {
        "couplings": [1.0, 1.0, 1.0],
        "delta12": 0.0,
        "delta23": 0.0,
        "phis": {"start": 0.0, "stop": "2pi", "num": 73},
    },
    "scan": {
        "sequence": "sequential",
        "coupling": 1.0,
        "gap": 3.0,
        "phis": [0.0, "pi/4", "pi/2"],
        "deltas": {"start": 0.0, "stop": 0.5, "num": 51},
    },
    "threewave": {
        "couplings": [1.0, 1.0, 1.0],
        "delta12": 0.0,
        "delta23": 0.0,
        "Phi": "pi/2",
        "sequence": "simultaneous",
        "coupling": 1.0,
        "gap": 3.0,
        "delta0": 2.0,
        "duration": 200.0,
        "points": 401,
    },
}


class CLIError(Exception):
    pass


# helpers ----------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (str, np.str_)):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".12g")


def _load_yaml(path) -> dict:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except FileNotFoundError:
        raise CLIError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise CLIError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise CLIError(f"{path}: top level must be a mapping")
    return data


def _simple_config(kind: str, args) -> dict:
    cfg = dict(_DEFAULTS[kind])
    if args.config:
        data = _load_yaml(args.config)
        data = data.get(kind, data) if kind == "threewave" else data
        cfg.update(data)
    for item in args.set or ():
        if "=" not in item:
            raise CLIError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        cfg[k.strip()] = yaml.safe_load(v)
    unknown = set(cfg) - set(_DEFAULTS[kind])
    if unknown:
        raise CLIError(f"unknown {kind} keys: {sorted(unknown)}")
    return cfg


def _grid(spec) -> np.ndarray:
    if isinstance(spec, dict):
        return np.linspace(scn.parse_angle(spec["start"]), scn.parse_angle(spec["stop"]), int(spec["num"]))
    if isinstance(spec, (list, tuple)):
        return np.array([scn.parse_angle(v) for v in spec], dtype=float)
    return np.array([scn.parse_angle(spec)])


def _write_csv(out, header_line: str, columns, rows):
    buf = io.StringIO()
    buf.write(header_line.rstrip("\n") + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    text = buf.getvalue()
    if out in (None, "-"):
        sys.stdout.write(text)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _header(cmd: str, cfg: dict, units: str) -> str:
    return f"# chiralwave {cmd} config={scn.config_hash(cfg)} units: {units}"


def _echo(cfg: dict, quiet: bool):
    if not quiet:
        sys.stderr.write("# effective config\n")
        sys.stderr.write(yaml.safe_dump(cfg, sort_keys=True))


# subcommands ----------------------------------------------------------------


def cmd_spectrum(args) -> int:
    cfg = _simple_config("spectrum", args)
    mol = load_molecule(cfg["molecule"])
    jmax = int(cfg["jmax"])
    bands = mol.band_names if cfg["band"] == "all" else (cfg["band"],)
    rows = []
    for b in bands:
        for J in range(jmax + 1):
            for s in eigenstates(mol, J, b):
                rows.append((s.energy, b or "", s.J, s.tau, s.Ka, s.Kc, s.irrep))
    rows.sort(key=lambda r: (r[0], r[2], r[3]))
    out = [(b, J, tau, Ka, Kc, irrep, e, e / CM1_TO_MHZ) for e, b, J, tau, Ka, Kc, irrep in rows]
    _echo(cfg, args.quiet)
    _write_csv(
        args.out,
        _header("spectrum", cfg, "energy_mhz=MHz energy_cm1=cm-1"),
        ["band", "J", "tau", "Ka", "Kc", "irrep", "energy_mhz", "energy_cm1"],
        out,
    )
    return 0


def cmd_dressed(args) -> int:
    cfg = _simple_config("dressed", args)
    params = tw.ThreeLevelParams(
        couplings=tuple(float(c) for c in cfg["couplings"]),
        delta12=float(cfg["delta12"]),
        delta23=float(cfg["delta23"]),
    )
    rows = []
    for Phi in _grid(cfg["phis"]):
        ep = tw.dressed_spectrum(params, PLUS, Phi)
        em = tw.dressed_spectrum(params, MINUS, Phi)
        rows.append((Phi, *ep, *em))
    _echo(cfg, args.quiet)
    _write_csv(
        args.out,
        _header("dressed", cfg, "Phi=rad energies=E0"),
        ["Phi", "E1p", "E2p", "E3p", "E1m", "E2m", "E3m"],
        rows,
    )
    return 0


def cmd_cycles(args) -> int:
    cfg = _simple_config("cycles", args)
    mol = load_molecule(cfg["molecule"])
    cands = cyc.enumerate_cycles(mol, int(cfg["jmax"]), band=cfg["band"])
    if cfg["only"] != "all":
        cands = [c for c in cands if c.verdict == cfg["only"]]
    _echo(cfg, args.quiet)
    text = cyc.cycle_report(mol, cands, fmt=cfg["format"])
    if cfg["format"] == "csv":
        lines = text.splitlines()
        rows = list(csv.reader(lines[1:]))
        _write_csv(args.out, _header("cycles", cfg, "m_average=Debye^3"), lines[0].split(","), rows)
    elif args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    return 0


def cmd_scan(args) -> int:
    cfg = _simple_config("scan", args)
    if cfg["sequence"] == "sequential":
        seq = tw.sequential_sequence(float(cfg["coupling"]), gap=float(cfg["gap"]))
    elif cfg["sequence"] == "simultaneous":
        seq = tw.simultaneous_sequence(float(cfg["coupling"]))
    else:
        raise CLIError("scan sequence must be sequential or simultaneous")
    phis, deltas = _grid(cfg["phis"]), _grid(cfg["deltas"])
    table = tw.detuning_scan(seq, phis, deltas, jobs=args.jobs)
    rows = [(Phi, d, *table[i, j]) for i, Phi in enumerate(phis) for j, d in enumerate(deltas)]
    _echo(cfg, args.quiet)
    _write_csv(
        args.out,
        _header("scan", cfg, "Phi=rad delta=1/t0"),
        ["Phi", "delta", "selectivity1", "selectivity2", "selectivity3"],
        rows,
    )
    return 0


def _run_threewave(args) -> int:
    cfg = _simple_config("threewave", args)
    Phi = scn.parse_angle(cfg["Phi"])
    params = tw.ThreeLevelParams(
        couplings=tuple(float(c) for c in cfg["couplings"]),
        delta12=float(cfg["delta12"]),
        delta23=float(cfg["delta23"]),
        phases=(Phi, 0.0, 0.0),
    )
    kind = cfg["sequence"]
    if kind == "chirped":
        T = float(cfg["duration"])
        grid = np.linspace(0.0, T, int(cfg["points"]))
        plus = tw.chirped_passage(params, PLUS, float(cfg["delta0"]), T, Phi, tgrid=grid)
        minus = tw.chirped_passage(params, MINUS, float(cfg["delta0"]), T, Phi, tgrid=grid)
    else:
        if kind == "sequential":
            seq = tw.sequential_sequence(float(cfg["coupling"]), gap=float(cfg["gap"]))
        elif kind == "simultaneous":
            seq = tw.simultaneous_sequence(float(cfg["coupling"]))
        else:
            raise CLIError("threewave sequence must be sequential, simultaneous or chirped")
        grid = np.linspace(0.0, seq.end, int(cfg["points"]))
        plus, minus = tw.propagate_pair(params, list(seq.pulses), [1, 0, 0], grid)
    cols, data = tw.trajectory_table(plus, minus)
    _echo(cfg, args.quiet)
    _write_csv(args.out, _header("propagate", cfg, "t=t0 amplitudes=1"), cols, data)
    drift = max(plus.norm_drift, minus.norm_drift)
    sel = tw.selectivity(plus, minus)[-1]
    sys.stderr.write(
        "final selectivity: " + " ".join(f"{s:.6f}" for s in sel) + f"\nnorm drift = {drift:.3g}\n"
    )
    return 0 if drift <= THREEWAVE_NORM_TOL else 3


def cmd_propagate(args) -> int:
    if not args.config:
        raise CLIError("propagate needs --config (a scenario file or bundled scenario name)")
    path = Path(args.config)
    if path.is_file() and "threewave" in _load_yaml(path):
        return _run_threewave(args)
    try:
        cfg = scn.load_config(args.config)
    except yaml.YAMLError as exc:
        raise CLIError(f"{args.config}: {exc}") from None
    cfg = scn.apply_overrides(cfg, args.set)
    result = scn.run_scenario(cfg)
    labels = result.labels
    cols = ["t"] + [f"P_{l}_p" for l in labels] + [f"P_{l}_m" for l in labels] + [f"selectivity_{l}" for l in labels]
    data = np.hstack(
        [result.t[:, None], result.populations[PLUS], result.populations[MINUS], result.selectivity]
    )
    _echo(cfg, args.quiet)
    _write_csv(args.out, _header("propagate", cfg, f"t=t0 t0={result.t0:.6g}s populations=1"), cols, data)
    sys.stderr.write(result.summary())
    return 0 if result.norm_drift() <= SCENARIO_NORM_TOL else 3


# entry point --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chiralwave", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "spectrum": "rotational levels of a molecule",
        "dressed": "field-dressed energies of the three-level model versus Phi",
        "cycles": "enumerate and classify three-level cycles",
        "propagate": "run a scenario or three-level trajectory",
        "scan": "final selectivity versus Phi and detuning",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", help="YAML config (propagate also accepts a bundled scenario name)")
        sp.add_argument("--out", help="output CSV path (default stdout)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config entry")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for scans")
        sp.add_argument("--quiet", action="store_true", help="do not echo the effective config")
    return p


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "dressed": cmd_dressed,
    "cycles": cmd_cycles,
    "propagate": cmd_propagate,
    "scan": cmd_scan,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (CLIError, scn.ConfigError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        sys.stderr.write(f"chiralwave {args.command}: error: {msg}\n")
        return 2
    except tw.PropagationError as exc:
        sys.stderr.write(f"chiralwave {args.command}: integration failed: {exc}\n")
        return 4


if __name__ == "__main__":
    sys.exit(main())
