"""Command line driver for the experiment pipelines.

Usage::

    python -m softrec <subcommand> [--config cfg.json] [--out DIR] [--seed N]

Each subcommand reads an optional JSON config whose keys must belong to the
subcommand's schema, writes one or more versioned CSV tables and a JSON
summary into ``--out`` (default: the current directory) and prints the
summary path.  The thread count for trial-level parallelism is read from
``SOFTREC_THREADS``.  Exit codes: 0 success (trial failures are recorded in
the outputs), 2 invalid configuration, 1 any other failure.
"""
import argparse
import dataclasses
import json
import math
import os
import sys

import numpy as np

from . import __version__
from ._io import dump_json, write_csv
from .exceptions import ConfigError, ParameterError, ValidationError

SEED_MAX = 2 ** 64 - 1


def _threads():
    raw = os.environ.get("SOFTREC_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"SOFTREC_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("SOFTREC_THREADS must be >= 1")
    return n


def _merge(defaults, cfg, name):
    unknown = sorted(set(cfg) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown {name} config fields: {', '.join(unknown)}")
    out = dict(defaults)
    out.update(cfg)
    return out


def _check_seed(seed):
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool) or not 0 <= seed <= SEED_MAX:
        raise ConfigError("seed must be an integer in [0, 2^64)")
    return int(seed)


# -- subcommands ----------------------------------------------------------------

STATDIM_DEFAULTS = {
    "n": 30, "k": 30, "ranks": [1, 2, 3, 4], "s1": 0.7,
    "sigmas": [round(1.0 + 0.1 * i, 10) for i in range(1, 11)],
    "ts": [round(i / 20, 10) for i in range(1, 20)],
    "samples": 25, "tol": 1e-6, "include_exact": True, "seed": 0,
}


def run_statdim(cfg, out):
    from .statdim import STATDIM_COLUMNS, statdim_table

    c = _merge(STATDIM_DEFAULTS, cfg, "statdim")
    if c["samples"] < 2 or c["n"] < 1 or c["k"] < 1:
        raise ConfigError("need samples >= 2 and positive matrix dimensions")
    rows = statdim_table((c["k"], c["n"]), c["ranks"], c["sigmas"], c["ts"], c["samples"], c["seed"],
                         c["s1"], c["tol"], c["include_exact"])
    write_csv(os.path.join(out, "statdim.csv"), "statdim", STATDIM_COLUMNS, rows)
    return {"config": c, "rows": len(rows), "tables": ["statdim.csv"]}


def run_separate(cfg, out):
    from .separation import SeparationConfig, run_separation_experiment

    fields = {f.name: f.default for f in dataclasses.fields(SeparationConfig)}
    fields["workers"] = _threads()
    c = _merge(fields, cfg, "separate")
    res = run_separation_experiment(SeparationConfig(**c), os.path.join(out, "separate.csv"))
    return {"config": c, "p": res["p"], "M": res["M"], "params": res["params"].to_json(),
            "cert_rate": res["cert_rate"], "recovery_rate": res["recovery_rate"],
            "implication_ok": res["implication_ok"], "tables": ["separate.csv"]}


def run_superres(cfg, out):
    from .superres import (DELTAS_COLUMNS, SuperresConfig, deltas_curve, run_superres_experiment)

    fields = {f.name: f.default for f in dataclasses.fields(SuperresConfig)}
    fields["c_values"] = [0.1, 0.2, 0.3, 0.4]
    c = _merge(fields, cfg, "superres")
    cvals = c.pop("c_values")
    c["interval"] = tuple(c["interval"])
    write_csv(os.path.join(out, "superres_deltas.csv"), "superres_deltas", DELTAS_COLUMNS,
              deltas_curve(cvals, c["gamma"]))
    res = run_superres_experiment(SuperresConfig(**c), os.path.join(out, "superres_recovery.csv"))
    c["c_values"] = cvals
    return {"config": c, "params": res["params"], "eps0": res["eps0"], "frame_set_size": len(res["M"]),
            "certified": res["certified"], "recovered_within_delta": res["recovered_within_delta"],
            "reports": res["reports"], "tables": ["superres_deltas.csv", "superres_recovery.csv"]}


CERTIFY_DEFAULTS = {"kind": None, "nu": None, "x0": None, "j0": 1, "mu0": None, "dictionary": None,
                    "U": None, "V": None, "tol": 1e-9, "seed": 0}


def run_certify(cfg, out):
    """Verify a certificate given in the config (kind 'soft' or 'nuclear')."""
    from ._io import pairs_to_complex
    from .certificates import verify_exact_nuclear_certificate, verify_soft_certificate
    from .dictionary import DiscreteMeasure, SampledDictionary

    c = _merge(CERTIFY_DEFAULTS, cfg, "certify")
    kind = c["kind"]
    if kind == "soft":
        if any(c[k] is None for k in ("nu", "x0", "mu0", "dictionary")):
            raise ConfigError("soft certify needs nu, x0, mu0 and dictionary")
        dic = SampledDictionary.from_json(c["dictionary"])
        rep = verify_soft_certificate(pairs_to_complex(c["nu"]), int(c["x0"]), int(c["j0"]),
                                      DiscreteMeasure.from_json(c["mu0"]), dic)
    elif kind == "nuclear":
        if any(c[k] is None for k in ("nu", "U", "V")):
            raise ConfigError("nuclear certify needs nu, U and V")
        rep = verify_exact_nuclear_certificate(pairs_to_complex(c["nu"]), pairs_to_complex(c["U"]),
                                               pairs_to_complex(c["V"]), c["tol"])
    else:
        raise ConfigError("certify kind must be 'soft' or 'nuclear'")
    rec = rep.to_json()
    flat = [(k, v) for k, v in sorted(rec.items()) if not isinstance(v, dict)]
    write_csv(os.path.join(out, "certify.csv"), "certify", ["quantity", "value"], flat)
    return {"kind": kind, "report": rec, "tables": ["certify.csv"]}


CROSSCHECK_DEFAULTS = {"trials": 50, "d": 3, "max_atoms": 6, "complex": False, "tol": 1e-10, "seed": 0}


def run_crosscheck(cfg, out):
    from .dictionary import CROSSCHECK_COLUMNS, crosscheck_gauge_solver

    c = _merge(CROSSCHECK_DEFAULTS, cfg, "solve-crosscheck")
    if c["d"] < 1 or c["max_atoms"] < c["d"] or c["trials"] < 0:
        raise ConfigError("need d >= 1, max_atoms >= d and trials >= 0")
    rows = crosscheck_gauge_solver(c["trials"], c["d"], c["max_atoms"], c["complex"], c["seed"], c["tol"])
    write_csv(os.path.join(out, "crosscheck.csv"), "crosscheck", CROSSCHECK_COLUMNS, rows)
    worst = max((r[5] for r in rows), default=0.0)
    return {"config": c, "max_abs_diff": worst, "trials": len(rows), "tables": ["crosscheck.csv"]}


COMMANDS = {"statdim": run_statdim, "separate": run_separate, "superres": run_superres,
            "certify": run_certify, "solve-crosscheck": run_crosscheck}


def _clean(obj):
    # JSON has no inf/nan; encode them as strings so summaries stay valid JSON
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not math.isfinite(obj):
        return str(float(obj))
    return obj


def build_parser():
    ap = argparse.ArgumentParser(prog="softrec", description="Soft recovery experiment driver.")
    ap.add_argument("--version", action="version", version=f"softrec {__version__}")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON config file")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--seed", type=int, help="override the config seed")
    return ap


def run(argv=None):
    """Parse arguments, run one subcommand and return the exit code."""
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        cfg = {}
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
            if not isinstance(cfg, dict):
                raise ConfigError("config must be a JSON object")
        cfg.pop("output_path", None)
        if "master_seed" in cfg:
            cfg["seed"] = cfg.pop("master_seed")
        if args.seed is not None:
            cfg["seed"] = args.seed
        if "seed" in cfg:
            cfg["seed"] = _check_seed(cfg["seed"])
        _threads()
        os.makedirs(args.out, exist_ok=True)
        summary = COMMANDS[args.command](cfg, args.out)
    except (ConfigError, ValidationError, ParameterError, json.JSONDecodeError, TypeError, OSError) as e:
        print(f"softrec: configuration error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - systemic failure
        print(f"softrec: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    summary["command"] = args.command
    summary["version"] = __version__
    path = os.path.join(args.out, f"{args.command}_summary.json")
    dump_json(_clean(summary), path)
    print(path)
    return 0


def main():
    sys.exit(run())
