"""Command-line interface: build/check POVMs, run tables and sweeps, fit TOF.

Exit codes: 0 success, 1 validation/usage error, 2 numerical failure. All
output files are written atomically (temp file + rename) and every run
command drops a manifest recording the resolved configuration, its hash, the
seed, the library version, and the active solver backend.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile

from . import __version__
from ._kernel import BACKEND
from .bench import ExperimentConfig, SweepResult, run_basis_sweep, run_table
from .errors import NumericalError, ValidationError
from .povm import POVM_NAMES, build_named, certify_ic, load_povm, save_povm
from .simulate import fit_tof, tof_from_csv

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(self._fail(message))

    def _fail(self, message) -> int:
        print(f"error: {message}", file=sys.stderr)
        return 1


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tomolab-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _config_from_args(args) -> ExperimentConfig:
    doc = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ValidationError("config file must hold a JSON object")
    # precedence: flag > config > environment (seed only) > default
    if getattr(args, "dim", None) is not None:
        doc["dim"] = args.dim
    if getattr(args, "povm", None):
        doc["povms"] = list(args.povm)
    if getattr(args, "n_states", None) is not None:
        doc["n_states"] = args.n_states
    if getattr(args, "n_max", None) is not None:
        doc["sweep_n_max"] = args.n_max
    if getattr(args, "seed", None) is not None:
        doc["seed"] = args.seed
    elif "seed" not in doc and os.environ.get("TOMOLAB_SEED"):
        doc["seed"] = int(os.environ["TOMOLAB_SEED"])
    return ExperimentConfig.from_dict(doc)


def _write_manifest(out_dir: str, command: str, config: ExperimentConfig, outputs: list[str]) -> None:
    resolved = config.to_dict()
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    manifest = {
        "command": command,
        "version": __version__,
        "backend": BACKEND,
        "seed": config.master_seed,
        "config": resolved,
        "config_sha256": hashlib.sha256(blob.encode()).hexdigest(),
        "outputs": sorted(outputs),
    }
    _atomic_write(os.path.join(out_dir, "manifest.json"), json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _emit_run(out_dir: str, command: str, config: ExperimentConfig, result: SweepResult, curve: bool) -> None:
    prefix = "sweep_" if curve else ""
    outputs = [f"{prefix}trials.csv", f"{prefix}aggregate.csv"]
    _atomic_write(os.path.join(out_dir, f"{prefix}trials.csv"), result.trials_csv())
    _atomic_write(os.path.join(out_dir, f"{prefix}aggregate.csv"), result.aggregate_csv())
    if curve:
        _atomic_write(os.path.join(out_dir, "sweep_curve.dat"), result.curve_text())
        outputs.append("sweep_curve.dat")
    _write_manifest(out_dir, command, config, outputs + ["manifest.json"])


def _cmd_povm_build(args) -> int:
    povm = build_named(args.name, args.dim, seed=args.seed or 0)
    tmp_target = args.out
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(tmp_target)) or ".", prefix=".tomolab-")
    os.close(fd)
    try:
        save_povm(povm, tmp)
        os.replace(tmp, tmp_target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    print(f"wrote {povm.name} ({povm.n_settings} settings, {povm.n_outcomes} outcomes) to {args.out}")
    return 0


def _cmd_povm_check(args) -> int:
    povm = load_povm(args.file)
    report = certify_ic(
        povm,
        seed=args.seed or 0,
        n_pairs=args.pairs,
        n_states=args.states,
        strictness=not args.skip_strictness,
    )
    doc = {
        "file": args.file,
        "name": povm.name,
        "dim": povm.dim,
        "n_settings": povm.n_settings,
        "n_outcomes": povm.n_outcomes,
        "ic_class_claim": povm.ic_class_claim.value,
        "certification": report.to_dict(),
    }
    print(json.dumps(doc, indent=2))
    return 0


def _cmd_qst_run(args) -> int:
    config = _config_from_args(args)
    result = run_table(config, jobs=args.jobs)
    _emit_run(args.out_dir, "qst-run", config, result, curve=False)
    print(f"wrote trials.csv, aggregate.csv, manifest.json to {args.out_dir}")
    return 0


def _cmd_qst_sweep(args) -> int:
    config = _config_from_args(args)
    result = run_basis_sweep(config, jobs=args.jobs)
    _emit_run(args.out_dir, "qst-sweep", config, result, curve=True)
    print(f"wrote sweep_trials.csv, sweep_aggregate.csv, sweep_curve.dat, manifest.json to {args.out_dir}")
    return 0


def _cmd_tof_fit(args) -> int:
    signal = tof_from_csv(args.signal)
    weights, residual = fit_tof(signal)
    doc = {"weights": [float(w) for w in weights], "residual": residual}
    if args.out:
        _atomic_write(args.out, json.dumps(doc, indent=2) + "\n")
        print(f"wrote {args.out}")
    else:
        print(json.dumps(doc, indent=2))
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="tomolab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"tomolab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("povm-build", help="build a named POVM and write it to a file")
    p.add_argument("--name", required=True, help=f"one of: {', '.join(POVM_NAMES)}")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--seed", type=int, default=None, help="construction seed (default 0)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_povm_build)

    p = sub.add_parser("povm-check", help="validate a POVM file and print IC diagnostics")
    p.add_argument("--file", required=True)
    p.add_argument("--pairs", type=int, default=1000, help="pure-state pairs for distinguishability")
    p.add_argument("--states", type=int, default=50, help="states for strictness evidence")
    p.add_argument("--skip-strictness", action="store_true", help="skip the reconstruction-based diagnostics")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_povm_check)

    p = sub.add_parser("qst-run", help="run the reconstruction table for the configured POVMs")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--povm", action="append", help="POVM name or file (repeatable; overrides config)")
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--n-states", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default="out")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (results are identical for any value)")
    p.set_defaults(func=_cmd_qst_run)

    p = sub.add_parser("qst-sweep", help="infidelity versus number of settings for a basis family")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--povm", action="append", help="orthobasis family name (mub or gmb) or file")
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--n-max", type=int, default=None)
    p.add_argument("--n-states", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default="out")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_qst_sweep)

    p = sub.add_parser("tof-fit", help="nonnegative least-squares channel weights of a TOF signal")
    p.add_argument("--signal", required=True, help="two-column CSV: time_ms, amplitude")
    p.add_argument("--out", default=None, help="output JSON (default: print to stdout)")
    p.set_defaults(func=_cmd_tof_fit)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
