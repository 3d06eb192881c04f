"""Command line entry point: ``confperf synth|sample|run|report|stats``."""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from . import binsample, harness, numsample
from .evaluation import compare
from .space import SpaceError, load_space

BINARY_KINDS = {"ow": "OW", "negow": "NegOW", "t2": "TWise", "t3": "TWise", "rb": "RandomBinary"}
NUMERIC_KINDS = {"ofat": "OFAT", "bbd": "BBD", "cci": "CCI", "pbd": "PBD", "dod": "DOD", "rn": "RandomNumeric"}


class CliError(Exception):
    pass


def _write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def cmd_synth(args) -> int:
    spec = {}
    if args.spec:
        with open(args.spec) as fh:
            spec = json.load(fh)
    for key in ("seed", "noise", "n_binary", "n_pairwise"):
        val = getattr(args, key)
        if val is not None:
            spec[key] = val
    syn = harness.SyntheticSystemSpec.from_dict(spec)
    space, model, table = harness.generate_synthetic_system(syn)
    out = Path(args.out)
    _write_text(out / "space.json", space.to_json() + "\n")
    _write_text(out / "measurements.csv", table.to_csv())
    _write_text(out / "model.json", json.dumps({"spec": syn.to_dict(), "model": model.state()}, indent=1) + "\n")
    print(f"{len(table)} configurations -> {out}")
    return 0


def _sample(args):
    space = load_space(args.space)
    kind = args.strategy.lower()
    if kind in BINARY_KINDS:
        if kind == "rb" and args.size is None:
            raise CliError("--size is required for rb")
        t = int(kind[1]) if kind in ("t2", "t3") else None
        spec = binsample.BinaryStrategySpec(BINARY_KINDS[kind], t=t, size=args.size, seed=args.seed)
        return space, space.binary_names, binsample.sample_binary(space, spec)
    if kind in NUMERIC_KINDS:
        if kind in ("dod", "rn") and args.size is None:
            raise CliError(f"--size is required for {kind}")
        spec = numsample.NumericStrategySpec(NUMERIC_KINDS[kind], levels=args.levels, alpha=args.alpha,
                                             seed_id=args.pbd_seed, size=args.size, restarts=args.restarts,
                                             seed=args.seed)
        return space, space.numeric_names, numsample.sample_numeric(space, spec)
    raise CliError(f"unknown strategy {args.strategy!r}")


def cmd_sample(args) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", binsample.SamplingWarning)
        _, names, sample = _sample(args)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out = Path(args.out)
    _write_text(out, sample.to_csv(names))
    _write_text(out.with_name(out.name + ".json"), json.dumps(sample.provenance, indent=1, sort_keys=True) + "\n")
    print(f"{len(sample)} configurations -> {out}")
    return 0


def cmd_run(args) -> int:
    plan = harness.load_plan(args.plan)
    if args.master_seed is not None:
        plan.master_seed = args.master_seed
    if args.budget is not None:
        plan.budget = args.budget
    if args.folds is not None:
        plan.folds = args.folds
    if args.tune_seed is not None:
        plan.tune_seed = args.tune_seed
    out = args.out or plan.output
    if not out:
        raise CliError("no output directory (use --out or set 'output' in the plan)")
    trials = [] if args.trials else None
    cells = harness.run_experiment(plan, workers=args.workers, trial_log=trials)
    files = harness.write_run(cells, out, trials)
    failed = sum(c.status != "ok" for c in cells)
    print(f"{len(cells)} cells ({failed} failed), {len(files)} files -> {out}")
    return 0


def cmd_report(args) -> int:
    cells = harness.read_cells(args.cells)
    files = harness.emit_report(cells, args.out)
    print(f"{len(files)} files -> {args.out}")
    return 0


def cmd_stats(args) -> int:
    cells = harness.read_cells(args.cells)
    text = harness.significance_csv(cells, args.dimension)
    if args.out:
        _write_text(Path(args.out), text)
    else:
        sys.stdout.write(text)
        if args.summary:
            cmp_ = compare(cells, args.dimension)
            print(f"# {len(cmp_.names)} {args.dimension} values, one-sided tests, no multiple-comparison correction")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="confperf", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic system (space, measurements, true model)")
    s.add_argument("--spec", help="JSON synthetic-system spec")
    s.add_argument("--seed", type=int)
    s.add_argument("--noise", type=float)
    s.add_argument("--n-binary", dest="n_binary", type=int)
    s.add_argument("--n-pairwise", dest="n_pairwise", type=int)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("sample", help="sample the binary or numeric sub-space")
    s.add_argument("--space", required=True, help="variability model (JSON)")
    s.add_argument("--strategy", required=True, help="ow|negow|t2|t3|rb|ofat|bbd|cci|pbd|dod|rn")
    s.add_argument("--size", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--levels", type=int, default=5)
    s.add_argument("--alpha", type=float, default=0.5)
    s.add_argument("--pbd-seed", dest="pbd_seed", default="9x3", help="9x3|25x5|49x7|125x5")
    s.add_argument("--restarts", type=int, default=5)
    s.add_argument("--out", required=True, help="CSV path; provenance goes to <out>.json")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("run", help="run an experiment plan")
    s.add_argument("--plan", required=True)
    s.add_argument("--out")
    s.add_argument("--master-seed", dest="master_seed", type=int)
    s.add_argument("--budget", type=int)
    s.add_argument("--folds", type=int)
    s.add_argument("--tune-seed", dest="tune_seed", type=int, help="seed root for tuning (default: master seed)")
    s.add_argument("--workers", type=int, help="worker processes (default: CONFPERF_WORKERS or 1)")
    s.add_argument("--trials", action="store_true", help="also write the tuning trial log")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("report", help="re-derive reports from a cells file")
    s.add_argument("--cells", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("stats", help="pairwise significance table for one dimension")
    s.add_argument("--cells", required=True)
    s.add_argument("--dimension", required=True, choices=("learner", "binary", "numeric"))
    s.add_argument("--out")
    s.add_argument("--summary", action="store_true")
    s.set_defaults(func=cmd_stats)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, SpaceError, ValueError, OSError, KeyError) as exc:
        print(f"confperf: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
