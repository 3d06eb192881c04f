"""Experiment machinery: learning sets, synthetic systems, the strategy grid, reports."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import binsample, numsample
from .evaluation import (ExperimentCell, ParetoPoint, compare, mean_relative_error, pareto_front, rq1_1,
                         rq1_2, rq2_1, rq2_2, rq3_1, stability)
from .learners import LEARNER_IDS, train
from .learners.mr import Factor, MultipleRegression
from .rng import derive_seed
from .space import (BinaryOption, Constraint, ConfigurationSpace, MeasurementTable,
                    NumericOption, SampleSet, cartesian_rows, dedupe, load_space, read_measurements,
                    valid_matrix)
from .tuning import load_hyperparam_space, random_search, trials_to_csv

BINARY_STRATEGIES = ("OW", "NegOW", "T2", "T3", "RB(OW)", "RB(T2)", "RB(T3)")
NUMERIC_STRATEGIES = ("OFAT", "BBD", "CCI", "PBD(9,3)", "PBD(25,5)", "PBD(49,7)", "PBD(125,5)",
                      "DOD(50)", "DOD(125)", "RN(50)", "RN(125)")
CELL_COLUMNS = ("system", "learner", "binary", "numeric", "learning_set_size", "product_size", "filtered",
                "system_size", "n_runs", "mean_error", "cv_error", "status", "hyperparams")


class HarnessError(ValueError):
    pass


def is_random_strategy(sid: str) -> bool:
    return sid.startswith("RB(") or sid.startswith("RN(")


def _arg(sid: str) -> str:
    return sid[sid.index("(") + 1:-1]


# -- strategies ----------------------------------------------------------------


def sample_binary_strategy(space: ConfigurationSpace, sid: str, seed: int = 0) -> SampleSet:
    """Sample the binary sub-space with a grid strategy id (``OW`` ... ``RB(T3)``)."""
    if sid == "OW":
        spec = binsample.BinaryStrategySpec("OW")
    elif sid == "NegOW":
        spec = binsample.BinaryStrategySpec("NegOW")
    elif sid in ("T2", "T3"):
        spec = binsample.BinaryStrategySpec("TWise", t=int(sid[1]))
    elif sid.startswith("RB(") and sid.endswith(")"):
        ref = _arg(sid)
        if ref not in ("OW", "T2", "T3"):
            raise HarnessError(f"RB must reference OW, T2 or T3, got {sid!r}")
        size = len(sample_binary_strategy(space, ref))
        out = binsample.sample_binary(space, binsample.BinaryStrategySpec("RandomBinary", size=size, seed=seed))
        return SampleSet(out.members, sid, {"size": size}, seed=seed, requested_size=size, skipped=out.skipped)
    else:
        raise HarnessError(f"unknown binary strategy {sid!r}")
    out = binsample.sample_binary(space, spec)
    return SampleSet(out.members, sid, out.params, skipped=out.skipped)


def sample_numeric_strategy(space: ConfigurationSpace, sid: str, seed: int = 0, levels: int = 5,
                            alpha: float = 0.5, restarts: int = 5) -> SampleSet:
    """Sample the numeric sub-space with a grid strategy id (``OFAT`` ... ``RN(125)``)."""
    if sid == "OFAT":
        spec = numsample.NumericStrategySpec("OFAT", levels=levels)
    elif sid == "BBD":
        spec = numsample.NumericStrategySpec("BBD")
    elif sid == "CCI":
        spec = numsample.NumericStrategySpec("CCI", alpha=alpha)
    elif sid.startswith("PBD("):
        spec = numsample.NumericStrategySpec("PBD", seed_id=_arg(sid))
    elif sid.startswith("DOD("):
        spec = numsample.NumericStrategySpec("DOD", size=int(_arg(sid)), restarts=restarts, seed=seed)
    elif sid.startswith("RN("):
        spec = numsample.NumericStrategySpec("RandomNumeric", size=int(_arg(sid)), seed=seed)
    else:
        raise HarnessError(f"unknown numeric strategy {sid!r}")
    out = numsample.sample_numeric(space, spec)
    return SampleSet(out.members, sid, out.params, seed=out.seed, requested_size=out.requested_size,
                     skipped=out.skipped)


# -- learning sets --------------------------------------------------------------


def build_learning_set(bin_set: SampleSet, num_set: SampleSet, space: ConfigurationSpace) -> SampleSet:
    """Cartesian product of binary and numeric samples; pairings violating a constraint are dropped."""
    B = bin_set.matrix(space.binary_names)
    N = num_set.matrix(space.numeric_names)
    if len(B) == 0 or len(N) == 0:
        raise HarnessError("strategies incompatible with constraints: empty sub-space sample")
    X = cartesian_rows(B, N)
    ok = space.valid_mask(X)
    kept = X[ok]
    if len(kept) == 0:
        raise HarnessError("strategies incompatible with constraints")
    members = tuple(dedupe(space.config(r) for r in kept))
    params = {"binary": bin_set.provenance, "numeric": num_set.provenance,
              "product_size": int(len(X)), "filtered": int((~ok).sum())}
    return SampleSet(members, f"{bin_set.strategy} x {num_set.strategy}", params)


# -- synthetic systems ------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSystemSpec:
    """Random performance-influence model over a generated space.

    Interactions only combine options that already carry a main effect, so
    every generated term is reachable by forward term selection. A mandatory
    ``root`` option (the feature-model root) is added when ``root`` is set.
    """

    n_binary: int = 5
    numeric_domains: tuple = ((1, 2, 3, 4, 5),) * 3
    binary_constraints: tuple = ()
    numeric_constraints: tuple = ()
    root: bool = True
    n_main_binary: int | None = None
    n_numeric_terms: int = 1
    numeric_power: int | None = None
    n_pairwise: int = 2
    n_higher: int = 0
    degree_cap: int = 2
    coef_range: tuple = (1.0, 10.0)
    interaction_scale: float = 1.0
    interaction_pool: str = "all"  # "all" | "binary"
    noise: float = 0.0
    seed: int = 0
    name: str = "synthetic"

    def __post_init__(self):
        if self.noise < 0:
            raise HarnessError("noise must be >= 0")
        if not 1 <= self.degree_cap <= 4:
            raise HarnessError("degree cap must lie in 1..4")
        if self.numeric_power is not None and not 1 <= self.numeric_power <= 4:
            raise HarnessError("numeric power must lie in 1..4")
        lo, hi = self.coef_range
        if not 0 < lo <= hi:
            raise HarnessError("coefficient range must satisfy 0 < low <= high")

    @classmethod
    def from_dict(cls, d: Mapping) -> "SyntheticSystemSpec":
        d = dict(d)
        for key in ("numeric_domains",):
            if key in d:
                d[key] = tuple(tuple(v) for v in d[key])
        for key in ("binary_constraints", "numeric_constraints", "coef_range"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))

    def space(self) -> ConfigurationSpace:
        binary = (["root"] if self.root else []) + [f"b{i + 1}" for i in range(self.n_binary)]
        numeric = [NumericOption(f"n{i + 1}", tuple(float(v) for v in dom))
                   for i, dom in enumerate(self.numeric_domains)]
        cons = (["root"] if self.root else []) + list(self.binary_constraints) + list(self.numeric_constraints)
        return ConfigurationSpace(tuple(BinaryOption(n) for n in binary), tuple(numeric),
                                  tuple(Constraint.parse(c) for c in cons))


def _draw_model(spec: SyntheticSystemSpec, space: ConfigurationSpace, rng: np.random.Generator):
    nb_all = len(space.binary_options)
    offset = 1 if spec.root else 0
    bins = list(range(offset, nb_all))
    nums = list(range(nb_all, nb_all + len(space.numeric_options)))
    vmax = {i: max(abs(o.min), abs(o.max)) or 1.0 for i, o in zip(nums, space.numeric_options)}
    lo, hi = spec.coef_range

    def coef(term, scale=1.0):
        mag = rng.uniform(lo, hi) * scale
        for f in term:
            if f.i in vmax:
                mag /= vmax[f.i] ** f.power
        return mag

    n_main = len(bins) if spec.n_main_binary is None else spec.n_main_binary
    if not 0 <= n_main <= len(bins) or not 0 <= spec.n_numeric_terms <= len(nums):
        raise HarnessError("more main-effect terms than options")
    main_b = sorted(rng.choice(bins, n_main, replace=False).tolist()) if n_main else []
    main_n = sorted(rng.choice(nums, spec.n_numeric_terms, replace=False).tolist()) if spec.n_numeric_terms else []
    terms, coefs = [], []
    for i in main_b:
        t = (Factor("pow", i),)
        terms.append(t)
        coefs.append(coef(t))
    for i in main_n:
        p = spec.numeric_power or int(rng.integers(1, spec.degree_cap + 1))
        t = (Factor("pow", i, p),)
        terms.append(t)
        coefs.append(coef(t))
    if spec.interaction_pool not in ("all", "binary"):
        raise HarnessError("interaction_pool must be 'all' or 'binary'")
    pool = main_b + (main_n if spec.interaction_pool == "all" else [])
    for order, count in ((2, spec.n_pairwise), (3, spec.n_higher)):
        combos = list(itertools.combinations(pool, order))
        if count > len(combos):
            raise HarnessError(f"cannot draw {count} distinct {order}-way interactions from {len(pool)} options")
        for k in sorted(rng.choice(len(combos), count, replace=False).tolist()) if count else []:
            t = tuple(sorted(Factor("pow", i, 1 if i < nb_all else int(rng.integers(1, spec.degree_cap + 1)))
                             for i in combos[k]))
            terms.append(t)
            sign = 1.0 if rng.random() < 0.5 else -1.0
            coefs.append(sign * coef(t, spec.interaction_scale))
    return terms, coefs


def generate_synthetic_system(spec: SyntheticSystemSpec, max_retries: int = 100):
    """Return ``(space, ground-truth model, measurement table)``.

    Measurements are the model on every valid configuration times
    ``1 + noise * g`` with standard-normal ``g``, clamped positive.
    """
    space = spec.space()
    X = valid_matrix(space)
    if len(X) == 0:
        raise HarnessError("synthetic space has no valid configuration")
    rng = np.random.default_rng(spec.seed)
    lo, hi = spec.coef_range
    for _ in range(max_retries):
        terms, coefs = _draw_model(spec, space, rng)
        partial = MultipleRegression(terms, coefs, space.option_names).predict(X) if terms else np.zeros(len(X))
        # intercept keeps the smallest value a few coefficient units above zero
        intercept = rng.uniform(lo, hi) + max(0.0, -float(partial.min()))
        model = MultipleRegression([()] + terms, [intercept] + coefs, space.option_names)
        y0 = model.predict(X)
        if np.all(y0 > 0):
            break
    else:
        raise HarnessError("could not draw a positive model")
    y = y0 * (1.0 + spec.noise * rng.standard_normal(len(y0))) if spec.noise > 0 else y0
    y = np.maximum(y, 1e-6 * y0)
    table = MeasurementTable(space, X, y, system=spec.name, metric="performance")
    return space, model, table


def ingest_measurements(csv_path, space: ConfigurationSpace, system: str | None = None) -> MeasurementTable:
    return read_measurements(csv_path, space, system=system)


# -- plans and the experiment grid --------------------------------------------------


@dataclass
class ExperimentPlan:
    system: Mapping
    learners: Sequence[str] = LEARNER_IDS
    binary: Sequence[str] = BINARY_STRATEGIES
    numeric: Sequence[str] = NUMERIC_STRATEGIES
    seeds: Sequence[int] = tuple(range(10))
    budget: int = 100
    folds: int = 5
    master_seed: int = 0
    tune_seed: int | None = None  # None: tuning seeds derive from master_seed
    ofat_levels: int = 5
    cci_alpha: float = 0.5
    dod_restarts: int = 5
    exclude_learning_set: bool = False
    output: str | None = None
    hyperparam_file: str | None = None

    def __post_init__(self):
        for name in ("learners", "binary", "numeric", "seeds"):
            vals = list(getattr(self, name))
            if not vals:
                raise HarnessError(f"plan has an empty {name} list")
            if len(set(vals)) != len(vals):
                raise HarnessError(f"plan lists duplicate {name}")
            setattr(self, name, tuple(vals))
        for lid in self.learners:
            if lid not in LEARNER_IDS:
                raise HarnessError(f"unknown learner {lid!r}")
        if self.budget < 1 or self.folds < 2:
            raise HarnessError("budget must be >= 1 and folds >= 2")

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentPlan":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise HarnessError(f"unknown plan keys: {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))


def load_plan(path) -> ExperimentPlan:
    with open(path) as fh:
        plan = ExperimentPlan.from_dict(json.load(fh))
    base = Path(path).parent
    sysd = dict(plan.system)
    for key in ("space", "measurements"):
        if key in sysd and not os.path.isabs(sysd[key]):
            sysd[key] = str(base / sysd[key])
    plan.system = sysd
    return plan


def load_system(system: Mapping) -> tuple[ConfigurationSpace, MeasurementTable]:
    if "synthetic" in system:
        space, _model, table = generate_synthetic_system(SyntheticSystemSpec.from_dict(system["synthetic"]))
        return space, table
    if "space" in system and "measurements" in system:
        space = load_space(system["space"])
        return space, ingest_measurements(system["measurements"], space, system.get("name"))
    raise HarnessError("system needs either 'synthetic' or both 'space' and 'measurements'")


@dataclass
class _RunResult:
    error: float
    size: int
    product: int
    filtered: int
    cv_error: float
    hp: dict
    status: str = "ok"
    trials: str = ""


class _Context:
    """Per-process state: the system and a cache of sub-space samples."""

    def __init__(self, plan: ExperimentPlan):
        self.plan = plan
        self.space, self.table = load_system(plan.system)
        self.hp_space = load_hyperparam_space(plan.hyperparam_file)
        self._samples: dict = {}

    def sample(self, kind: str, sid: str, seed_value: int):
        key = (kind, sid, seed_value if is_random_strategy(sid) else None)
        if key not in self._samples:
            seed = derive_seed(self.plan.master_seed, sid, key[2])
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", binsample.SamplingWarning)
                    if kind == "binary":
                        out = sample_binary_strategy(self.space, sid, seed)
                    else:
                        p = self.plan
                        out = sample_numeric_strategy(self.space, sid, seed, p.ofat_levels, p.cci_alpha,
                                                      p.dod_restarts)
            except (ValueError, ArithmeticError) as exc:
                out = exc
            self._samples[key] = out
        out = self._samples[key]
        if isinstance(out, Exception):
            raise out
        return out

    def run(self, learner: str, b: str, n: str, seed_value: int) -> _RunResult:
        p = self.plan
        try:
            ls = build_learning_set(self.sample("binary", b, seed_value), self.sample("numeric", n, seed_value),
                                    self.space)
        except (ValueError, ArithmeticError) as exc:
            return _RunResult(math.inf, 0, 0, 0, math.nan, {}, f"sampling failed: {exc}")
        X = ls.matrix(self.space.option_names)
        try:
            idx = self.table.lookup(X)
        except KeyError:
            return _RunResult(math.inf, len(X), ls.params["product_size"], ls.params["filtered"], math.nan, {},
                              "learning set contains unmeasured configurations")
        y = self.table.y[idx]
        prod, filt = ls.params["product_size"], ls.params["filtered"]
        root = p.master_seed if p.tune_seed is None else p.tune_seed
        tune_seed = derive_seed(root, "tune", learner, b, n, seed_value)
        folds = min(p.folds, len(y))
        hp, cv, trials = None, math.nan, ""
        if folds >= 2:
            hp, log = random_search(learner, self.space, X, y, self.hp_space, folds, p.budget, tune_seed)
            cv = min(t.cv_error for t in log)
            trials = trials_to_csv(log)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                with np.errstate(all="ignore"):
                    model = train(learner, self.space, X, y, hp)
                    if p.exclude_learning_set:
                        keep = np.ones(len(self.table), dtype=bool)
                        keep[idx] = False
                        Xe, ye = self.table.X[keep], self.table.y[keep]
                    else:
                        Xe, ye = self.table.X, self.table.y
                    pred = model.predict_rows(Xe)
            if not np.all(np.isfinite(pred)):
                raise ValueError("non-finite predictions")
            err = mean_relative_error(ye, pred)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            return _RunResult(math.inf, len(y), prod, filt, cv, dict(hp or {}), f"training failed: {exc}", trials)
        return _RunResult(err, len(y), prod, filt, cv, dict(model.hp), "ok", trials)


_WORKER_CTX: _Context | None = None


def _init_worker(plan_dict):
    global _WORKER_CTX
    _WORKER_CTX = _Context(ExperimentPlan.from_dict(plan_dict))


def _run_job(job):
    return job, _WORKER_CTX.run(*job)


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("CONFPERF_WORKERS", "1")))
    except ValueError:
        return 1


def plan_jobs(plan: ExperimentPlan) -> list[tuple]:
    jobs = []
    for learner in plan.learners:
        for b in plan.binary:
            for n in plan.numeric:
                seeds = plan.seeds if (is_random_strategy(b) or is_random_strategy(n)) else plan.seeds[:1]
                jobs.extend((learner, b, n, s) for s in seeds)
    return jobs


def run_experiment(plan: ExperimentPlan, workers: int | None = None, trial_log: list | None = None
                   ) -> list[ExperimentCell]:
    """Run the whole grid; random-strategy cells average over the plan's seeds.

    Results do not depend on the worker count (``CONFPERF_WORKERS`` by default).
    """
    workers = _worker_count() if workers is None else workers
    jobs = plan_jobs(plan)
    ctx = _Context(plan)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(plan.to_dict(),)) as ex:
            results = dict(ex.map(_run_job, jobs, chunksize=4))
    else:
        results = {job: ctx.run(*job) for job in jobs}
    cells = []
    system, total = ctx.table.system, len(ctx.table)
    for learner in plan.learners:
        for b in plan.binary:
            for n in plan.numeric:
                runs = [(job, results[job]) for job in jobs if job[:3] == (learner, b, n)]
                errs = [r.error for _, r in runs]
                bad = [r.status for _, r in runs if r.status != "ok"]
                first = runs[0][1]
                cells.append(ExperimentCell(
                    learner=learner, binary=b, numeric=n, system=system,
                    learning_set_size=int(round(np.mean([r.size for _, r in runs]))),
                    mean_error=float(np.mean(errs)) if not bad else math.inf,
                    product_size=int(round(np.mean([r.product for _, r in runs]))),
                    filtered=int(round(np.mean([r.filtered for _, r in runs]))),
                    system_size=total, n_runs=len(runs),
                    cv_error=float(np.mean([r.cv_error for _, r in runs])),
                    hyperparams=json.dumps(first.hp, sort_keys=True),
                    status="ok" if not bad else bad[0]))
                if trial_log is not None:
                    for job, r in runs:
                        trial_log.append((job, r.trials))
    return sorted(cells, key=lambda c: _cell_order(c, plan))


def _cell_order(c: ExperimentCell, plan: ExperimentPlan):
    return (c.system, plan.learners.index(c.learner), plan.binary.index(c.binary), plan.numeric.index(c.numeric))


# -- files ------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def cells_to_csv(cells: Sequence[ExperimentCell]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CELL_COLUMNS)
    for c in cells:
        w.writerow([_fmt(getattr(c, k)) for k in CELL_COLUMNS])
    return out.getvalue()


def read_cells(path) -> list[ExperimentCell]:
    ints = {"learning_set_size", "product_size", "filtered", "system_size", "n_runs"}
    floats = {"mean_error", "cv_error"}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CELL_COLUMNS:
            raise HarnessError(f"{path}: expected columns {','.join(CELL_COLUMNS)}")
        cells = []
        for rec in reader:
            kw = {k: int(v) if k in ints else float(v) if k in floats else v for k, v in rec.items()}
            cells.append(ExperimentCell(**kw))
    return cells


def trials_log_csv(trial_log) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["learner", "binary", "numeric", "seed", "trial", "params", "fold_errors", "mean", "error"])
    for (learner, b, n, s), text in trial_log:
        for rec in list(csv.reader(io.StringIO(text)))[1:]:
            w.writerow([learner, b, n, s] + rec)
    return out.getvalue()


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


def _write(path: Path, text: str):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _ordered(values, preferred):
    vals = set(values)
    return [v for v in preferred if v in vals] + sorted(vals - set(preferred))


def nested_matrix_csv(cells: Sequence[ExperimentCell], dimension: str) -> str:
    """Pairwise error differences (row minus column) per inner cell; raw errors on the diagonal.

    Negative values mean the row entry is more accurate.
    """
    dims = ("learner", "binary", "numeric")
    inner = [d for d in dims if d != dimension]
    prefs = {"learner": LEARNER_IDS, "binary": BINARY_STRATEGIES, "numeric": NUMERIC_STRATEGIES}
    err = {(c.system, getattr(c, dimension), getattr(c, inner[0]), getattr(c, inner[1])): c.mean_error
           for c in cells}
    outer = _ordered({getattr(c, dimension) for c in cells}, prefs[dimension])
    in0 = _ordered({getattr(c, inner[0]) for c in cells}, prefs[inner[0]])
    in1 = _ordered({getattr(c, inner[1]) for c in cells}, prefs[inner[1]])
    systems = sorted({c.system for c in cells})
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["system", "row", "column", inner[0], inner[1], "value"])
    for s in systems:
        for r in outer:
            for col in outer:
                for a in in0:
                    for b in in1:
                        er, ec = err.get((s, r, a, b)), err.get((s, col, a, b))
                        if er is None or ec is None:
                            continue
                        w.writerow([s, r, col, a, b, repr(float(er if r == col else er - ec))])
    return out.getvalue()


def violin_data(cells: Sequence[ExperimentCell]) -> dict:
    out = {}
    for dim in ("learner", "binary", "numeric"):
        groups = {}
        for c in cells:
            if math.isfinite(c.mean_error):
                groups.setdefault(getattr(c, dim), []).append(c.mean_error)
        out[dim] = {k: {"errors": sorted(v), "mean": float(np.mean(v)), "median": float(np.median(v))}
                    for k, v in sorted(groups.items())}
    return out


def pareto_csv(cells: Sequence[ExperimentCell]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["system", "rank", "learner", "binary", "numeric", "relative_size", "mean_error"])
    for s in sorted({c.system for c in cells}):
        pts = [ParetoPoint(f"{c.learner}|{c.binary}|{c.numeric}", c.learning_set_size / c.system_size,
                           c.mean_error)
               for c in cells if c.system == s and math.isfinite(c.mean_error) and c.system_size > 0
               and 0 < c.learning_set_size <= c.system_size]
        if not pts:
            continue
        for rank, p in enumerate(pareto_front(pts), start=1):
            w.writerow([s, rank, *p.combo.split("|"), repr(p.relative_size), repr(p.mean_error)])
    return out.getvalue()


def significance_csv(cells: Sequence[ExperimentCell], dimension: str) -> str:
    cmp_ = compare(cells, dimension)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["row", "column", "p_value", "delta", "magnitude", "n_pairs"])
    for i, r in enumerate(cmp_.names):
        for j, c in enumerate(cmp_.names):
            if i == j:
                continue
            w.writerow([r, c, repr(float(cmp_.p_value[i, j])), repr(float(cmp_.delta[i, j])), cmp_.magnitude[i][j],
                        int(cmp_.n_pairs[i, j])])
    return out.getvalue()


def research_questions(cells: Sequence[ExperimentCell]) -> dict:
    finite = [c for c in cells if math.isfinite(c.mean_error)]
    b21, n21 = rq2_1(finite)
    b22, n22 = rq2_2(finite)
    combo = rq3_1(finite)

    def ranges(by):
        return {"|".join(k): v for k, v in stability(finite, by).items()}

    return {
        "rq1_1_best_learner": rq1_1(finite),
        "rq1_2_most_stable_learner": rq1_2(finite),
        "rq2_1_best_binary": b21,
        "rq2_1_best_numeric": n21,
        "rq2_2_most_stable_binary": b22,
        "rq2_2_most_stable_numeric": n22,
        "rq3_1_best_combination": list(combo) if combo else None,
        "stability_learner": ranges(("learner", "system")),
        "stability_binary": ranges(("binary", "system")),
        "stability_numeric": ranges(("numeric", "system")),
    }


def emit_report(cells: Sequence[ExperimentCell], out_dir) -> list[Path]:
    """Write nested matrices, violin data, Pareto listing, significance tables and RQ answers."""
    if not cells:
        raise HarnessError("no cells to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise HarnessError(f"cannot write to {out}")
    written = []
    for dim in ("learner", "binary", "numeric"):
        written.append(out / f"nested_{dim}.csv")
        _write(written[-1], nested_matrix_csv(cells, dim))
        written.append(out / f"significance_{dim}.csv")
        _write(written[-1], significance_csv(cells, dim))
    written.append(out / "violin.json")
    _write(written[-1], json.dumps(_json_safe(violin_data(cells)), indent=1, sort_keys=True) + "\n")
    written.append(out / "pareto.csv")
    _write(written[-1], pareto_csv(cells))
    written.append(out / "rq.json")
    _write(written[-1], json.dumps(_json_safe(research_questions(cells)), indent=1, sort_keys=True) + "\n")
    return written


def write_run(cells: Sequence[ExperimentCell], out_dir, trial_log=None) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "cells.csv", cells_to_csv(cells))
    files = [out / "cells.csv"]
    if trial_log is not None:
        _write(out / "trials.csv", trials_log_csv(trial_log))
        files.append(out / "trials.csv")
    return files + emit_report(cells, out)
