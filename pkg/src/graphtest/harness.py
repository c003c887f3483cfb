"""Monte-Carlo power/size experiments on the two-block stochastic block model.

Every (n, m, rho, epsilon) combination is a *cell*.  Trial ``t`` of cell
``c`` samples both populations from the stream ``(seed, c, t)`` and runs
every selected test on that same sample; test ``j`` gets its own seed
derived from ``(seed, c, t, j, r)``.  Results therefore do not depend on
the number of worker processes or on scheduling.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .models import SbmSpec, derive_rng, sample_population, sbm_population_adjacency
from .multi import BootstrapConfig, test_asymp_chi2, test_asymp_normal, test_boot
from .single import test_asymp_tw, test_boot_single

MULTI_TESTS = ("asymp-normal", "asymp-chi2", "boot-spectral", "boot-frobenius")
SINGLE_TESTS = ("asymp-tw", "boot-ase", "boot-epa")
ALL_TESTS = MULTI_TESTS + SINGLE_TESTS

CSV_COLUMNS = ["test", "hypothesis", "n", "m", "rho", "epsilon", "r",
               "trials", "rejections", "rate", "skipped"]


@dataclass
class ExperimentSpec:
    """Sweep over the two-block SBM with within-block probability ``p``
    (``p + epsilon`` in the second population) and across-block ``q``, all
    scaled by ``rho``.  ``epsilons`` lists the alternatives; the null cell
    (epsilon = 0) is added when ``"H0"`` is among ``hypotheses``."""

    ns: list[int]
    ms: list[int]
    tests: list[str]
    epsilons: list[float] = field(default_factory=lambda: [0.04])
    rhos: list[float] = field(default_factory=lambda: [1.0])
    ranks: list[int] = field(default_factory=lambda: [2])
    p: float = 0.1
    q: float = 0.05
    trials: int = 1000
    alpha: float = 0.05
    b: int = 200
    seed: int = 0
    hypotheses: list[str] = field(default_factory=lambda: ["H0", "H1"])
    family: str = "sbm2"

    def __post_init__(self):
        if self.family != "sbm2":
            raise ValueError(f"unsupported model family {self.family!r}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        unknown = set(self.tests) - set(ALL_TESTS)
        if unknown:
            raise ValueError(f"unknown tests: {sorted(unknown)}")
        if set(self.hypotheses) - {"H0", "H1"} or not self.hypotheses:
            raise ValueError("hypotheses must be a nonempty subset of ['H0', 'H1']")
        if any(n < 2 for n in self.ns) or any(m < 1 for m in self.ms):
            raise ValueError("need n >= 2 and m >= 1")
        if any(r < 1 for r in self.ranks) or any(rho <= 0 for rho in self.rhos):
            raise ValueError("ranks and rhos must be positive")
        for rho, eps in itertools.product(self.rhos, [0.0, *self.epsilons]):
            if max(rho * (self.p + eps), rho * self.q) > 1.0 or min(self.p + eps, self.q) < 0.0:
                raise ValueError(f"probabilities leave [0, 1] at rho={rho}, epsilon={eps}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        return cls(**d)

    def cells(self) -> list[tuple[int, int, float, float, str]]:
        hyp = []
        if "H0" in self.hypotheses:
            hyp.append((0.0, "H0"))
        if "H1" in self.hypotheses:
            hyp.extend((e, "H1") for e in self.epsilons)
        return [(n, m, rho, eps, h) for n, m, rho, (eps, h)
                in itertools.product(self.ns, self.ms, self.rhos, hyp)]


@dataclass
class PowerRow:
    test: str
    hypothesis: str
    n: int
    m: int
    rho: float
    epsilon: float
    r: int | None
    trials: int
    rejections: int
    wall_time: float = 0.0
    skipped: str = ""

    @property
    def rate(self) -> float:
        return self.rejections / self.trials if self.trials else 0.0


@dataclass
class PowerTable:
    rows: list[PowerRow]

    def find(self, test: str, **kw) -> PowerRow:
        hits = [r for r in self.rows if r.test == test and all(getattr(r, k) == v for k, v in kw.items())]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match {test} {kw}")
        return hits[0]

    def timing(self) -> dict[str, float]:
        """Mean seconds per trial for each test, over all cells that ran."""
        out = {}
        for test, rows in itertools.groupby(sorted(self.rows, key=lambda r: r.test), key=lambda r: r.test):
            rows = [r for r in rows if not r.skipped]
            trials = sum(r.trials for r in rows)
            if trials:
                out[test] = sum(r.wall_time for r in rows) / trials
        return out

    def to_records(self, include_timing: bool = False) -> list[dict]:
        recs = []
        for row in self.rows:
            rec = {c: getattr(row, c) for c in CSV_COLUMNS}
            if include_timing:
                rec["wall_time"] = row.wall_time
            recs.append(rec)
        return recs

    def to_json(self, spec: ExperimentSpec | None = None, include_timing: bool = False) -> str:
        doc = {"rows": self.to_records(include_timing)}
        if spec is not None:
            doc["spec"] = spec.to_dict()
        return json.dumps(doc, sort_keys=True, indent=2)


def _skip_reason(test: str, m: int) -> str:
    if test in MULTI_TESTS and m < 2:
        return "needs m >= 2"
    if test in SINGLE_TESTS and m != 1:
        return "needs m = 1"
    return ""


def _test_seed(*keys: int) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)[0])


def _run_one(test: str, pop_g, pop_h, r: int, alpha: float, b: int, seed: int) -> bool:
    if test == "asymp-normal":
        return test_asymp_normal(pop_g, pop_h, alpha).reject
    if test == "asymp-chi2":
        return test_asymp_chi2(pop_g, pop_h, alpha).reject
    if test in ("boot-spectral", "boot-frobenius"):
        return test_boot(pop_g, pop_h, test.split("-")[1], alpha, BootstrapConfig(b, seed)).reject
    if test == "asymp-tw":
        return test_asymp_tw(pop_g[0], pop_h[0], r, alpha, seed=seed).reject
    return test_boot_single(pop_g[0], pop_h[0], test.split("-")[1], r, alpha, BootstrapConfig(b, seed)).reject


def _plan(spec: ExperimentSpec):
    """Runnable (test index, test, r) triples per cell."""
    plans = []
    for n, m, rho, eps, hyp in spec.cells():
        runs = []
        for j, test in enumerate(spec.tests):
            if _skip_reason(test, m):
                continue
            for r in (spec.ranks if test in SINGLE_TESTS else [0]):
                runs.append((j, test, r))
        plans.append(runs)
    return plans


def _trial(job):
    spec, cell_index, trial, runs = job
    n, m, rho, eps, _ = spec.cells()[cell_index]
    with threadpool_limits(1):
        p = sbm_population_adjacency(SbmSpec.two_block(n, spec.p, spec.q, 0.0, rho))
        q = p if eps == 0.0 else sbm_population_adjacency(SbmSpec.two_block(n, spec.p, spec.q, eps, rho))
        rng = derive_rng(spec.seed, cell_index, trial)
        pop_g = sample_population(p, m, rng)
        pop_h = sample_population(q, m, rng)
        out = []
        for j, test, r in runs:
            if r and r > n:
                out.append((j, r, None, 0.0))
                continue
            t0 = time.perf_counter()
            rej = _run_one(test, pop_g, pop_h, r, spec.alpha, spec.b, _test_seed(spec.seed, cell_index, trial, j, r))
            out.append((j, r, bool(rej), time.perf_counter() - t0))
    return cell_index, out


def run_experiment(spec: ExperimentSpec, threads: int = 1, progress=None) -> PowerTable:
    """Tabulate rejection rates for every (test, cell, rank).

    ``threads`` > 1 spreads trials over that many worker processes; the
    table is identical either way.  ``progress``, if given, is called with
    the number of finished trials.
    """
    cells = spec.cells()
    plans = _plan(spec)
    counts: dict[tuple, list] = {}
    jobs = [(spec, c, t, plans[c]) for c in range(len(cells)) for t in range(spec.trials) if plans[c]]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = ex.map(_trial, jobs, chunksize=max(1, len(jobs) // (8 * threads)))
            results = list(_tick(results, progress))
    else:
        results = list(_tick(map(_trial, jobs), progress))
    for c, out in results:
        for j, r, rej, dt in out:
            acc = counts.setdefault((c, j, r), [0, 0, 0.0, ""])
            if rej is None:
                acc[3] = f"rank {r} exceeds n"
                continue
            acc[0] += 1
            acc[1] += int(rej)
            acc[2] += dt

    rows = []
    for c, (n, m, rho, eps, hyp) in enumerate(cells):
        for j, test in enumerate(spec.tests):
            reason = _skip_reason(test, m)
            ranks = spec.ranks if test in SINGLE_TESTS else [None]
            for r in ranks:
                if reason:
                    rows.append(PowerRow(test, hyp, n, m, rho, eps, r, 0, 0, 0.0, reason))
                    continue
                trials, rej, dt, why = counts.get((c, j, r or 0), [0, 0, 0.0, ""])
                rows.append(PowerRow(test, hyp, n, m, rho, eps, r, trials, rej, dt, why))
    return PowerTable(rows)


def _tick(it, progress):
    for k, item in enumerate(it, 1):
        if progress is not None:
            progress(k)
        yield item


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def table_to_csv(table: PowerTable, include_timing: bool = False) -> str:
    cols = CSV_COLUMNS + (["wall_time"] if include_timing else [])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for rec in table.to_records(include_timing):
        w.writerow([_fmt(rec[c]) for c in cols])
    return buf.getvalue()


def emit_csv(table: PowerTable, path, include_timing: bool = False) -> None:
    """Write one row per (test, cell, hypothesis); see ``CSV_COLUMNS``.

    Rates are written with full float precision.  Wall times are left out
    unless requested, which keeps the file byte-identical across runs.
    """
    Path(path).write_text(table_to_csv(table, include_timing), encoding="utf-8")


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
