"""Chain specifications, the analyze/certify/diagnose pipelines and report assembly.

Pipelines return ``(report, exit_code)``. Exit codes: 0 success, 2 assumption
failure (reducible or periodic kernel, no geometric decay, start outside the small set), 3 a violated verdict or
failed diagnostic, 4 budget or parse problems.
"""

from __future__ import annotations

import copy
import datetime as _dt
import hashlib
import json
import logging
from dataclasses import dataclass
from importlib import resources

import jsonschema
import numpy as np

from . import __version__
from .bound import BetaResult, iid_tail_bound, markov_tail_bound
from .diagnostics import DIAG_CAP, lemma1_batch, run_diagnostics
from .ergodicity import (
    ErgodicityCertificate, default_horizon, fit_ergodicity, profile_csv, slem, tv_decay_profile,
)
from .errors import (
    AssumptionError, BudgetExceeded, ErgocertError, SpecParseError, StartNotInC, TooLargeToEnumerate,
)
from .exact import PathLaw, exact_tails
from .functionals import BoundedDifferenceFunctional, additive, bd_check, occupation, sup_of_class, tabulated
from .hitting import DriftCertificate, optimize_drift, u_max
from .kernel import Distribution, MarkovKernel, SmallSet, check_h1, stationary_distribution, validate_kernel
from .montecarlo import RNG_DESCRIPTION, SampleSpec, mc_tails

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_ASSUMPTION, EXIT_VIOLATED, EXIT_INPUT = 0, 2, 3, 4
DEFAULT_GRID = 64


def _schema(name: str) -> dict:
    return json.loads(resources.files("ergocert").joinpath("schemas", name).read_text())


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def dump_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if v != v or v in (float("inf"), float("-inf")):
            return None
        return v
    return obj


@dataclass(frozen=True, eq=False)
class ChainSpec:
    raw: dict
    kernel: MarkovKernel
    small_set: SmallSet
    start: int
    functional: BoundedDifferenceFunctional
    t_grid: tuple[float, ...]
    mc: SampleSpec | None
    erg_horizon: int | None
    r_override: float | None
    grid_size: int

    @property
    def name(self) -> str:
        return self.raw.get("name", "unnamed")

    @property
    def sha256(self) -> str:
        return hashlib.sha256(canonical_json(self.raw).encode()).hexdigest()


def _functional(block: dict, space, n: int) -> BoundedDifferenceFunctional:
    m = space.size
    kind = block["kind"]
    needed = {"additive": "tables", "sup-of-class": "class", "tabulated": "values"}.get(kind)
    if needed and needed not in block:
        raise SpecParseError(f"functional of kind {kind!r} needs a {needed!r} entry")
    if kind == "additive":
        f = additive(block["tables"])
    elif kind == "occupation":
        target = [space.index(s) for s in block.get("target", [])]
        f = occupation(n, m, target, block.get("weights"))
    elif kind == "sup-of-class":
        f = sup_of_class(n, block["class"])
    else:
        f = tabulated(block["values"])
    if f.n != n or f.m != m:
        raise SpecParseError(f"functional acts on {f.m} states x {f.n} steps, spec has {m} x {n}")
    if "c" in block:
        c = np.asarray(block["c"], dtype=float)
        if c.shape != (n,):
            raise SpecParseError(f"explicit c has {c.size} entries, horizon is {n}")
        try:
            bad = bd_check(f, c)
        except TooLargeToEnumerate:
            bad = None
            if np.any(c < f.c):
                raise SpecParseError("explicit c is below the constructor bound and cannot be "
                                     "verified exhaustively") from None
        if bad is not None:
            raise SpecParseError(f"explicit c fails the bounded-difference check at coordinate {bad.i}")
        f = BoundedDifferenceFunctional(f.kind, f.n, f.m, c, f.params)
    return f


def parse_spec(data: dict) -> ChainSpec:
    try:
        jsonschema.validate(data, _schema("chain_spec.schema.json"))
    except jsonschema.ValidationError as exc:
        raise SpecParseError(f"invalid chain spec: {exc.message}") from None
    P = validate_kernel(data["matrix"], data["states"])
    space = P.space
    C = SmallSet.from_labels(space, data["small_set"])
    start = space.index(data["start"])
    n = int(data["horizon"])
    ts = tuple(float(t) for t in data["t_grid"])
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise SpecParseError("t_grid must be strictly increasing")
    f = _functional(data["functional"], space, n)
    mc = SampleSpec(**data["mc"]) if "mc" in data else None
    erg = data.get("ergodicity", {})
    return ChainSpec(raw=copy.deepcopy(data), kernel=P, small_set=C, start=start, functional=f,
                     t_grid=ts, mc=mc, erg_horizon=erg.get("horizon"), r_override=erg.get("r"),
                     grid_size=int(data.get("grid_size", DEFAULT_GRID)))


def load_spec(path) -> ChainSpec:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecParseError(f"cannot read spec {path}: {exc}") from None
    return parse_spec(data)


def _base_report(command: str, spec: ChainSpec, seed=None, timestamp: str | None = None) -> dict:
    labels = spec.kernel.space.labels
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "status": "ok",
        "error": None,
        "warnings": [],
        "spec": {
            "name": spec.name,
            "sha256": spec.sha256,
            "states": list(labels),
            "small_set": [labels[k] for k in spec.small_set.indices],
            "start": labels[spec.start],
            "horizon": spec.functional.n,
            "functional": spec.functional.describe(),
        },
        "provenance": {
            "tool": "ergocert",
            "version": __version__,
            "seed": seed,
            "rng": RNG_DESCRIPTION,
            "spec_sha256": spec.sha256,
            "generated_at": timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        },
    }


@dataclass
class Analysis:
    report: dict
    exit_code: int
    pi: Distribution | None = None
    erg: ErgodicityCertificate | None = None
    drift: DriftCertificate | None = None
    beta: BetaResult | None = None


def _fail(report: dict, exc: ErgocertError) -> int:
    report["status"] = "assumption-failure" if isinstance(exc, AssumptionError) else "failed"
    report["error"] = f"{type(exc).__name__}: {exc}"
    return exc.exit_code


def _analysis(spec: ChainSpec, command: str, seed=None, timestamp=None) -> Analysis:
    report = _base_report(command, spec, seed, timestamp)
    P, C = spec.kernel, spec.small_set
    h1 = check_h1(P)
    report["h1"] = {"irreducible": h1.irreducible, "aperiodic": h1.aperiodic, "period": h1.period}
    if spec.start not in C:
        report["warnings"].append(
            "start state is outside the small set; the concentration bound is only proved for "
            "starts in the small set")
    if not h1.aperiodic:
        report["status"] = "assumption-failure"
        report["error"] = ("kernel is not irreducible" if not h1.irreducible
                           else f"kernel is periodic with period {h1.period}")
        return Analysis(_plain(report), EXIT_ASSUMPTION)
    try:
        pi = stationary_distribution(P)
        report["stationary"] = pi.weights
        horizon = spec.erg_horizon
        if horizon is None:
            horizon = max(default_horizon(slem(P, pi)), spec.functional.n)
        erg = fit_ergodicity(P, C, pi, horizon, spec.r_override)
        report["ergodicity"] = erg.as_dict()
        if erg.r <= 1e-6 and erg.mode == "empirical":
            report["warnings"].append("r clamped to the 1e-6 floor (chain mixes in one step)")
        drift, beta = optimize_drift(P, C, erg, spec.grid_size)
        report["drift"] = {**drift.as_dict(), "u_max": u_max(P, C)}
        report["beta"] = beta.as_dict()
    except ErgocertError as exc:
        code = _fail(report, exc)
        return Analysis(_plain(report), code)
    return Analysis(_plain(report), EXIT_OK, pi, erg, drift, beta)


def analyze(spec: ChainSpec, timestamp: str | None = None) -> tuple[dict, int]:
    a = _analysis(spec, "analyze", timestamp=timestamp)
    return a.report, a.exit_code


def verdict(bound: float, tail: float, ci_low: float | None, ci_high: float | None) -> str:
    if ci_low is None:
        return "HOLDS" if tail <= bound else "VIOLATED"
    if ci_high <= bound:
        return "HOLDS"
    if ci_low > bound:
        return "VIOLATED"
    return "INCONCLUSIVE"


def certify(spec: ChainSpec, seed: int | None = None, samples: int | None = None,
            timestamp: str | None = None) -> tuple[dict, int]:
    mc = spec.mc or SampleSpec()
    if seed is not None or samples is not None:
        mc = SampleSpec(seed=mc.seed if seed is None else seed,
                        samples=mc.samples if samples is None else samples, streams=mc.streams)
    a = _analysis(spec, "certify", seed=mc.seed, timestamp=timestamp)
    report = a.report
    if a.exit_code != EXIT_OK:
        return report, a.exit_code
    P, f, x = spec.kernel, spec.functional, spec.start
    if x not in spec.small_set:
        exc = StartNotInC("certification refused: move the start state into the small set")
        return report, _fail(report, exc)
    rows = []
    try:
        law = PathLaw.from_state(P, x, f.n)
        _, tails = exact_tails(law, f, spec.t_grid)
        estimates = [None] * len(tails)
        source = "exact"
    except BudgetExceeded:
        estimates = mc_tails(P, x, f, spec.t_grid, mc)
        tails = [e.point for e in estimates]
        source = "monte-carlo"
    for t, tail, est in zip(spec.t_grid, tails, estimates):
        mb = markov_tail_bound(a.beta, t, f.c).value
        ib = iid_tail_bound(t, f.c).value
        lo = None if est is None else est.ci_low
        hi = None if est is None else est.ci_high
        rows.append({
            "t": t, "markov_bound": mb, "iid_bound": ib, "source": source, "tail": float(tail),
            "ci_low": lo, "ci_high": hi,
            "centering": "exact" if est is None else est.centering,
            "verdict": verdict(mb, tail, lo, hi), "iid_verdict": verdict(ib, tail, lo, hi),
        })
    report["tails"] = rows
    counts = {v: sum(r["verdict"] == v for r in rows) for v in ("HOLDS", "INCONCLUSIVE", "VIOLATED")}
    report["summary"] = counts
    if counts["VIOLATED"]:
        report["status"] = "violated"
        return _plain(report), EXIT_VIOLATED
    return _plain(report), EXIT_OK


def tails_csv(report: dict) -> str:
    lines = ["t,markov_bound,iid_bound,tail,ci_low,ci_high"]
    for r in report.get("tails", []):
        cells = [r["t"], r["markov_bound"], r["iid_bound"], r["tail"], r["ci_low"], r["ci_high"]]
        lines.append(",".join("" if v is None else repr(float(v)) for v in cells))
    return "\n".join(lines) + "\n"


def decay_csv(spec: ChainSpec, analysis_report: dict) -> str:
    e = analysis_report["ergodicity"]
    cert = ErgodicityCertificate(L=e["L"], r=e["r"], horizon=e["horizon"], mode=e["mode"],
                                 residual=e["residual"])
    pi = Distribution(spec.kernel.space, analysis_report["stationary"])
    return profile_csv(tv_decay_profile(spec.kernel, spec.small_set, pi, cert.horizon), cert)


def diagnose(spec: ChainSpec, lemma1_count: int = 0, seed: int = 0, lemma1_only: bool = False,
             timestamp: str | None = None) -> tuple[dict, int]:
    if lemma1_only:
        report = _base_report("diagnose", spec, seed, timestamp)
        res = lemma1_batch(lemma1_count or 1000, seed)
        report["diagnostics"] = [res.as_dict()]
        report["status"] = "ok" if res.passed else "violated"
        return _plain(report), EXIT_OK if res.passed else EXIT_VIOLATED
    a = _analysis(spec, "diagnose", seed=seed, timestamp=timestamp)
    report = a.report
    if a.exit_code != EXIT_OK:
        return report, a.exit_code
    P, f = spec.kernel, spec.functional
    if P.size ** f.n > DIAG_CAP:
        exc = BudgetExceeded(f"{P.size}^{f.n} paths exceeds the diagnostics budget {DIAG_CAP}; "
                             "shrink the horizon n")
        return report, _fail(report, exc)
    if spec.start not in spec.small_set:
        return report, _fail(report, StartNotInC("diagnostics need a start state in the small set"))
    results = run_diagnostics(P, a.pi, spec.small_set, spec.start, f, a.erg, a.beta,
                              lemma1_count=lemma1_count, seed=seed)
    report["diagnostics"] = [r.as_dict() for r in results]
    ok = all(r.passed for r in results)
    report["status"] = "ok" if ok else "violated"
    return _plain(report), EXIT_OK if ok else EXIT_VIOLATED


def validate_report(report: dict) -> None:
    jsonschema.validate(report, _schema("report.schema.json"))
