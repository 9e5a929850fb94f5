"""Command-line front end: ingestion, subcommand dispatch, reports.

Exit statuses: 0 success, 2 for infeasible-model findings (violated
testable conditions, infeasible bounds, audit violations), 1 for errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from . import fixtures
from .bounds import (
    bounds_outcome_nondiff,
    bounds_outcome_strongmono,
    bounds_treatment_nondiff,
    bounds_treatment_strongmono,
)
from .core import ObservedCounts, from_counts
from .errors import MisivError
from .identify import NondiffRates, naive_cace
from .inference import CiConfig, ci_union, ci_wald, test_inequalities
from .latentmap import StrongMonoRates, forward_map
from .numopt import SearchConfig, numeric_bounds
from .sensitivity import RateBox, sensitivity_region
from .sim import ScenarioSpec, _sample_model, _sample_rates, sharpness_audit, simulate_observed

__all__ = ["RunConfig", "run", "main"]

SEED_ENV_VAR = "MISIV_SEED"

_CLOSED_FORM = {
    (frozenset("y"), False): ("thm2", bounds_outcome_nondiff),
    (frozenset("d"), False): ("thm3", bounds_treatment_nondiff),
    (frozenset("y"), True): ("thm4", bounds_outcome_strongmono),
    (frozenset("d"), True): ("thm5", bounds_treatment_strongmono),
}


@dataclass(frozen=True)
class RunConfig:
    """One CLI invocation: the subcommand, its input, and its flags."""

    subcommand: str
    input: str | None = None
    input_format: str | None = None  # csv | json | fixture; None = infer
    options: Mapping = field(default_factory=dict)

    def __post_init__(self):
        known = ("estimate", "bounds", "check", "sensitivity", "ci", "simulate", "audit")
        if self.subcommand not in known:
            raise ValueError(f"unknown subcommand {self.subcommand!r}")
        if self.input is None and self.subcommand not in ("simulate", "audit"):
            raise ValueError(f"{self.subcommand} requires an input path or fixture name")

    def opt(self, name, default=None):
        return self.options.get(name, default)


# --- ingestion ---------------------------------------------------------------


def _counts_from_csv(path: str) -> ObservedCounts:
    cells = [[[0, 0], [0, 0]] for _ in (0, 1)]
    seen_header = False
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if not seen_header:
                header = [c.strip().lower() for c in row]
                if header != ["z", "d", "y", "count"]:
                    raise ValueError(f"{path}:{lineno}: expected header z,d,y,count, got {','.join(row)}")
                seen_header = True
                continue
            if len(row) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
            try:
                z, d, y, n = (int(c.strip()) for c in row)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer field in {','.join(row)}") from None
            if z not in (0, 1) or d not in (0, 1) or y not in (0, 1):
                raise ValueError(f"{path}:{lineno}: z, d, y must each be 0 or 1")
            if n < 0:
                raise ValueError(f"{path}:{lineno}: negative count {n}")
            cells[z][d][y] += n
    if not seen_header:
        raise ValueError(f"{path}:1: empty file, expected header z,d,y,count")
    return ObservedCounts.from_nested(cells)


def _extract_counts(obj):
    """Pull a nested counts block out of a bare table, counts object, or report."""
    if isinstance(obj, list):
        return obj
    if isinstance(obj, dict):
        for key in ("counts", "n"):
            if key in obj:
                return _extract_counts(obj[key])
        if "inputs" in obj:
            return _extract_counts(obj["inputs"])
    raise ValueError("no counts block found in JSON input")


def _counts_from_json(path: str) -> ObservedCounts:
    with open(path) as fh:
        obj = json.load(fh)
    return ObservedCounts.from_nested(_extract_counts(obj))


def _load_counts(config: RunConfig) -> tuple[ObservedCounts, str]:
    src = config.input
    fmt = config.input_format
    if (fmt == "fixture" or fmt is None) and src in fixtures.FIXTURES:
        return fixtures.FIXTURES[src], f"fixture:{src}"
    if fmt == "json" or (fmt is None and src.endswith(".json")):
        return _counts_from_json(src), src
    return _counts_from_csv(src), src


def _recode_counts(counts: ObservedCounts) -> ObservedCounts:
    return ObservedCounts(
        tuple(tuple(tuple(counts.n[z][d][1 - y] for y in (0, 1)) for d in (0, 1)) for z in (0, 1))
    )


# --- report plumbing ----------------------------------------------------------


def _jsonable(v):
    if isinstance(v, Fraction):
        return float(v)
    if isinstance(v, (bool, int, str)) or v is None:
        return v
    if isinstance(v, float):
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, Mapping):
        return {str(k): _jsonable(x) for k, x in v.items() if not callable(x)}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if callable(v):
        return None
    if hasattr(v, "__float__"):
        return float(v)
    if hasattr(v, "__dict__"):
        return {k: _jsonable(x) for k, x in vars(v).items() if not callable(x)}
    return str(v)


def _render_text(obj, precision: int, indent: int = 0, out=None):
    pad = "  " * indent
    for key, val in obj.items():
        if isinstance(val, Mapping):
            out.append(f"{pad}{key}:")
            _render_text(val, precision, indent + 1, out)
        elif isinstance(val, (list, tuple)) and val and isinstance(val[0], Mapping):
            out.append(f"{pad}{key}:")
            for item in val:
                _render_text(item, precision, indent + 1, out)
                out.append("")
        else:
            out.append(f"{pad}{key}: {_fmt_value(val, precision)}")


def _fmt_value(v, precision: int):
    if isinstance(v, bool) or v is None or isinstance(v, (int, str)):
        return v
    if isinstance(v, Fraction):
        v = float(v)
    if isinstance(v, float):
        return f"{v:.{precision}g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(str(_fmt_value(x, precision)) for x in v) + "]"
    if hasattr(v, "__float__"):
        return f"{float(v):.{precision}g}"
    return str(v)


def _emit(report: dict, config: RunConfig) -> None:
    fmt = config.opt("format", "text")
    if fmt == "json":
        print(json.dumps(_jsonable(report), indent=2, sort_keys=False))
    else:
        lines = []
        _render_text(_jsonable(report), int(config.opt("precision", 4)), 0, lines)
        print("\n".join(lines))


def _report_skeleton(config: RunConfig, counts=None, source=None) -> dict:
    inputs = {"source": source, "recode_outcome": bool(config.opt("recode_outcome", False))}
    if counts is not None:
        inputs["counts"] = [[[int(counts.n[z][d][y]) for y in (0, 1)] for d in (0, 1)] for z in (0, 1)]
    inputs["flags"] = {
        k: v for k, v in sorted(config.options.items()) if k not in ("format", "precision") and v is not None
    }
    return {"subcommand": config.subcommand, "inputs": inputs}


def _bounds_result(report) -> dict:
    return {
        "theorem": report.theorem,
        "variable": report.variable,
        "cace_lo": report.cace_lo,
        "cace_hi": report.cace_hi,
        "sn_lo": report.sn_lo,
        "sn_hi": report.sn_hi,
        "sp_lo": report.sp_lo,
        "sp_hi": report.sp_hi,
        "feasible": report.feasible,
        "outcome_coding": "recoded" if report.recoded else "as-given",
        "binding": dict(report.binding) if report.binding else {},
        "intermediates": {k: v for k, v in report.intermediates.items() if not callable(v)},
    }


# --- subcommands ---------------------------------------------------------------


def _mismeasured_set(config: RunConfig) -> frozenset:
    raw = config.opt("mismeasured")
    return frozenset(raw) if raw else frozenset()


def _cmd_estimate(config: RunConfig, counts, report: dict) -> int:
    est = naive_cace(from_counts(counts))
    report["results"] = {
        "naive_cace": est.value,
        "rd_y": est.numerator,
        "rd_d": est.denominator,
        "n": sum(counts.n[z][d][y] for z in (0, 1) for d in (0, 1) for y in (0, 1)),
    }
    return 0


def _cmd_bounds(config: RunConfig, counts, report: dict) -> int:
    mis = _mismeasured_set(config)
    if not mis:
        raise ValueError("bounds requires --mismeasured")
    strong = bool(config.opt("strong_mono", False))
    dist = from_counts(counts)
    key = (mis, strong)
    if key in _CLOSED_FORM:
        _, op = _CLOSED_FORM[key]
        brep = op(dist)
    else:
        cfg = SearchConfig(
            mismeasured=set(mis),
            strong_mono=strong,
            grid_resolution=config.opt("grid"),
        )
        brep = numeric_bounds(dist, cfg)
    report["results"] = _bounds_result(brep)
    return 0 if brep.feasible else 2


def _cmd_check(config: RunConfig, counts, report: dict) -> int:
    variant = {
        "outcome": "outcome-miserr",
        "treatment": "treatment-miserr",
    }.get(config.opt("variant", "balke-pearl"), "balke-pearl")
    tests = test_inequalities(counts, variant)
    rows = [{"name": n, "slack": s, "se": se, "p": p} for n, s, se, p in tests.tests]
    violated = [r["name"] for r in rows if r["slack"] < 0]
    report["results"] = {
        "variant": tests.variant,
        "outcome_coding": "recoded" if tests.recoded else "as-given",
        "tests": rows,
        "skipped": list(tests.skipped),
        "min_p": tests.min_p,
        "bonferroni_p": tests.bonferroni_p,
        "violated": violated,
        "note": tests.note,
    }
    return 2 if violated else 0


def _parse_interval(raw, name: str) -> tuple:
    if raw is None:
        return (1.0, 1.0)
    parts = str(raw).split(",")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ValueError(f"--{name} expects a number or lo,hi pair, got {raw!r}") from None
    if len(vals) == 1:
        return (vals[0], vals[0])
    if len(vals) == 2:
        return (vals[0], vals[1])
    raise ValueError(f"--{name} expects a number or lo,hi pair, got {raw!r}")


def _cmd_sensitivity(config: RunConfig, counts, report: dict) -> int:
    mis = _mismeasured_set(config)
    if len(mis) != 1 or not mis <= {"d", "y"}:
        raise ValueError("sensitivity requires --mismeasured d or --mismeasured y")
    box = RateBox(
        variable=next(iter(mis)),
        sn1=_parse_interval(config.opt("sn1"), "sn1"),
        sn0=_parse_interval(config.opt("sn0"), "sn0"),
        sp1=_parse_interval(config.opt("sp1"), "sp1"),
        sp0=_parse_interval(config.opt("sp0"), "sp0"),
    )
    srep = sensitivity_region(from_counts(counts), box)
    report["results"] = _bounds_result(srep)
    return 0 if srep.feasible else 2


def _ci_config(config: RunConfig) -> CiConfig:
    return CiConfig(
        alpha=float(config.opt("alpha", 0.05)),
        gamma=config.opt("gamma"),
        method=config.opt("method", "delta"),
        bootstrap_reps=int(config.opt("reps", 2000)),
        seed=int(config.opt("seed", 0)),
        grid_points=int(config.opt("grid", 200)),
    )


def _cmd_ci(config: RunConfig, counts, report: dict) -> int:
    cfg = _ci_config(config)
    mis = _mismeasured_set(config)
    if not mis:
        ci = ci_wald(counts, cfg)
    else:
        key = (mis, bool(config.opt("strong_mono", False)))
        if key not in _CLOSED_FORM:
            raise ValueError(
                "union CI covers one mismeasured variable (y or d); "
                f"got mismeasured={''.join(sorted(mis))}"
            )
        ci = ci_union(counts, _CLOSED_FORM[key][0], cfg)
    report["results"] = {
        "lo": ci.lo,
        "hi": ci.hi,
        "alpha": ci.alpha,
        "method": ci.method,
        "meta": dict(ci.meta),
    }
    return 0


def _scenario(config: RunConfig, n_models: int) -> ScenarioSpec:
    return ScenarioSpec(
        seed=int(config.opt("seed", 0)),
        n_models=n_models,
        mismeasured=_mismeasured_set(config),
        strong_mono=bool(config.opt("strong_mono", False)),
    )


def _cmd_simulate(config: RunConfig, report: dict) -> int:
    spec = _scenario(config, n_models=1)
    model = _sample_model(spec, 0)
    drawn = _sample_rates(spec, 0)
    if spec.strong_mono and spec.mismeasured == {"d"}:
        channel = StrongMonoRates(sn_d1=drawn["sn_d"], sp_d1=drawn["sp_d"])
    else:
        channel = NondiffRates(
            sn_d=drawn.get("sn_d", 1),
            sp_d=drawn.get("sp_d", 1),
            sn_y=drawn.get("sn_y", 1),
            sp_y=drawn.get("sp_y", 1),
            sn_z_rev=drawn.get("sn_z", 1),
            sp_z_rev=drawn.get("sp_z", 1),
        )
    n = int(config.opt("n", 10000))
    counts = simulate_observed(model, channel, n, seed=spec.seed)
    exact = forward_map(model, channel)
    report["results"] = {
        "counts": [[[int(counts.n[z][d][y]) for y in (0, 1)] for d in (0, 1)] for z in (0, 1)],
        "n": n,
        "channel_rates": drawn,
        "truth": {
            "cace": model.cace,
            "pz": model.pz,
            "pi": dict(model.pi),
            "naive_cace_exact": naive_cace(exact).value,
        },
    }
    return 0


def _cmd_audit(config: RunConfig, report: dict) -> int:
    mis = _mismeasured_set(config)
    if not mis:
        raise ValueError("audit requires --mismeasured y or --mismeasured d")
    spec = _scenario(config, n_models=int(config.opt("reps", 200)))
    arep = sharpness_audit(spec)
    bad = [r for r in arep.records if not (r.contained and r.sharp)]
    report["results"] = {
        "theorem": arep.theorem,
        "n_models": arep.n_models,
        "containment_violations": arep.containment_violations,
        "sharpness_violations": arep.sharpness_violations,
        "max_lo_gap": arep.max_lo_gap,
        "max_hi_gap": arep.max_hi_gap,
        "violating_records": [vars(r) for r in bad[:10]],
    }
    return 2 if bad else 0


# --- driver --------------------------------------------------------------------


def run(config: RunConfig) -> int:
    """Execute one invocation, print its report, return the exit status."""
    report: dict
    if config.subcommand in ("simulate", "audit"):
        report = _report_skeleton(config)
        status = _cmd_simulate(config, report) if config.subcommand == "simulate" else _cmd_audit(config, report)
        _emit(report, config)
        return status

    counts, source = _load_counts(config)
    if config.opt("recode_outcome", False):
        counts = _recode_counts(counts)
    report = _report_skeleton(config, counts, source)
    handler = {
        "estimate": _cmd_estimate,
        "bounds": _cmd_bounds,
        "check": _cmd_check,
        "sensitivity": _cmd_sensitivity,
        "ci": _cmd_ci,
    }[config.subcommand]
    status = handler(config, counts, report)
    _emit(report, config)
    return status


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="misiv",
        description="Complier-effect estimation, bounds, and diagnostics for "
        "binary instrument/treatment/outcome tables with misclassification.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    default_seed = int(os.environ.get(SEED_ENV_VAR, "0"))

    def add_common(p, needs_input=True):
        if needs_input:
            p.add_argument("input", help="CSV/JSON path, or a bundled fixture name (ex1|ex2|ex3)")
            p.add_argument("--input-format", choices=("csv", "json", "fixture"), default=None)
            p.add_argument("--recode-outcome", action="store_true", help="flip the outcome coding before analysis")
        p.add_argument("--format", choices=("text", "json"), default="text")
        p.add_argument("--precision", type=int, default=4, help="significant digits in text output")

    p = sub.add_parser("estimate", help="naive complier-effect (Wald) estimate")
    add_common(p)

    p = sub.add_parser("bounds", help="closed-form or numeric effect bounds")
    add_common(p)
    p.add_argument("--mismeasured", choices=("z", "d", "y", "zy", "dy", "zd", "zdy"), required=True)
    p.add_argument("--strong-mono", action="store_true")
    p.add_argument("--grid", type=int, default=None, help="numeric search resolution")

    p = sub.add_parser("check", help="testable observable inequalities")
    add_common(p)
    p.add_argument("--variant", choices=("outcome", "treatment", "balke-pearl"), default="balke-pearl")

    p = sub.add_parser("sensitivity", help="effect range over differential-rate intervals")
    add_common(p)
    p.add_argument("--mismeasured", choices=("d", "y"), required=True)
    for nm in ("sn1", "sn0", "sp1", "sp0"):
        p.add_argument(f"--{nm}", default=None, help=f"{nm} value or lo,hi interval (default 1)")

    p = sub.add_parser("ci", help="confidence interval (Wald, or union when --mismeasured given)")
    add_common(p)
    p.add_argument("--mismeasured", choices=("d", "y"), default=None)
    p.add_argument("--strong-mono", action="store_true")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--method", choices=("delta", "bootstrap"), default="delta")
    p.add_argument("--reps", type=int, default=2000)
    p.add_argument("--seed", type=int, default=default_seed)
    p.add_argument("--grid", type=int, default=200)

    p = sub.add_parser("simulate", help="draw one synthetic dataset with known truth")
    add_common(p, needs_input=False)
    p.add_argument("--mismeasured", choices=("z", "d", "y", "zy", "dy", "zd", "zdy"), default=None)
    p.add_argument("--strong-mono", action="store_true")
    p.add_argument("--seed", type=int, default=default_seed)
    p.add_argument("--n", type=int, default=10000, help="units per dataset")

    p = sub.add_parser("audit", help="containment/sharpness audit of one bound family")
    add_common(p, needs_input=False)
    p.add_argument("--mismeasured", choices=("d", "y"), required=True)
    p.add_argument("--strong-mono", action="store_true")
    p.add_argument("--seed", type=int, default=default_seed)
    p.add_argument("--reps", type=int, default=200, help="number of audited models")

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    ns = vars(args)
    sub = ns.pop("subcommand")
    src = ns.pop("input", None)
    fmt = ns.pop("input_format", None)
    options = {k: v for k, v in ns.items() if v is not None}
    try:
        return run(RunConfig(subcommand=sub, input=src, input_format=fmt, options=options))
    except MisivError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
