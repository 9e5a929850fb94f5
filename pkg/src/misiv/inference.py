"""Sampling uncertainty: Wald and bootstrap intervals, the two-stage
union interval for partially identified effects, and one-sided tests of
the observable inequalities.

The union interval spends its error budget in two stages: a level
1-gamma interval for the point-identified naive effect, then, for each
grid value t inside it, a level 1-(alpha-gamma) interval for the effect
given that the naive effect equals t, built from percentile bootstrap of
the bound factors. The union over the grid covers at level 1-alpha.
Bound factors are extrema of ratio statistics with non-normal limits,
which is why stage two resamples rather than trusting a delta expansion.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import isnan, sqrt

import numpy as np
from scipy.stats import norm

from .bounds import testable_conditions
from .core import ObservedCounts, from_counts, recode_outcome
from .errors import DegenerateResample, StrongMonoViolated, ZeroDenominator
from .identify import naive_cace

__all__ = [
    "CiConfig",
    "AsymptoticVariance",
    "ConfidenceInterval",
    "InequalityTests",
    "estimate_variance",
    "ci_wald",
    "ci_union",
    "test_inequalities",
]


@dataclass(frozen=True)
class CiConfig:
    """Interval settings. gamma defaults to alpha/10 (most of the budget
    goes to the conditional stage); both levels are exposed because the
    union interval's length is fairly sensitive to the split."""

    alpha: float = 0.05
    gamma: float | None = None
    method: str = "delta"
    bootstrap_reps: int = 2000
    seed: int = 0
    grid_points: int = 200

    def __post_init__(self):
        if self.gamma is None:
            object.__setattr__(self, "gamma", self.alpha / 10)
        if not 0 < self.gamma < self.alpha < 1:
            raise ValueError(f"need 0 < gamma < alpha < 1, got gamma={self.gamma}, alpha={self.alpha}")
        if self.method not in ("delta", "bootstrap"):
            raise ValueError(f"method must be 'delta' or 'bootstrap', got {self.method!r}")
        if self.bootstrap_reps < 1:
            raise ValueError("bootstrap_reps must be positive")
        if self.grid_points < 2:
            raise ValueError("grid_points must be at least 2")


@dataclass(frozen=True)
class AsymptoticVariance:
    """Variances of sqrt(n) times the two arm risk differences, and their correlation."""

    sigma1_sq: float
    sigma2_sq: float
    rho: float

    def __post_init__(self):
        if self.sigma1_sq < 0 or self.sigma2_sq < 0:
            raise ValueError("variances must be non-negative")
        if abs(self.rho) > 1:
            raise ValueError(f"|rho| = {abs(self.rho)} exceeds 1")


@dataclass(frozen=True)
class ConfidenceInterval:
    lo: float
    hi: float
    alpha: float
    method: str
    meta: dict = field(default_factory=dict)

    def __iter__(self):
        yield self.lo
        yield self.hi


def _arm_data(counts: ObservedCounts):
    """Counts flattened arm-major in cell order (d,y) = 00,01,10,11."""
    c = np.array(
        [counts.n[z][d][y] for z in (0, 1) for d in (0, 1) for y in (0, 1)], dtype=float
    )
    n0, n1 = c[:4].sum(), c[4:].sum()
    return c, n0, n1


def estimate_variance(counts: ObservedCounts) -> AsymptoticVariance:
    """Plug-in asymptotic variance of the two risk differences.

    Scaled by total n, so Var(RD_hat) = sigma_sq / n.
    """
    c, n0, n1 = _arm_data(counts)
    n = n0 + n1
    p0, p1 = c[:4] / n0, c[4:] / n1
    v1 = v2 = cov = 0.0
    for p, nz in ((p0, n0), (p1, n1)):
        py = p[1] + p[3]
        pd = p[2] + p[3]
        pyd = p[3]
        v1 += py * (1 - py) / nz
        v2 += pd * (1 - pd) / nz
        cov += (pyd - py * pd) / nz
    s1, s2 = sqrt(v1 * n), sqrt(v2 * n)
    rho = 0.0 if s1 == 0 or s2 == 0 else cov * n / (s1 * s2)
    return AsymptoticVariance(s1 * s1, s2 * s2, max(-1.0, min(1.0, rho)))


def _resample(counts: ObservedCounts, seed: int, b: int) -> np.ndarray:
    """Replicate b's arm-stratified resample; the per-index seed keeps
    parallel and serial evaluation identical."""
    rng = np.random.default_rng((seed, b))
    c, n0, n1 = _arm_data(counts)
    return np.concatenate(
        [rng.multinomial(int(n0), c[:4] / n0), rng.multinomial(int(n1), c[4:] / n1)]
    ).astype(float)


def ci_wald(counts: ObservedCounts, cfg: CiConfig) -> ConfidenceInterval:
    """Two-sided interval for the naive effect at level 1 - alpha."""
    dist = from_counts(counts)
    est = naive_cace(dist)
    cace = float(est.value)
    c, n0, n1 = _arm_data(counts)
    n = n0 + n1

    if cfg.method == "delta":
        av = estimate_variance(counts)
        rd_d = float(est.denominator)
        s1, s2 = sqrt(av.sigma1_sq), sqrt(av.sigma2_sq)
        var = (av.sigma1_sq - 2 * cace * av.rho * s1 * s2 + cace * cace * av.sigma2_sq) / rd_d**2 / n
        z = norm.ppf(1 - cfg.alpha / 2)
        sd = sqrt(var)
        lo, hi = cace - z * sd, cace + z * sd
        meta = {"estimate": cace, "sd": sd, "variance": av}
    else:
        vals = []
        degenerate = 0
        for b in range(cfg.bootstrap_reps):
            r = _resample(counts, cfg.seed, b)
            rd_d = (r[6] + r[7]) / n1 - (r[2] + r[3]) / n0
            if rd_d == 0:
                degenerate += 1
                continue
            rd_y = (r[5] + r[7]) / n1 - (r[1] + r[3]) / n0
            vals.append(rd_y / rd_d)
        if degenerate:
            warnings.warn(
                f"{degenerate} of {cfg.bootstrap_reps} resamples had zero compliance difference",
                DegenerateResample,
                stacklevel=2,
            )
        if not vals:
            raise ZeroDenominator(0, context="every bootstrap resample")
        lo = float(np.quantile(vals, cfg.alpha / 2))
        hi = float(np.quantile(vals, 1 - cfg.alpha / 2))
        meta = {"estimate": cace, "degenerate_resamples": degenerate, "reps": cfg.bootstrap_reps}

    return ConfidenceInterval(max(lo, -1.0), min(hi, 1.0), cfg.alpha, cfg.method, meta)


def _split(rows: np.ndarray):
    p0 = rows[:, :4] / rows[:, :4].sum(axis=1, keepdims=True)
    p1 = rows[:, 4:] / rows[:, 4:].sum(axis=1, keepdims=True)
    return p0, p1


def _cond(num, den):
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)


def _factors_thm2(p0, p1):
    rd_d = (p1[:, 2] + p1[:, 3]) - (p0[:, 2] + p0[:, 3])
    safe = np.where(rd_d != 0, rd_d, np.nan)
    els = np.stack(
        [
            _cond(p1[:, 1], p1[:, 0] + p1[:, 1]),
            _cond(p0[:, 3], p0[:, 2] + p0[:, 3]),
            (p1[:, 3] - p0[:, 3]) / safe,
            (p0[:, 1] - p1[:, 1]) / safe,
        ]
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        width = np.nanmax(els, axis=0) - np.nanmin(els, axis=0)
    return {"width": width}


def _factors_thm3(p0, p1):
    py0 = p0[:, 1] + p0[:, 3]
    py1 = p1[:, 1] + p1[:, 3]
    rd_y = py1 - py0
    safe = np.where(rd_y != 0, rd_y, np.nan)
    rho = ((p1[:, 3] - p0[:, 3])) / safe
    gamma = (p0[:, 2] - p1[:, 2]) / safe
    pd0 = p0[:, 2] + p0[:, 3]
    pd1 = p1[:, 2] + p1[:, 3]
    m_els = np.stack(
        [pd0, pd1, _cond(p1[:, 2], p1[:, 0] + p1[:, 2]), _cond(p1[:, 3], p1[:, 1] + p1[:, 3]), gamma]
    )
    n_els = np.stack(
        [pd0, pd1, _cond(p0[:, 2], p0[:, 0] + p0[:, 2]), _cond(p0[:, 3], p0[:, 1] + p0[:, 3]), rho]
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        wl = np.nanmax(m_els, axis=0) - np.nanmin(n_els, axis=0)
    wu = np.minimum(1.0, rho) - np.maximum(0.0, gamma)
    return {"wl": wl, "wu": wu}


def _factors_thm4(p0, p1):
    return {
        "A": _cond(p1[:, 1], p1[:, 0] + p1[:, 1]),
        "B": _cond(p1[:, 3], p1[:, 2] + p1[:, 3]),
    }


def _factors_thm5(p0, p1):
    pd1 = p1[:, 2] + p1[:, 3]
    rd_y = (p1[:, 1] + p1[:, 3]) - (p0[:, 1] + p0[:, 3])
    q0 = p0[:, 1] + p0[:, 3]
    c1 = _cond(p1[:, 3], p1[:, 1] + p1[:, 3])
    c0 = _cond(p1[:, 2], p1[:, 0] + p1[:, 2])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        cmax = np.nanmax(np.stack([c1, c0]), axis=0)
        e = np.where(q0 > 0, (p1[:, 3] - rd_y * cmax) / np.where(q0 > 0, q0, 1.0), np.nan)
        smin = np.nanmin(np.stack([c1, c0, e]), axis=0)
    lo_a = np.where(pd1 > 0, cmax * rd_y / np.where(pd1 > 0, pd1, 1.0), np.nan)
    gap = pd1 - smin
    lo_b = np.where(gap != 0, (cmax - smin) * rd_y / np.where(gap != 0, gap, 1.0), np.nan)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        lower = np.nanmin(np.stack([lo_a, lo_b]), axis=0)
    return {"lower": lower}


_FACTOR_FNS = {"thm2": _factors_thm2, "thm3": _factors_thm3, "thm4": _factors_thm4, "thm5": _factors_thm5}


def _segments(kind, t, fw, rv):
    """Per-resample bound segment [lo, hi] at naive value t.

    fw holds factors in the coding as given, rv in the outcome-recoded
    coding; negative t means the theorem applies after recoding, so the
    recoded segment is computed and reflected.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind == "thm2":
            if t >= 0:
                w = fw["width"]
                hi = np.where(w > 0, np.minimum(t / np.where(w > 0, w, 1.0), 1.0), 1.0)
                hi = np.where(np.isnan(w), np.nan, hi)
                lo, hi = np.full_like(hi, t), hi
            else:
                w = rv["width"]
                lo = np.where(w > 0, np.maximum(t / np.where(w > 0, w, 1.0), -1.0), -1.0)
                lo = np.where(np.isnan(w), np.nan, lo)
                lo, hi = lo, np.full_like(lo, t)
        elif kind == "thm3":
            if t >= 0:
                lo, hi = t * fw["wl"], t * fw["wu"]
            else:
                lo, hi = t * rv["wu"], t * rv["wl"]
        elif kind == "thm4":
            # fmax/fmin skip a lone nan element, matching the zero-mass
            # skip in the exact bound; an all-nan row stays nan.
            if t >= 0:
                a, b = fw["A"], fw["B"]
                width = np.fmax(a, b) - np.fmin(a, b - t)
                hi = np.where(width <= max(t, 0.0), 1.0, t / width)
                lo = np.full_like(hi, t)
            else:
                a, b = rv["A"], rv["B"]
                width = np.fmax(a, b) - np.fmin(a, b + t)
                hi_rec = np.where(width <= -t, 1.0, -t / width)
                lo, hi = -hi_rec, np.full_like(hi_rec, t)
        else:
            if t >= 0:
                lo = fw["lower"]
                hi = np.full_like(lo, 1.0)
            else:
                hi = -rv["lower"]
                lo = np.full_like(hi, -1.0)
    bad = np.isnan(lo) | np.isnan(hi)
    return np.where(bad, np.nan, lo), np.where(bad, np.nan, hi)


def _union_over_grid(kind, grid, fw, rv, fw_pt, rv_pt, q):
    lo, hi = np.inf, -np.inf
    for t in grid:
        s_lo, s_hi = _segments(kind, float(t), fw, rv)
        p_lo, p_hi = _segments(kind, float(t), fw_pt, rv_pt)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            lo_t = np.nanquantile(s_lo, q)
            hi_t = np.nanquantile(s_hi, 1 - q)
        if not isnan(lo_t):
            lo = min(lo, lo_t)
        if not isnan(hi_t):
            hi = max(hi, hi_t)
        # The plug-in segment keeps the union anchored to the point
        # estimate even at extreme quantile levels.
        if not isnan(p_lo[0]):
            lo = min(lo, float(p_lo[0]))
        if not isnan(p_hi[0]):
            hi = max(hi, float(p_hi[0]))
    return max(lo, -1.0), min(hi, 1.0)


def ci_union(counts: ObservedCounts, bound_kind: str, cfg: CiConfig) -> ConfidenceInterval:
    """Union interval for a partially identified effect at level 1 - alpha.

    bound_kind picks the bound family: thm2/thm3 for the two
    no-compliance-restriction families, thm4/thm5 for their one-sided
    compliance counterparts (which require the data to satisfy it).
    """
    if bound_kind not in _FACTOR_FNS:
        raise ValueError(f"bound_kind must be one of {sorted(_FACTOR_FNS)}, got {bound_kind!r}")
    dist = from_counts(counts)
    if bound_kind in ("thm4", "thm5"):
        pd0 = float(dist.p[0][1][0] + dist.p[0][1][1])
        if pd0 > 1e-9:
            raise StrongMonoViolated(pd0, 1e-9)
    cace_hat = float(naive_cace(dist).value)

    stage1 = ci_wald(counts, CiConfig(
        alpha=cfg.gamma, gamma=cfg.gamma / 10, method=cfg.method,
        bootstrap_reps=cfg.bootstrap_reps, seed=cfg.seed, grid_points=cfg.grid_points,
    ))
    rows = np.stack([_resample(counts, cfg.seed, b) for b in range(cfg.bootstrap_reps)])
    p0, p1 = _split(rows)
    p0r, p1r = p0[:, [1, 0, 3, 2]], p1[:, [1, 0, 3, 2]]
    fn = _FACTOR_FNS[bound_kind]
    fw, rv = fn(p0, p1), fn(p0r, p1r)

    point = np.array([_arm_data(counts)[0]])
    q0, q1 = _split(point)
    fw_pt, rv_pt = fn(q0, q1), fn(q0[:, [1, 0, 3, 2]], q1[:, [1, 0, 3, 2]])

    probe_lo, _ = _segments(bound_kind, cace_hat, fw, rv)
    degenerate = int(np.isnan(probe_lo).sum())
    if degenerate:
        warnings.warn(
            f"{degenerate} of {cfg.bootstrap_reps} resamples had degenerate bound factors",
            DegenerateResample,
            stacklevel=2,
        )

    def union_at(gamma, t_lo, t_hi):
        grid = np.linspace(t_lo, t_hi, cfg.grid_points)
        return _union_over_grid(bound_kind, grid, fw, rv, fw_pt, rv_pt, (cfg.alpha - gamma) / 2)

    lo, hi = union_at(cfg.gamma, stage1.lo, stage1.hi)

    lengths = []
    for g in (cfg.alpha / 10, cfg.alpha / 4, cfg.alpha / 2, 3 * cfg.alpha / 4, 0.9 * cfg.alpha):
        s1 = ci_wald(counts, CiConfig(alpha=g, gamma=g / 10, method="delta"))
        a, b = union_at(g, s1.lo, s1.hi)
        lengths.append((g, b - a))

    return ConfidenceInterval(
        lo,
        hi,
        cfg.alpha,
        "union",
        {
            "bound_kind": bound_kind,
            "gamma": cfg.gamma,
            "stage1": (stage1.lo, stage1.hi),
            "reps": cfg.bootstrap_reps,
            "degenerate_resamples": degenerate,
            "length_by_gamma": tuple(lengths),
        },
    )


@dataclass(frozen=True)
class InequalityTests:
    """One-sided tests of one family of observable inequalities.

    tests holds (name, slack, se, p) in the family's order; slack < 0 is
    evidence against the design. p-values are of the normal-approximation
    one-sided test, 0.5 at exactly zero slack.
    """

    variant: str
    recoded: bool
    tests: tuple
    skipped: tuple
    min_p: float
    bonferroni_p: float
    note: str


def _slack_fns(variant, p0, p1):
    """Float slack evaluators mirroring the exact condition family."""

    def cond(p, d_idx, y):
        den = p[y] + p[2 + y]
        return None if den == 0 else p[2 + y] / den

    fns = []
    if variant in ("balke-pearl", "outcome-miserr"):
        for y in (1, 0):
            fns.append((f"p_y{y}_d1_arm1_ge_arm0", lambda p0, p1, y=y: p1[2 + y] - p0[2 + y]))
        for y in (1, 0):
            fns.append((f"p_y{y}_d0_arm0_ge_arm1", lambda p0, p1, y=y: p0[y] - p1[y]))
        return fns
    fns.append(("p_y1_d1_arm1_ge_arm0", lambda p0, p1: p1[3] - p0[3]))
    fns.append(("p_y0_d0_arm0_ge_arm1", lambda p0, p1: p0[0] - p1[0]))
    for y in (0, 1):
        if cond(p1, 2, y) is None:
            continue

        def f(p0, p1, y=y):
            rd_y = (p1[1] + p1[3]) - (p0[1] + p0[3])
            return (p1[3] - p0[3]) - p1[2 + y] / (p1[y] + p1[2 + y]) * rd_y

        fns.append((f"treated_rate_y{y}_le_joint_ratio", f))
    for y in (0, 1):
        if cond(p0, 2, y) is None:
            continue

        def f(p0, p1, y=y):
            rd_y = (p1[1] + p1[3]) - (p0[1] + p0[3])
            return p0[2 + y] / (p0[y] + p0[2 + y]) * rd_y - (p0[2] - p1[2])

        fns.append((f"control_rate_y{y}_ge_flip_ratio", f))
    return fns


def _slack_se(fn, p0, p1, n0, n1, h=1e-6):
    """Delta-method standard error via central differences on the cells."""
    var = 0.0
    for arm, (p, nz) in enumerate(((p0, n0), (p1, n1))):
        grads = []
        for i in range(4):
            up, dn = p.copy(), p.copy()
            up[i] += h
            dn[i] -= h
            args_u = (up, p1) if arm == 0 else (p0, up)
            args_d = (dn, p1) if arm == 0 else (p0, dn)
            grads.append((fn(*args_u) - fn(*args_d)) / (2 * h))
        g = np.array(grads)
        var += (np.sum(g * g * p) - np.sum(g * p) ** 2) / nz
    return sqrt(max(var, 0.0))


def test_inequalities(counts: ObservedCounts, variant: str) -> InequalityTests:
    """One-sided normal-approximation p-values for each inequality.

    Ratio-form conditions are tested in multiplied-through form (no
    division by the outcome risk difference), matching the exact checks.
    """
    dist = from_counts(counts)
    report = testable_conditions(dist, variant)
    work_counts = counts
    if report.recoded:
        work_counts = ObservedCounts(
            tuple(tuple(tuple(counts.n[z][d][1 - y] for y in (0, 1)) for d in (0, 1)) for z in (0, 1))
        )
    c, n0, n1 = _arm_data(work_counts)
    p0, p1 = c[:4] / n0, c[4:] / n1

    exact = {name: float(slack) for name, slack, _ in report.checks}
    tests = []
    for name, fn in _slack_fns(variant, p0, p1):
        slack = exact.get(name, fn(p0, p1))
        se = _slack_se(fn, p0, p1, n0, n1)
        if se == 0:
            p = 1.0 if slack >= 0 else 0.0
        else:
            p = float(norm.cdf(slack / se))
        tests.append((name, slack, se, p))

    k = len(tests)
    min_p = min(p for _, _, _, p in tests) if tests else 1.0
    return InequalityTests(
        variant=variant,
        recoded=report.recoded,
        tests=tuple(tests),
        skipped=report.skipped,
        min_p=min_p,
        bonferroni_p=min(1.0, min_p * k),
        note=f"minimum of {k} one-sided tests; Bonferroni-adjusted joint p = {min(1.0, min_p * k):.4g}",
    )
