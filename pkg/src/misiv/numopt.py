"""Numeric sharp bounds by exhaustive search over misclassification rates.

The closed forms cover one mismeasured variable at a time; this module
handles any non-empty subset of {Z, D, Y}. It walks a grid over the
channel rates, inverts the measurement model exactly at every point,
keeps the points whose implied latent model is a proper probability
distribution, and reports the range of the complier risk difference over
the kept points, with local grid refinement around each incumbent
extreme. The result is an inner approximation: finer grids can only
widen the interval.

Grid evaluation is vectorized over numpy chunks with a fixed iteration
order, so repeated runs agree bit for bit and the reduction is order
independent. Feasibility is expressed in mass form: each principal
stratum's joint outcome mass must sit inside the interval its stratum
weight allows, which collapses to "the mass vanishes" whenever the
weight does (that clause is what rules out rate points that fake a
degenerate stratum).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bounds import BoundsReport
from .core import ObservedDistribution
from .errors import NoFeasiblePoint
from .latentmap import LatentIvModel, check_feasibility

__all__ = ["SearchConfig", "numeric_bounds"]

_AXES = ("sn_z", "sp_z", "sn_d", "sp_d", "sn_y", "sp_y")
_CHUNK = 1 << 20


@dataclass(frozen=True)
class SearchConfig:
    """Search space description: which channels float, and how finely.

    `mismeasured` accepts any iterable of the letters z/d/y (a string
    like "dy" works). grid_resolution None picks 101 points per axis for
    up to two mismeasured variables, 41 for three.
    """

    mismeasured: object
    strong_mono: bool = False
    grid_resolution: int | None = None
    refinement_rounds: int = 2
    feasibility_tol: float = 1e-9

    def __post_init__(self):
        sub = frozenset(str(v).lower() for v in self.mismeasured)
        if not sub or not sub <= {"z", "d", "y"}:
            raise ValueError(f"mismeasured must be a non-empty subset of z/d/y, got {self.mismeasured!r}")
        object.__setattr__(self, "mismeasured", sub)
        if self.grid_resolution is not None and self.grid_resolution < 2:
            raise ValueError("grid_resolution must be at least 2")
        if self.refinement_rounds < 0:
            raise ValueError("refinement_rounds must be non-negative")
        if self.feasibility_tol < 0:
            raise ValueError("feasibility_tol must be non-negative")

    @property
    def resolution(self) -> int:
        if self.grid_resolution is not None:
            return self.grid_resolution
        return 41 if len(self.mismeasured) == 3 else 101


def _stats(dist: ObservedDistribution) -> dict:
    p = dist.p
    return {
        "pz": float(dist.pz),
        "pd": (float(p[0][1][0] + p[0][1][1]), float(p[1][1][0] + p[1][1][1])),
        "py": (float(p[0][0][1] + p[0][1][1]), float(p[1][0][1] + p[1][1][1])),
        "pyd": (float(p[0][1][1]), float(p[1][1][1])),
    }


def _deblur(pair, a1, a0, rz):
    o0, o1 = pair
    m1 = (a0 * o1 - (1.0 - a1) * o0) / rz
    m0 = (a1 * o0 - (1.0 - a0) * o1) / rz
    return m0, m1


def _kernel(st, rv, strong, tol):
    """Violation magnitude and effect at each rate point.

    Returns (viol, cace); a point is feasible iff viol <= 0. Divisions
    are guarded so masked-out points produce garbage silently rather
    than warnings; the viol array is what decides.
    """
    a1, a0 = rv["sn_z"], rv["sp_z"]
    snd, spd = rv["sn_d"], rv["sp_d"]
    sny, spy = rv["sn_y"], rv["sp_y"]

    rz = a1 + a0 - 1.0
    rd = snd + spd - 1.0
    ry = sny + spy - 1.0
    rzs = np.where(rz > tol, rz, 1.0)
    rds = np.where(rd > tol, rd, 1.0)
    rys = np.where(ry > tol, ry, 1.0)
    deficits = [tol - rz, tol - rd, tol - ry]

    pd0, pd1 = _deblur(st["pd"], a1, a0, rzs)
    py0, py1 = _deblur(st["py"], a1, a0, rzs)
    pyd0, pyd1 = _deblur(st["pyd"], a1, a0, rzs)
    rd_py = py1 - py0
    rd_pyd = pyd1 - pyd0
    miss_y = 1.0 - spy

    def stratum(pi, w):
        deficits.append(-tol - pi)
        deficits.append(pi - 1.0 - tol)
        deficits.append(pi * miss_y - tol - w)
        deficits.append(w - pi * (miss_y + ry) - tol)

    if strong:
        # Treatment channel conditional on the encouraged arm; the other
        # arm is untreated and recorded as such.
        deficits.append(np.abs(pd0) - tol)
        pi_c = (pd1 - (1.0 - spd)) / rds
        pi_n = 1.0 - pi_c
        m_n = (snd * py1 - pyd1) / rds
        m_c1 = (pyd1 - (1.0 - spd) * py1) / rds
        m_c0 = py0 - m_n
        stratum(pi_n, m_n)
        stratum(pi_c, m_c1)
        stratum(pi_c, m_c0)
        num = m_c1 - m_c0
    else:
        t0 = (pd0 - (1.0 - spd)) / rds
        t1 = (pd1 - (1.0 - spd)) / rds
        pi_a, pi_c, pi_n = t0, t1 - t0, 1.0 - t1
        deficits.append(-tol - pi_a)
        deficits.append(pi_a - 1.0 - tol)
        stratum(pi_n, (snd * py1 - pyd1) / rds)
        stratum(pi_a, (pyd0 - (1.0 - spd) * py0) / rds)
        stratum(pi_c, (rd_pyd - (1.0 - spd) * rd_py) / rds)
        stratum(pi_c, (rd_pyd - snd * rd_py) / rds)
        num = rd_py

    deficits.append(tol - pi_c)
    viol = deficits[0]
    for d in deficits[1:]:
        viol = np.maximum(viol, d)
    cace = num / (np.where(pi_c > tol, pi_c, 1.0) * rys)
    return viol, cace


@dataclass
class _Incumbent:
    cace: float
    rates: dict
    spacing: dict


def _run_pass(st, rec_names, grid_axes, g, strong, tol, state, tie=None):
    """One full sweep of the product grid, merging results into state.

    grid_axes lists (name, lo, hi) for the axes actually gridded; `tie`
    may overwrite one rate as a function of the others after indexing
    (used to trace the constraint ridge exactly).
    """
    names = [nm for nm, _, _ in grid_axes]
    grids = [np.linspace(lo, hi, g) for _, lo, hi in grid_axes]
    shape = (g,) * len(grids)
    n = g ** len(grids)
    spacing = {nm: (hi - lo) / (g - 1) for nm, lo, hi in grid_axes}
    for s in range(0, n, _CHUNK):
        idx = np.arange(s, min(s + _CHUNK, n))
        multi = np.unravel_index(idx, shape)
        rv = dict.fromkeys(_AXES, 1.0)
        for k, nm in enumerate(names):
            rv[nm] = grids[k][multi[k]]
        if tie is not None:
            tie(rv)
        viol, cace = _kernel(st, rv, strong, tol)
        state["evaluated"] += idx.size
        state["nearest"] = min(state["nearest"], float(viol.min()))
        mask = viol <= 0.0
        m = int(mask.sum())
        if m == 0:
            continue
        state["feasible"] += m
        rec = {nm: np.broadcast_to(rv[nm], mask.shape) for nm in rec_names}
        for nm in rec_names:
            vals = rec[nm][mask]
            lo, hi = state["rate_range"][nm]
            state["rate_range"][nm] = (min(lo, float(vals.min())), max(hi, float(vals.max())))
        lo_c = np.where(mask, cace, np.inf)
        hi_c = np.where(mask, cace, -np.inf)
        j = int(np.argmin(lo_c))
        if lo_c[j] < state["lo"].cace:
            state["lo"] = _Incumbent(float(lo_c[j]), {nm: float(rec[nm][j]) for nm in rec_names}, dict(spacing))
        j = int(np.argmax(hi_c))
        if hi_c[j] > state["hi"].cace:
            state["hi"] = _Incumbent(float(hi_c[j]), {nm: float(rec[nm][j]) for nm in rec_names}, dict(spacing))


def _witness_model(st, rates_full, strong, tol) -> LatentIvModel:
    """Rebuild the latent model at one rate point, scalar arithmetic.

    Masses are snapped into their exact admissible interval (they sit
    within feasibility_tol of it by construction) so the witness passes
    check_feasibility exactly; degenerate strata get outcome rate 0.
    """
    a1, a0 = rates_full["sn_z"], rates_full["sp_z"]
    snd, spd = rates_full["sn_d"], rates_full["sp_d"]
    sny, spy = rates_full["sn_y"], rates_full["sp_y"]
    rz, rd, ry = a1 + a0 - 1.0, snd + spd - 1.0, sny + spy - 1.0
    pd0, pd1 = _deblur(st["pd"], a1, a0, rz)
    py0, py1 = _deblur(st["py"], a1, a0, rz)
    pyd0, pyd1 = _deblur(st["pyd"], a1, a0, rz)
    pz_true = a1 * st["pz"] + (1.0 - a0) * (1.0 - st["pz"])

    def rate(pi, w):
        if pi <= tol:
            return 0.0
        w = min(max(w, pi * (1.0 - spy)), pi * ((1.0 - spy) + ry))
        return (w / pi - (1.0 - spy)) / ry

    if strong:
        pi_c = (pd1 - (1.0 - spd)) / rd
        pi_n = 1.0 - pi_c
        m_n = (snd * py1 - pyd1) / rd
        pi_a, py_a = 0.0, 0.0
        py_n = rate(pi_n, m_n)
        py_c1 = rate(pi_c, (pyd1 - (1.0 - spd) * py1) / rd)
        py_c0 = rate(pi_c, py0 - m_n)
    else:
        t0 = (pd0 - (1.0 - spd)) / rd
        t1 = (pd1 - (1.0 - spd)) / rd
        pi_a, pi_c, pi_n = t0, t1 - t0, 1.0 - t1
        py_n = rate(pi_n, (snd * py1 - pyd1) / rd)
        py_a = rate(pi_a, (pyd0 - (1.0 - spd) * py0) / rd)
        py_c1 = rate(pi_c, ((pyd1 - pyd0) - (1.0 - spd) * (py1 - py0)) / rd)
        py_c0 = rate(pi_c, ((pyd1 - pyd0) - snd * (py1 - py0)) / rd)
    return LatentIvModel(
        pz=min(max(pz_true, 0.0), 1.0),
        pi_a=max(pi_a, 0.0),
        pi_n=pi_n,
        pi_c=pi_c,
        py_always=py_a,
        py_never=py_n,
        py_complier_control=py_c0,
        py_complier_treated=py_c1,
    )


def _active_constraints(model: LatentIvModel, rates: dict, edge_tol=1e-6):
    names = {
        "pi_always": model.pi_a,
        "pi_never": model.pi_n,
        "pi_complier": model.pi_c,
        "py_always": model.py_always,
        "py_never": model.py_never,
        "py_complier_control": model.py_complier_control,
        "py_complier_treated": model.py_complier_treated,
    }
    active = [f"{nm}@{round(v)}" for nm, v in names.items() if min(abs(v), abs(1 - v)) <= edge_tol]
    active += [f"{nm}@{v:g}" for nm, v in rates.items() if min(abs(v), abs(1 - v)) <= edge_tol]
    return tuple(active)


def numeric_bounds(dist: ObservedDistribution, cfg: SearchConfig) -> BoundsReport:
    """Search the rate hypercube and report the feasible effect range.

    Rates for variables outside cfg.mismeasured stay pinned at 1. Under
    strong_mono with the treatment mismeasured, the encouraged-arm
    sensitivity axis extends past 1 up to the data-driven cap
    P(Y=1,D'=1|Z=1)/RD_Y: the sharp closed forms extremize the same mass
    system with that axis uncapped, and capping it at 1 would strand the
    numeric upper bound far below them.

    Raises NoFeasiblePoint when no grid point is feasible; the error
    carries the smallest constraint violation seen.
    """
    sub = cfg.mismeasured
    g = cfg.resolution
    tol = cfg.feasibility_tol
    st = _stats(dist)
    names = tuple(a for a in _AXES if a[-1] in sub)

    hi_sn_d = 1.0
    warnings = ()
    if cfg.strong_mono and "d" in sub:
        rd_y_obs = st["py"][1] - st["py"][0]
        if rd_y_obs > tol:
            hi_sn_d = max(1.0, st["pyd"][1] / rd_y_obs)
        if hi_sn_d > 1.0:
            warnings = (
                f"encouraged-arm sensitivity axis extended to {hi_sn_d:.6g} "
                "(rates above 1 index the uncapped mass system, not a probability)",
            )
    base = {nm: (0.0, hi_sn_d if nm == "sn_d" else 1.0) for nm in names}

    state = {
        "lo": _Incumbent(np.inf, None, None),
        "hi": _Incumbent(-np.inf, None, None),
        "nearest": np.inf,
        "feasible": 0,
        "evaluated": 0,
        "rate_range": {nm: (np.inf, -np.inf) for nm in names},
    }
    base_spacing = {nm: (base[nm][1] - base[nm][0]) / (g - 1) for nm in names}
    _run_pass(st, names, [(nm, *base[nm]) for nm in names], g, cfg.strong_mono, tol, state)
    if hi_sn_d > 1.0:
        # The effect maximum sits where the complier-control outcome mass
        # hits zero; grid the other axes with the sensitivity tied to
        # that boundary so the ridge is sampled exactly.
        p11, py1z0 = st["pyd"][1], st["py"][0]
        rd_y_obs = st["py"][1] - st["py"][0]

        def tie(rv):
            rv["sn_d"] = np.clip((p11 - (1.0 - rv["sp_d"]) * py1z0) / rd_y_obs, 0.0, hi_sn_d)

        _run_pass(
            st, names, [(nm, *base[nm]) for nm in names if nm != "sn_d"],
            g, cfg.strong_mono, tol, state, tie=tie,
        )
    if state["feasible"] == 0:
        raise NoFeasiblePoint(state["nearest"])

    for _ in range(cfg.refinement_rounds):
        for side in ("lo", "hi"):
            inc = state[side]
            local = []
            for nm in names:
                h = inc.spacing.get(nm, base_spacing[nm])
                local.append((nm, max(base[nm][0], inc.rates[nm] - h), min(base[nm][1], inc.rates[nm] + h)))
            _run_pass(st, names, local, g, cfg.strong_mono, tol, state)

    full = dict.fromkeys(_AXES, 1.0)
    reports = {}
    for side in ("lo", "hi"):
        inc = state[side]
        rates_full = dict(full, **inc.rates)
        model = _witness_model(st, rates_full, cfg.strong_mono, tol)
        reports[side] = {"rates": dict(inc.rates), "model": model, "cace": inc.cace}

    sn_rng = {nm[-1]: state["rate_range"][nm] for nm in names if nm.startswith("sn")}
    sp_rng = {nm[-1]: state["rate_range"][nm] for nm in names if nm.startswith("sp")}
    binding = tuple(
        (f"cace_{side}", nm)
        for side in ("lo", "hi")
        for nm in _active_constraints(reports[side]["model"], reports[side]["rates"])
    )
    return BoundsReport(
        theorem="numeric",
        variable="".join(v for v in ("z", "d", "y") if v in sub),
        cace_lo=state["lo"].cace,
        cace_hi=state["hi"].cace,
        sn_lo={v: r[0] for v, r in sn_rng.items()},
        sn_hi={v: r[1] for v, r in sn_rng.items()},
        sp_lo={v: r[0] for v, r in sp_rng.items()},
        sp_hi={v: r[1] for v, r in sp_rng.items()},
        feasible=True,
        recoded=False,
        binding=binding,
        intermediates={
            "strong_mono": cfg.strong_mono,
            "grid_resolution": g,
            "refinement_rounds": cfg.refinement_rounds,
            "evaluated_points": state["evaluated"],
            "feasible_points": state["feasible"],
            "witness_lo": reports["lo"],
            "witness_hi": reports["hi"],
            "sn_d_axis_hi": hi_sn_d,
        },
        warnings=warnings,
    )
