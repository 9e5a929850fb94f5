"""The bijection between latent IV models and observed mismeasured laws.

forward_map pushes a latent model through per-coordinate misclassification
channels; inverse_map solves the linear system back. All arithmetic is
generic, so Fraction inputs round-trip exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import ObservedDistribution, arm_probability
from .errors import (
    DegenerateDenominator,
    InfeasibleZChannel,
    NonInformativeRates,
    StrongMonoViolated,
)
from .identify import NondiffRates

__all__ = [
    "LatentIvModel",
    "StrongMonoRates",
    "FeasibilityReport",
    "forward_map",
    "inverse_map",
    "check_feasibility",
]

FEAS_TOL = 1e-9

# Principal strata: always-taker, never-taker, complier. Defiers are ruled
# out by instrument monotonicity and never appear.
_STRATA = ("always", "never", "complier")


@dataclass(frozen=True)
class LatentIvModel:
    """Latent law: instrument marginal, stratum shares, stratum outcome rates.

    Always- and never-takers carry one outcome rate each because the
    instrument cannot affect their outcomes; compliers have one rate per
    assignment arm. cace = py_complier_treated - py_complier_control.
    """

    pz: object
    pi_a: object
    pi_n: object
    pi_c: object
    py_always: object
    py_never: object
    py_complier_control: object
    py_complier_treated: object

    def __post_init__(self):
        gap = self.pi_a + self.pi_n + self.pi_c - 1
        if abs(gap) > FEAS_TOL:
            raise ValueError(f"stratum shares sum to 1 {gap:+g}")

    def py(self, u: str, z: int):
        """P(Y_z = 1 | U = u)."""
        if u == "always":
            return self.py_always
        if u == "never":
            return self.py_never
        if u == "complier":
            return self.py_complier_treated if z == 1 else self.py_complier_control
        raise ValueError(f"unknown stratum {u!r}")

    def treatment(self, u: str, z: int) -> int:
        """D under assignment z for stratum u."""
        if u == "always":
            return 1
        if u == "never":
            return 0
        if u == "complier":
            return z
        raise ValueError(f"unknown stratum {u!r}")

    @property
    def pi(self) -> dict:
        return {"always": self.pi_a, "never": self.pi_n, "complier": self.pi_c}

    @property
    def cace(self):
        return self.py_complier_treated - self.py_complier_control


@dataclass(frozen=True)
class StrongMonoRates:
    """Treatment-channel rates conditional on the encouraged arm.

    Under one-sided compliance nobody in the unencouraged arm is treated,
    so that arm's channel is pinned at perfect specificity and only the
    encouraged arm's sn_d1 = P(D'=1|D=1,Z=1), sp_d1 = P(D'=0|D=0,Z=1) vary.
    """

    sn_d1: object
    sp_d1: object

    def __post_init__(self):
        for name in ("sn_d1", "sp_d1"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} = {v} outside [0, 1]")

    @property
    def r_d1(self):
        return self.sn_d1 + self.sp_d1 - 1


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    violations: tuple  # (constraint name, value, overshoot magnitude)
    tol: float

    @property
    def worst(self) -> float:
        """Largest constraint overshoot; 0.0 when fully feasible."""
        return max((m for _, _, m in self.violations), default=0.0)


def _true_arm_cells(model: LatentIvModel):
    """Per-arm joint law of the true (D, Y): cells[z][d][y]."""
    cells = [[[0, 0], [0, 0]] for _ in (0, 1)]
    for z in (0, 1):
        for u in _STRATA:
            d = model.treatment(u, z)
            q = model.py(u, z)
            share = model.pi[u]
            cells[z][d][1] += share * q
            cells[z][d][0] += share * (1 - q)
    return cells


def _apply_dy_channels(cells_dy, sn_d, sp_d, sn_y, sp_y):
    """Push one arm's (D, Y) law through independent D and Y channels."""
    out = [[0, 0], [0, 0]]
    for d in (0, 1):
        for y in (0, 1):
            mass = cells_dy[d][y]
            if mass == 0:
                continue
            for dd in (0, 1):
                pd = sn_d if (dd == 1 and d == 1) else (
                    1 - sn_d if (dd == 0 and d == 1) else (1 - sp_d if dd == 1 else sp_d)
                )
                for yy in (0, 1):
                    py = sn_y if (yy == 1 and y == 1) else (
                        1 - sn_y if (yy == 0 and y == 1) else (1 - sp_y if yy == 1 else sp_y)
                    )
                    out[dd][yy] += mass * pd * py
    return out


def forward_map(model: LatentIvModel, rates) -> ObservedDistribution:
    """Distribution of the observed triple implied by a latent model and channels.

    `rates` is either NondiffRates (all three channels) or StrongMonoRates
    (encouraged-arm treatment channel only; requires pi_a = 0).
    """
    cells = _true_arm_cells(model)

    if isinstance(rates, StrongMonoRates):
        if abs(model.pi_a) > FEAS_TOL:
            raise StrongMonoViolated(model.pi_a, FEAS_TOL)
        arm1 = _apply_dy_channels(cells[1], rates.sn_d1, rates.sp_d1, 1, 1)
        arm0 = _apply_dy_channels(cells[0], 1, 1, 1, 1)  # D=0 throughout; channel pinned
        p = (tuple(tuple(r) for r in arm0), tuple(tuple(r) for r in arm1))
        return ObservedDistribution(pz=model.pz, p=p)

    blurred = [
        _apply_dy_channels(cells[z], rates.sn_d, rates.sp_d, rates.sn_y, rates.sp_y)
        for z in (0, 1)
    ]

    a1, a0 = rates.sn_z_rev, rates.sp_z_rev
    if a1 == 1 and a0 == 1:
        pz_obs = model.pz
        arms = blurred
    else:
        r = a1 + a0 - 1
        if r == 0:
            raise InfeasibleZChannel("instrument channel marginal is not invertible (r = 0)")
        pz_obs = (model.pz - (1 - a0)) / r
        if not 0 <= pz_obs <= 1:
            raise InfeasibleZChannel(
                f"implied observed-instrument marginal {pz_obs} outside [0, 1]"
            )
        # Observed arms mix the true arms with the reverse-channel weights.
        arms = [None, None]
        arms[1] = [[a1 * blurred[1][d][y] + (1 - a1) * blurred[0][d][y] for y in (0, 1)] for d in (0, 1)]
        arms[0] = [[(1 - a0) * blurred[1][d][y] + a0 * blurred[0][d][y] for y in (0, 1)] for d in (0, 1)]

    p = tuple(tuple(tuple(arms[z][d][y] for y in (0, 1)) for d in (0, 1)) for z in (0, 1))
    return ObservedDistribution(pz=pz_obs, p=p)


def _deblur_arms(dist: ObservedDistribution, a1, a0):
    """Undo the instrument channel: per-cell stats conditional on the true arm."""
    if a1 == 1 and a0 == 1:
        pz = dist.pz
        return pz, dist.p
    r = a1 + a0 - 1
    if r <= 0:
        raise NonInformativeRates(f"instrument channel r = {r}; must be > 0")
    pz = a1 * dist.pz + (1 - a0) * (1 - dist.pz)
    arm1 = [[(a0 * dist.p[1][d][y] - (1 - a1) * dist.p[0][d][y]) / r for y in (0, 1)] for d in (0, 1)]
    arm0 = [[(a1 * dist.p[0][d][y] - (1 - a0) * dist.p[1][d][y]) / r for y in (0, 1)] for d in (0, 1)]
    return pz, (arm0, arm1)


def inverse_map(dist: ObservedDistribution, rates) -> LatentIvModel:
    """Solve the channel equations for the unique latent model.

    Denominators vanish exactly when a stratum mass is zero; those inputs
    raise DegenerateDenominator rather than returning a limit.
    """
    if isinstance(rates, StrongMonoRates):
        return _inverse_strong_mono(dist, rates)

    r_d, r_y = rates.r_d, rates.r_y
    if r_d <= 0 or r_y <= 0:
        raise NonInformativeRates(f"r_d = {r_d}, r_y = {r_y}; both must be > 0")

    pz, arms = _deblur_arms(dist, rates.sn_z_rev, rates.sp_z_rev)

    def stat(z, *, d=None, y=None):
        total = 0
        for dd in (0, 1):
            if d is not None and dd != d:
                continue
            for yy in (0, 1):
                if y is not None and yy != y:
                    continue
                total += arms[z][dd][yy]
        return total

    pd = [stat(z, d=1) for z in (0, 1)]
    py = [stat(z, y=1) for z in (0, 1)]
    pyd = [stat(z, d=1, y=1) for z in (0, 1)]

    one_sp_d = 1 - rates.sp_d
    one_sp_y = 1 - rates.sp_y

    t = [(pd[z] - one_sp_d) / r_d for z in (0, 1)]
    pi_a, pi_c, pi_n = t[0], t[1] - t[0], 1 - t[1]

    def outcome_rate(numerator, denominator, stratum: str):
        # numerator/denominator = P(Y'=1 | stratum) before undoing the Y channel
        if denominator == 0:
            raise DegenerateDenominator(f"{stratum} outcome rate", denominator)
        return (numerator / denominator - one_sp_y) / r_y

    py_never = outcome_rate(rates.sn_d * py[1] - pyd[1], rates.sn_d - pd[1], "never-taker")
    py_always = outcome_rate(pyd[0] - one_sp_d * py[0], pd[0] - one_sp_d, "always-taker")

    rd_pd = pd[1] - pd[0]
    if rd_pd == 0:
        raise DegenerateDenominator("complier outcome rates", rd_pd)
    rd_py = py[1] - py[0]
    rd_pyd = pyd[1] - pyd[0]
    py_c1 = ((rd_pyd - one_sp_d * rd_py) / rd_pd - one_sp_y) / r_y
    py_c0 = ((rd_pyd - rates.sn_d * rd_py) / rd_pd - one_sp_y) / r_y

    return LatentIvModel(
        pz=pz,
        pi_a=pi_a,
        pi_n=pi_n,
        pi_c=pi_c,
        py_always=py_always,
        py_never=py_never,
        py_complier_control=py_c0,
        py_complier_treated=py_c1,
    )


def _inverse_strong_mono(dist: ObservedDistribution, rates: StrongMonoRates) -> LatentIvModel:
    """Invert the encouraged-arm treatment channel under one-sided compliance."""
    pd0 = arm_probability(dist, 0, d=1)
    if pd0 > FEAS_TOL:
        raise StrongMonoViolated(pd0, FEAS_TOL)

    r = rates.r_d1
    if r <= 0:
        raise NonInformativeRates(f"encouraged-arm treatment channel r = {r}; must be > 0")

    pd1 = arm_probability(dist, 1, d=1)
    py1 = arm_probability(dist, 1, y=1)
    py0 = arm_probability(dist, 0, y=1)
    p11 = dist.p[1][1][1]  # P(Y=1, D'=1 | Z=1)

    pi_c = (pd1 - (1 - rates.sp_d1)) / r
    pi_n = 1 - pi_c
    m_c1 = (p11 - (1 - rates.sp_d1) * py1) / r  # complier share with Y_1 = 1
    m_n = (rates.sn_d1 * py1 - p11) / r  # never-taker share with Y = 1

    if pi_c == 0:
        raise DegenerateDenominator("complier outcome rates", pi_c)
    if pi_n == 0:
        raise DegenerateDenominator("never-taker outcome rate", pi_n)

    py_c1 = m_c1 / pi_c
    py_never = m_n / pi_n
    py_c0 = (py0 - m_n) / pi_c

    # pi_a = 0 structurally; its outcome rate is vacuous and pinned at 0.
    return LatentIvModel(
        pz=dist.pz,
        pi_a=0,
        pi_n=pi_n,
        pi_c=pi_c,
        py_always=0,
        py_never=py_never,
        py_complier_control=py_c0,
        py_complier_treated=py_c1,
    )


def check_feasibility(model: LatentIvModel, tol: float = FEAS_TOL) -> FeasibilityReport:
    """Report every probability-range violation in the model.

    Infeasibility is data, not an error: callers inspect the report.
    Violations smaller than `tol` are absorbed as floating-point noise.
    """
    checks = [
        ("pz", model.pz),
        ("pi_a", model.pi_a),
        ("pi_n", model.pi_n),
        ("pi_c", model.pi_c),
        ("py_always", model.py_always),
        ("py_never", model.py_never),
        ("py_complier_control", model.py_complier_control),
        ("py_complier_treated", model.py_complier_treated),
    ]
    violations = []
    for name, v in checks:
        if v < 0:
            violations.append((f"{name} < 0", v, float(-v)))
        elif v > 1:
            violations.append((f"{name} > 1", v, float(v - 1)))
    feasible = all(m <= tol for _, _, m in violations)
    return FeasibilityReport(feasible=feasible, violations=tuple(violations), tol=tol)
