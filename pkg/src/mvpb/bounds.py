"""Generalization bounds for the multiview Gibbs classifier and majority vote.

All risk bounds take the empirical Gibbs risk as ``disagreement / 2 +
joint_error`` from a RiskProfile and the KL budget
``E_{v~rho} KL(Q_v || P_v) + KL(rho || pi)``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import gammaln, xlogy

from .errors import DomainError, ShapeMismatch
from .estimators import KlBudget, RiskProfile
from .hierarchy import Categorical

KLINV_TOL = 1e-10
KLINV_MAX_ITER = 100
DEFAULT_CATONI_GRID = tuple(float(c) for c in np.geomspace(0.05, 20.0, 20))


@dataclass(frozen=True)
class BoundInputs:
    profile: RiskProfile
    kl: KlBudget
    m: int
    delta: float = 0.05

    def __post_init__(self):
        if self.m < 1:
            raise DomainError(f"m must be >= 1, got {self.m}")
        if not 0.0 < self.delta <= 1.0:
            raise DomainError(f"delta must lie in (0, 1], got {self.delta}")

    @classmethod
    def from_values(cls, risk: float, m: int, delta: float = 0.05, kl_total: float = 0.0,
                    disagreement: float = 0.0) -> "BoundInputs":
        """Inputs from bare numbers: the joint error is set to ``risk - disagreement / 2``."""
        joint = risk - disagreement / 2.0
        if joint < -1e-12:
            raise DomainError("disagreement / 2 cannot exceed the Gibbs risk")
        profile = RiskProfile(risk, disagreement, max(joint, 0.0), float("nan"), (risk,), (disagreement,), m)
        return cls(profile, KlBudget(0.0, kl_total), m, delta)

    @property
    def empirical_risk(self) -> float:
        return min(1.0, max(0.0, 0.5 * self.profile.disagreement + self.profile.joint_error))


@dataclass(frozen=True)
class BoundReport:
    gibbs_upper: float
    mv_factor2_upper: float
    cbound_upper: float | None
    intermediates: dict = field(default_factory=dict)

    @property
    def cbound_vacuous(self) -> bool:
        return self.cbound_upper is None

    def to_dict(self) -> dict:
        return {
            "gibbs_upper": self.gibbs_upper,
            "mv_factor2_upper": self.mv_factor2_upper,
            "cbound_upper": "vacuous" if self.cbound_upper is None else self.cbound_upper,
            "intermediates": dict(self.intermediates),
        }


def _clamp(x: float) -> float:
    return min(1.0, max(0.0, x))


def binary_kl(a: float, b: float) -> float:
    """KL divergence between Bernoulli(a) and Bernoulli(b), with 0 ln 0 = 0."""
    if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
        raise DomainError(f"binary kl needs a, b in [0, 1], got ({a}, {b})")
    if b == 0.0:
        return 0.0 if a == 0.0 else math.inf
    if b == 1.0:
        return 0.0 if a == 1.0 else math.inf
    return float(xlogy(a, a / b) + xlogy(1.0 - a, (1.0 - a) / (1.0 - b)))


def binary_kl_inverse_upper(a: float, c: float) -> float:
    """Largest b >= a with kl(a, b) <= c, to within KLINV_TOL (rounded up)."""
    if not 0.0 <= a <= 1.0 or c < 0:
        raise DomainError(f"kl inverse needs a in [0, 1] and c >= 0, got ({a}, {c})")
    if c == 0.0:
        return a
    if a >= 1.0:
        return 1.0
    lo, hi = a, 1.0
    for _ in range(KLINV_MAX_ITER):
        if hi - lo <= KLINV_TOL:
            break
        mid = 0.5 * (lo + hi)
        if binary_kl(a, mid) <= c:
            lo = mid
        else:
            hi = mid
    return hi


def binary_kl_inverse_lower(a: float, c: float) -> float:
    """Smallest b <= a with kl(a, b) <= c, to within KLINV_TOL (rounded down)."""
    if not 0.0 <= a <= 1.0 or c < 0:
        raise DomainError(f"kl inverse needs a in [0, 1] and c >= 0, got ({a}, {c})")
    if c == 0.0:
        return a
    if a <= 0.0:
        return 0.0
    lo, hi = 0.0, a
    for _ in range(KLINV_MAX_ITER):
        if hi - lo <= KLINV_TOL:
            break
        mid = 0.5 * (lo + hi)
        if binary_kl(a, mid) <= c:
            hi = mid
        else:
            lo = mid
    return lo


class _LogFactorialTable:
    """Grow-on-demand tables of ln k! and A[k] = k ln k - ln k!, shared by xi()."""

    def __init__(self):
        self._lock = threading.Lock()
        self.size = 0
        self.log_fact = np.zeros(1)
        self.a = np.zeros(1)

    def ensure(self, m: int):
        with self._lock:
            if m <= self.size:
                return self.log_fact, self.a
            n = max(m, 2 * self.size, 1024)
            k = np.arange(n + 1, dtype=np.float64)
            log_fact = gammaln(k + 1.0)
            self.a = xlogy(k, k) - log_fact
            self.log_fact = log_fact
            self.size = n
            return self.log_fact, self.a


_TABLE = _LogFactorialTable()


@lru_cache(maxsize=4096)
def xi(m: int) -> float:
    """sum_k C(m, k) (k/m)^k (1 - k/m)^(m-k), evaluated in log space.

    Each log-term is ln m! - m ln m + A[k] + A[m-k]; every term is at most 1
    (k = 0 and k = m give exactly 1), so no max-shift is needed. The sum is
    symmetric in k <-> m - k and only half of it is evaluated.
    """
    if m < 1:
        raise DomainError("xi needs m >= 1")
    log_fact, a = _TABLE.ensure(m)
    c = log_fact[m] - m * math.log(m)
    half = (m + 1) // 2
    total = 2.0 * float(np.exp(c + a[:half] + a[m:m - half:-1]).sum())
    if m % 2 == 0:
        total += math.exp(c + 2.0 * a[m // 2])
    return total


def _log_complexity(m: int, delta: float, xi_variant: bool = False) -> float:
    """ln(2 sqrt(m) / delta), or ln(xi(m) / delta) with ``xi_variant``."""
    base = xi(m) if xi_variant else 2.0 * math.sqrt(m)
    return math.log(base / delta)


def mcallester_bound(inputs: BoundInputs) -> float:
    rhs = (inputs.kl.total + _log_complexity(inputs.m, inputs.delta)) / (2.0 * inputs.m)
    return _clamp(inputs.empirical_risk + math.sqrt(rhs))


def catoni_bound(inputs: BoundInputs, C: float) -> float:
    if not C > 0:
        raise DomainError(f"Catoni's C must be positive, got {C}")
    exponent = C * inputs.empirical_risk + (inputs.kl.total + math.log(1.0 / inputs.delta)) / inputs.m
    return _clamp(-math.expm1(-exponent) / -math.expm1(-C))


def catoni_bound_best_C(inputs: BoundInputs, grid: Sequence[float] = DEFAULT_CATONI_GRID) -> tuple[float, float]:
    """Minimum over ``grid``; the first (smallest listed) C wins ties."""
    if len(grid) == 0:
        raise DomainError("Catoni grid is empty")
    best, best_C = math.inf, None
    for C in sorted(grid):
        b = catoni_bound(inputs, C)
        if b < best:
            best, best_C = b, C
    return best, best_C


def seeger_rhs(inputs: BoundInputs, xi_variant: bool = False) -> float:
    return (inputs.kl.total + _log_complexity(inputs.m, inputs.delta, xi_variant)) / inputs.m


def seeger_bound(inputs: BoundInputs, xi_variant: bool = False) -> float:
    return binary_kl_inverse_upper(inputs.empirical_risk, seeger_rhs(inputs, xi_variant))


def kl_interval(a: float, c: float) -> tuple[float, float]:
    """Both endpoints of ``{b : kl(a, b) <= c}``."""
    return binary_kl_inverse_lower(a, c), binary_kl_inverse_upper(a, c)


def disagreement_rhs(kl: KlBudget, m: int, delta: float) -> float:
    # pairs of voters: both KL terms enter twice
    return 2.0 * (kl.total + _log_complexity(m, delta)) / m


def disagreement_interval(d_emp: float, kl: KlBudget, m: int, delta: float) -> tuple[float, float]:
    if not 0.0 <= d_emp <= 1.0:
        raise DomainError(f"empirical disagreement must lie in [0, 1], got {d_emp}")
    if m < 1 or not 0.0 < delta <= 1.0:
        raise DomainError("need m >= 1 and delta in (0, 1]")
    return kl_interval(d_emp, disagreement_rhs(kl, m, delta))


def cbound_mv(gibbs: float, disagreement: float) -> float | None:
    """1 - (1 - 2R)^2 / (1 - 2d), or None (vacuous) unless R < 1/2 and d < 1/2.

    Increasing in ``gibbs`` and decreasing in ``disagreement``.
    """
    if not (0.0 <= gibbs <= 1.0 and 0.0 <= disagreement <= 1.0):
        raise DomainError(f"C-bound inputs must lie in [0, 1], got ({gibbs}, {disagreement})")
    if gibbs >= 0.5 or disagreement >= 0.5:
        return None
    return _clamp(1.0 - (1.0 - 2.0 * gibbs) ** 2 / (1.0 - 2.0 * disagreement))


def cbound_mv_per_view(per_view_gibbs: Sequence[float], per_view_disagreement: Sequence[float],
                       rho: Categorical) -> float | None:
    w = rho.weights
    if not (len(per_view_gibbs) == len(per_view_disagreement) == w.size):
        raise ShapeMismatch("per-view lists and rho must have one entry per view")
    return cbound_mv(float(np.dot(w, per_view_gibbs)), float(np.dot(w, per_view_disagreement)))


def full_report(inputs: BoundInputs, catoni_grid: Sequence[float] = DEFAULT_CATONI_GRID,
                xi_variant: bool = False) -> BoundReport:
    mc = mcallester_bound(inputs)
    cat, cat_C = catoni_bound_best_C(inputs, catoni_grid)
    sg = seeger_bound(inputs, xi_variant)
    gibbs_upper = min(mc, cat, sg)
    d_lo, d_hi = disagreement_interval(inputs.profile.disagreement, inputs.kl, inputs.m, inputs.delta)
    # the C-bound decreases in d, so the lower confidence limit keeps it an upper bound
    cb = cbound_mv(gibbs_upper, d_lo)
    intermediates = {
        "empirical_gibbs": inputs.empirical_risk,
        "empirical_disagreement": inputs.profile.disagreement,
        "empirical_joint_error": inputs.profile.joint_error,
        "expected_view_kl": inputs.kl.expected_view_kl,
        "hyper_kl": inputs.kl.hyper_kl,
        "kl_total": inputs.kl.total,
        "m": inputs.m,
        "delta": inputs.delta,
        "log_2sqrtm_over_delta": _log_complexity(inputs.m, inputs.delta),
        "xi_m": xi(inputs.m),
        "xi_variant": xi_variant,
        "mcallester": mc,
        "catoni": cat,
        "catoni_C": cat_C,
        "catoni_grid_size": len(catoni_grid),
        "seeger": sg,
        "seeger_rhs": seeger_rhs(inputs, xi_variant),
        "disagreement_rhs": disagreement_rhs(inputs.kl, inputs.m, inputs.delta),
        "disagreement_lower": d_lo,
        "disagreement_upper": d_hi,
        "cbound_empirical": cbound_mv(inputs.empirical_risk, inputs.profile.disagreement),
        "catoni_union_bound": False,
    }
    return BoundReport(gibbs_upper, min(1.0, 2.0 * gibbs_upper), cb, intermediates)
