"""
Material moduli and boundary laws of the viscoelastic contact model.

Strains and stresses use Mandel notation [e11, e22, sqrt(2)*e12], so the
tensor product e:s is the plain dot product of the 3-vectors.
"""

import logging
from dataclasses import asdict, dataclass, fields
from typing import Callable, Dict, List, Optional

import numpy as np

from ..core.potentials import AlphaLaw, PiecewiseLinearSlope, damped_response
from ..history.operators import ExponentialKernel

logger = logging.getLogger(__name__)

TRACE = np.array([1.0, 1.0, 0.0])


def isotropic_moduli(shear_part: float, volumetric_part: float) -> np.ndarray:
    """Mandel matrix of e -> 2*shear_part*e + volumetric_part*tr(e)*I."""
    return 2.0 * shear_part * np.eye(3) + volumetric_part * np.outer(TRACE, TRACE)


def _from_dict(cls, data: Optional[Dict]):
    data = dict(data or {})
    unknown = set(data) - {f.name for f in fields(cls)}
    if unknown:
        raise ValueError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    return cls(**{k: float(v) for k, v in data.items()})


@dataclass(frozen=True)
class Material:
    """Viscosity (theta1, theta2), elasticity (lame_lambda, lame_mu), relaxation kappa*exp(-t/tau_r)*B."""

    theta1: float = 1.0
    theta2: float = 0.5
    lame_lambda: float = 2.0
    lame_mu: float = 1.5
    kappa: float = 0.5
    tau_r: float = 0.25

    def __post_init__(self):
        if not self.theta1 > 0:
            raise ValueError("theta1 must be positive")
        if self.theta2 < 0 or self.lame_lambda < 0:
            raise ValueError("theta2 and lame_lambda must be nonnegative")
        if not self.lame_mu > 0:
            raise ValueError("lame_mu must be positive")
        if self.kappa < 0 or not self.tau_r > 0:
            raise ValueError("relaxation needs kappa >= 0 and tau_r > 0")

    @property
    def viscosity(self) -> np.ndarray:
        return isotropic_moduli(self.theta1, self.theta2)

    @property
    def elasticity(self) -> np.ndarray:
        return isotropic_moduli(self.lame_mu, self.lame_lambda)

    @property
    def relaxation_kernel(self) -> ExponentialKernel:
        return ExponentialKernel(self.kappa, self.tau_r)

    @property
    def m_viscosity(self) -> float:
        return 2.0 * self.theta1

    @property
    def viscosity_norm(self) -> float:
        return 2.0 * self.theta1 + 2.0 * self.theta2

    @property
    def elasticity_norm(self) -> float:
        return 2.0 * self.lame_mu + 2.0 * self.lame_lambda

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Optional[Dict]) -> "Material":
        return _from_dict(cls, data)


@dataclass(frozen=True)
class DamperLaw(AlphaLaw):
    """k(r) = k1 + (k_star - k1)/(1 + |r|), values in [k1, k_star]."""

    k1: float
    k_star: float

    @property
    def upper(self) -> float:
        return self.k_star

    @property
    def lipschitz(self) -> float:
        return self.k_star - self.k1

    def __call__(self, t, zeta):
        r = np.abs(np.asarray(zeta, dtype=float))
        return self.k1 + (self.k_star - self.k1) / (1.0 + r)


@dataclass(frozen=True)
class BoundaryLaws:
    """Friction bound F_b, damper k, damped response j_nu, compliance p, friction coefficient mu."""

    friction_bound: float = 0.05
    friction_growth: float = 0.5
    damper_min: float = 5e-6
    damper_max: float = 1e-5
    compliance_max: float = 0.1
    compliance_cap: float = 0.5
    friction_coefficient: float = 0.08
    gap: float = 0.05

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{f.name} must be finite and nonnegative, got {value}")
        if self.damper_min > self.damper_max:
            raise ValueError("damper_min must not exceed damper_max")
        if not self.compliance_cap > 0:
            raise ValueError("compliance_cap must be positive")
        if not self.gap > 0:
            raise ValueError("gap must be positive")

    # laws --------------------------------------------------------------

    def F_b(self, r):
        rp = np.maximum(np.asarray(r, dtype=float), 0.0)
        return self.friction_bound * (1.0 + self.friction_growth * rp / (1.0 + rp))

    def k(self, r):
        return self.damper(0.0, r)

    def p(self, r):
        r = np.asarray(r, dtype=float)
        return self.compliance_max * np.clip(r, 0.0, self.compliance_cap) / self.compliance_cap

    def mu(self, r):
        r = np.maximum(np.asarray(r, dtype=float), 0.0)
        return self.friction_coefficient / (1.0 + r)

    @property
    def damper(self) -> DamperLaw:
        return DamperLaw(self.damper_min, self.damper_max)

    @property
    def j_nu(self) -> PiecewiseLinearSlope:
        return damped_response()

    # constants ---------------------------------------------------------

    @property
    def L_Fb(self) -> float:
        return self.friction_bound * self.friction_growth

    @property
    def F_sup(self) -> float:
        return self.friction_bound * (1.0 + self.friction_growth)

    @property
    def L_k(self) -> float:
        return self.damper_max - self.damper_min

    @property
    def L_p(self) -> float:
        return self.compliance_max / self.compliance_cap

    @property
    def L_mu(self) -> float:
        return self.friction_coefficient

    @property
    def c0_bar(self) -> float:
        return self.j_nu.c0

    @property
    def m_jnu(self) -> float:
        return self.j_nu.m_g

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Optional[Dict]) -> "BoundaryLaws":
        return _from_dict(cls, data)

    def scans(self, samples: int = 4001, radius: float = 10.0) -> List["LawScan"]:
        return scan_laws(self, samples, radius)


# ---------------------------------------------------------------------------
# Dense 1D scans of the declared law bounds
# ---------------------------------------------------------------------------


@dataclass
class LawScan:
    name: str
    claimed: float
    observed: float
    passed: bool
    witness: Optional[float] = None
    kind: str = "upper"

    def to_dict(self) -> Dict:
        return asdict(self)


def _lipschitz(fn: Callable, grid: np.ndarray):
    values = fn(grid)
    slopes = np.abs(np.diff(values) / np.diff(grid))
    k = int(np.argmax(slopes))
    return float(slopes[k]), float(grid[k])


def _upper(name, claimed, observed, witness, tol=1e-12) -> LawScan:
    return LawScan(name, float(claimed), float(observed), bool(observed <= claimed * (1 + 1e-9) + tol), witness)


def _lower(name, claimed, observed, witness, tol=1e-12) -> LawScan:
    return LawScan(name, float(claimed), float(observed), bool(observed >= claimed - tol), witness, "lower")


def scan_laws(laws: BoundaryLaws, samples: int = 4001, radius: float = 10.0) -> List[LawScan]:
    """Check boundedness and Lipschitz constants of every law on [-radius, radius]."""
    grid = np.linspace(-radius, radius, samples)
    scans: List[LawScan] = []

    lip, at = _lipschitz(laws.F_b, grid)
    scans.append(_upper("F_b lipschitz", laws.L_Fb, lip, at))
    fb = laws.F_b(grid)
    scans.append(_upper("F_b upper bound", laws.F_sup, float(fb.max()), float(grid[np.argmax(fb)])))
    scans.append(_lower("F_b lower bound", laws.friction_bound, float(fb.min()), float(grid[np.argmin(fb)])))

    kv = laws.k(grid)
    scans.append(_upper("k upper bound", laws.damper_max, float(kv.max()), float(grid[np.argmax(kv)])))
    scans.append(_lower("k lower bound", laws.damper_min, float(kv.min()), float(grid[np.argmin(kv)])))
    lip, at = _lipschitz(laws.k, grid)
    scans.append(_upper("k lipschitz", laws.L_k, lip, at))

    beta = laws.j_nu.derivative(grid)
    scans.append(_upper("j_nu derivative bound", laws.c0_bar, float(np.abs(beta).max()), float(grid[np.argmax(np.abs(beta))])))
    worst_slope = float(np.min(np.diff(beta) / np.diff(grid)))
    scans.append(_upper("j_nu relaxed monotonicity", laws.m_jnu, max(0.0, -worst_slope), None))

    pv = laws.p(grid)
    negative = grid < 0
    scans.append(_upper("p vanishes for r < 0", 0.0, float(np.abs(pv[negative]).max(initial=0.0)), None))
    scans.append(_upper("p upper bound", laws.compliance_max, float(pv.max()), float(grid[np.argmax(pv)])))
    lip, at = _lipschitz(laws.p, grid)
    scans.append(_upper("p lipschitz", laws.L_p, lip, at))

    nonneg = grid[grid >= 0]
    mv = laws.mu(nonneg)
    scans.append(_upper("mu upper bound", laws.friction_coefficient, float(mv.max()), float(nonneg[np.argmax(mv)])))
    lip, at = _lipschitz(laws.mu, nonneg)
    scans.append(_upper("mu lipschitz", laws.L_mu, lip, at))

    failed = [s.name for s in scans if not s.passed]
    if failed:
        logger.warning(f"Law scans failed: {failed}")
    return scans
