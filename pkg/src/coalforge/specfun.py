"""Exact rates, counting constants, generating functions, and quadrature.

The coalescent studied here has merger rates

    lambda_{n,k} = Beta(k - 1/2, n - k + 1/2),      2 <= k <= n,
    lambda_n     = (n - 1) * Beta(1/2, n - 1/2),

which arise from the finite measure sqrt(u / (1 - u)) du on (0, 1).  The
number of ordered binary trees with n labelled leaves is

    C_n = (2n - 2)! / (n - 1)!.

Generating functions for the block and singleton counts of the final merger
are expressed through the pair of integrals

    delta0(a, b) = int_0^inf dt / ((t + 1) sqrt(t^2 + 2 a t + b)),
    I(a, b)      = 1 + log 2 - log(sqrt(b) + a) - delta0(a, b),

both evaluated in closed form here and by direct quadrature in quad_delta and
quad_J so each route checks the other.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

_LOG2 = math.log(2.0)
_SQRT_PI = math.sqrt(math.pi)

__all__ = [
    "PrecisionError",
    "log_gamma",
    "beta_fn",
    "catalan_trees",
    "rate_nk",
    "rate_total",
    "LambdaMeasure",
    "rate_bk_general",
    "laplace_exponent",
    "laplace_exponent_quadrature",
    "delta0",
    "I_func",
    "quad_delta",
    "quad_J",
    "quad_pow32_theta",
    "quad_pow32_unit",
    "pow32_theta_closed",
    "pow32_unit_closed",
    "gf_phi",
    "gf_psi",
    "marginal_pgf",
    "DeltaCoeffs",
    "delta_coeffs",
    "f_theta",
    "sigma_moment",
    "pgf_extract",
]


class PrecisionError(RuntimeError):
    """A numerical routine could not reach the requested accuracy."""


# ---------------------------------------------------------------------------
# gamma, beta, counting
# ---------------------------------------------------------------------------


def log_gamma(x: float) -> float:
    """log Gamma(x) for x > 0."""
    if x <= 0.0:
        raise ValueError(f"log_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def beta_fn(a: float, b: float) -> float:
    """Euler beta function B(a, b) for a, b > 0."""
    return math.exp(log_gamma(a) + log_gamma(b) - log_gamma(a + b))


def catalan_trees(n: int) -> int:
    """Number of ordered binary trees with n labelled leaves, (2n-2)!/(n-1)!."""
    if n < 1:
        raise ValueError(f"catalan_trees requires n >= 1, got {n}")
    return math.factorial(2 * n - 2) // math.factorial(n - 1)


# ---------------------------------------------------------------------------
# merger rates
# ---------------------------------------------------------------------------


def rate_nk(n: int, k: int) -> float:
    """Rate at which a fixed k-tuple of the n blocks merges: B(k-1/2, n-k+1/2)."""
    if not 2 <= k <= n:
        raise ValueError(f"rate_nk requires 2 <= k <= n, got n={n}, k={k}")
    return beta_fn(k - 0.5, n - k + 0.5)


def rate_total(n: int) -> float:
    """Total jump rate from a state with n blocks: (n-1) B(1/2, n-1/2)."""
    if n < 2:
        raise ValueError(f"rate_total requires n >= 2, got {n}")
    return (n - 1) * beta_fn(0.5, n - 0.5)


@dataclass(frozen=True)
class LambdaMeasure:
    """Finite measure on [0, 1] driving a multiple-merger coalescent.

    kind "kingman"  point mass at 0 (pairwise mergers only),
    kind "uniform"  density 1 on (0, 1),
    kind "beta"     unnormalized density u**(a-1) (1-u)**(b-1); a=1.5, b=0.5
                    reproduces rate_nk / rate_total exactly.
    """

    kind: str
    a: float = float("nan")
    b: float = float("nan")

    def __post_init__(self):
        if self.kind not in ("kingman", "uniform", "beta"):
            raise ValueError(f"unknown measure kind {self.kind!r}")
        if self.kind == "beta" and not (self.a > 0.0 and self.b > 0.0):
            raise ValueError("beta measure requires a > 0 and b > 0")

    @classmethod
    def kingman(cls) -> "LambdaMeasure":
        return cls("kingman")

    @classmethod
    def uniform(cls) -> "LambdaMeasure":
        return cls("uniform")

    @classmethod
    def beta(cls, a: float, b: float) -> "LambdaMeasure":
        return cls("beta", a, b)

    def density(self, u: float) -> float:
        """Density at u in (0, 1); undefined for the kingman kind."""
        if self.kind == "kingman":
            raise ValueError("kingman measure has no density")
        if not 0.0 < u < 1.0:
            raise ValueError(f"density requires 0 < u < 1, got {u}")
        if self.kind == "uniform":
            return 1.0
        return u ** (self.a - 1.0) * (1.0 - u) ** (self.b - 1.0)


def _quad_unit(f: Callable[[float], float], tol: float = 1e-12) -> tuple[float, float]:
    """Integrate f over (0,1) after substituting away endpoint singularities.

    Uses u = s^2 on (0, 1/2) and u = 1 - t^2 on (1/2, 1), which removes
    power singularities up to u**-3/2 and (1-u)**-1/2.
    """
    half = math.sqrt(0.5)
    lo, e1 = integrate.quad(lambda s: 2.0 * s * f(s * s), 0.0, half,
                            epsabs=tol, epsrel=tol, limit=200)
    hi, e2 = integrate.quad(lambda t: 2.0 * t * f(1.0 - t * t), 0.0, half,
                            epsabs=tol, epsrel=tol, limit=200)
    return lo + hi, e1 + e2


def rate_bk_general(measure: LambdaMeasure, b: int, k: int) -> float:
    """Merger rate int u^(k-2) (1-u)^(b-k) measure(du) by adaptive quadrature."""
    if not 2 <= k <= b:
        raise ValueError(f"rate_bk_general requires 2 <= k <= b, got b={b}, k={k}")
    if measure.kind == "kingman":
        return 1.0 if k == 2 else 0.0
    if measure.kind == "beta":
        # combined exponents must stay integrable at both endpoints
        if k - 2 + measure.a <= 0.0 or b - k + measure.b <= 0.0:
            raise ValueError("non-integrable combination of measure and (b, k)")
    val, err = _quad_unit(lambda u: u ** (k - 2) * (1.0 - u) ** (b - k) * measure.density(u))
    if err > 1e-8:
        raise PrecisionError(f"rate quadrature error {err:.2e} exceeds 1e-8")
    return val


# ---------------------------------------------------------------------------
# Laplace exponent
# ---------------------------------------------------------------------------


def laplace_exponent(lam: float) -> float:
    """Closed form 2 sqrt(pi) Gamma(lam + 1/2) / Gamma(lam), for lam > 0."""
    if lam <= 0.0:
        raise ValueError(f"laplace_exponent requires lam > 0, got {lam}")
    return 2.0 * _SQRT_PI * math.exp(math.lgamma(lam + 0.5) - math.lgamma(lam))


def laplace_exponent_quadrature(lam: float) -> float:
    """int_0^1 (1 - (1-u)^lam) u^(-3/2) (1-u)^(-1/2) du, the quadrature route."""
    if lam <= 0.0:
        raise ValueError(f"laplace_exponent_quadrature requires lam > 0, got {lam}")

    def f(u: float) -> float:
        # 1 - (1-u)^lam via expm1/log1p to keep precision near u = 0
        return -math.expm1(lam * math.log1p(-u)) * u ** -1.5 * (1.0 - u) ** -0.5

    val, err = _quad_unit(f)
    if err > 1e-8:
        raise PrecisionError(f"laplace quadrature error {err:.2e} exceeds 1e-8")
    return val


# ---------------------------------------------------------------------------
# delta0, I and their quadrature companions
# ---------------------------------------------------------------------------

_DEGENERATE_EPS = 1e-9


def delta0(a: float, b: float) -> float:
    """Closed form of int_0^inf dt / ((t+1) sqrt(t^2 + 2at + b)).

    Requires a >= 0, b >= 0, a + b > 0.  The discriminant q = 1 + b - 2a
    selects the branch: logarithmic for q > 0, arctangent for q < 0, and the
    degenerate limit 2 / (1 + sqrt(b)) when |q| < 1e-9.
    """
    if a < 0.0 or b < 0.0 or a + b <= 0.0:
        raise ValueError(f"delta0 requires a, b >= 0 and a + b > 0, got ({a}, {b})")
    q = 1.0 + b - 2.0 * a
    rb = math.sqrt(b)
    if abs(q) < _DEGENERATE_EPS:
        return 2.0 / (1.0 + rb)
    if q > 0.0:
        s = math.sqrt(q)
        return math.log((1.0 + rb + s) / (1.0 + rb - s)) / s
    s = math.sqrt(-q)
    return 2.0 * math.atan(s / (1.0 + rb)) / s


def _delta0_complex(a: complex, b: complex) -> complex:
    q = 1.0 + b - 2.0 * a
    rb = cmath.sqrt(b)
    if abs(q) < _DEGENERATE_EPS:
        return 2.0 / (1.0 + rb)
    s = cmath.sqrt(q)
    return cmath.log((1.0 + rb + s) / (1.0 + rb - s)) / s


def I_func(a: float, b: float) -> float:
    """1 + log 2 - log(sqrt(b) + a) - delta0(a, b); continuous, I(0, 0) = 1."""
    if a < 0.0 or b < 0.0:
        raise ValueError(f"I_func requires a, b >= 0, got ({a}, {b})")
    if a == 0.0 and b == 0.0:
        return 1.0
    return 1.0 + _LOG2 - math.log(math.sqrt(b) + a) - delta0(a, b)


def _I_complex(a: complex, b: complex) -> complex:
    if a == 0 and b == 0:
        return 1.0 + 0.0j
    return 1.0 + _LOG2 - cmath.log(cmath.sqrt(b) + a) - _delta0_complex(a, b)


def _quad_halfline(f: Callable[[float], float], tol: float = 1e-12) -> tuple[float, float]:
    """Integrate f over (0, inf) through the map t -> t / (1 - t)."""

    def g(t: float) -> float:
        om = 1.0 - t
        return f(t / om) / (om * om)

    return integrate.quad(g, 0.0, 1.0, epsabs=tol, epsrel=tol, limit=400)


def quad_delta(a: float, b: float) -> float:
    """Quadrature route for delta0(a, b)."""
    if a < 0.0 or b < 0.0 or a + b <= 0.0:
        raise ValueError(f"quad_delta requires a, b >= 0 and a + b > 0, got ({a}, {b})")
    val, err = _quad_halfline(
        lambda t: 1.0 / ((t + 1.0) * math.sqrt(t * t + 2.0 * a * t + b))
    )
    if err > 1e-7:
        raise PrecisionError(f"quad_delta error {err:.2e} exceeds 1e-7")
    return val


def quad_J(a: float, b: float) -> float:
    """Quadrature route for I(a, b):

    int_0^inf dt/(t+1) * ( t / sqrt(t^2 + 2at + b) - t / (t+1) ).
    """
    if a < 0.0 or b < 0.0:
        raise ValueError(f"quad_J requires a, b >= 0, got ({a}, {b})")

    def f(t: float) -> float:
        tp = t + 1.0
        return (t / math.sqrt(t * t + 2.0 * a * t + b) - t / tp) / tp if t > 0.0 else 0.0

    val, err = _quad_halfline(f)
    if err > 1e-7:
        raise PrecisionError(f"quad_J error {err:.2e} exceeds 1e-7")
    return val


def quad_pow32_theta(a: float, b: float) -> float:
    """int_0^inf t dt / (t^2 + 2at + b)^(3/2), closed form 1/(sqrt(b) + a)."""
    val, err = _quad_halfline(lambda t: t * (t * t + 2.0 * a * t + b) ** -1.5)
    if err > 1e-9:
        raise PrecisionError(f"quad_pow32_theta error {err:.2e} exceeds 1e-9")
    return val


def quad_pow32_unit(a: float, b: float) -> float:
    """int_0^inf dt / (t^2 + 2at + b)^(3/2), closed form 1/(sqrt(b)(sqrt(b)+a))."""
    val, err = _quad_halfline(lambda t: (t * t + 2.0 * a * t + b) ** -1.5)
    if err > 1e-9:
        raise PrecisionError(f"quad_pow32_unit error {err:.2e} exceeds 1e-9")
    return val


def pow32_theta_closed(a: float, b: float) -> float:
    return 1.0 / (math.sqrt(b) + a)


def pow32_unit_closed(a: float, b: float) -> float:
    rb = math.sqrt(b)
    return 1.0 / (rb * (rb + a))


# ---------------------------------------------------------------------------
# generating functions of the final-merger counts
# ---------------------------------------------------------------------------
#
# B = number of blocks merged by the last event, E = singletons among them.
# gf_phi(r, r*) = E[r^(B-E) r*^E]; the refined version gf_psi(r, r0, r1)
# tracks the continuum pruning counts (U, V, W) through
# E[r^(U-V) r0^(V-W) r1^W] = r * I(1 - (r + r1)/2, 1 - r0).


def _on_cut(z: complex) -> bool:
    return z.imag == 0.0 and z.real <= 0.0


def _gf_phi_complex(rho: complex, rho_star: complex) -> complex:
    if rho == 1.0 and rho_star == 1.0:
        return 1.0 + 0.0j
    if rho == 0.0:
        return 0.0 + 0.0j
    head = 1.0 + cmath.sqrt(1.0 - rho_star)
    arg = head - 0.5 * (rho + rho_star)
    sr = cmath.sqrt(rho)
    if _on_cut(arg) or head - sr == 0.0 or _on_cut((head + sr) / (head - sr)):
        raise ValueError(f"gf_phi hit a branch cut at ({rho}, {rho_star})")
    return rho * (1.0 + _LOG2 - cmath.log(arg)) - sr * cmath.log((head + sr) / (head - sr))


def gf_phi(rho, rho_star):
    """E[rho^(B-E) rho_star^E] for the final merger counts (B, E).

    Real arguments must lie in [0, 1]; the (1, 1) corner evaluates to 1
    exactly.  Complex arguments are accepted for coefficient extraction.
    """
    if isinstance(rho, complex) or isinstance(rho_star, complex):
        return _gf_phi_complex(complex(rho), complex(rho_star))
    if not (0.0 <= rho <= 1.0 and 0.0 <= rho_star <= 1.0):
        raise ValueError(f"gf_phi requires arguments in [0, 1], got ({rho}, {rho_star})")
    if rho == 1.0 and rho_star == 1.0:
        return 1.0
    if rho == 0.0:
        return 0.0
    head = 1.0 + math.sqrt(1.0 - rho_star)
    arg = head - 0.5 * (rho + rho_star)
    sr = math.sqrt(rho)
    # head - sr >= sqrt(1 - rho_star) + 1 - sqrt(rho) > 0 away from (1, 1)
    return rho * (1.0 + _LOG2 - math.log(arg)) - sr * math.log((head + sr) / (head - sr))


def gf_psi(rho, rho0, rho1):
    """E[rho^(U-V) rho0^(V-W) rho1^W] = rho * I(1 - (rho + rho1)/2, 1 - rho0)."""
    if isinstance(rho, complex) or isinstance(rho0, complex) or isinstance(rho1, complex):
        rho_c = complex(rho)
        return rho_c * _I_complex(1.0 - 0.5 * (rho_c + complex(rho1)), 1.0 - complex(rho0))
    for name, v in (("rho", rho), ("rho0", rho0), ("rho1", rho1)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"gf_psi requires {name} in [0, 1], got {v}")
    return rho * I_func(1.0 - 0.5 * (rho + rho1), 1.0 - rho0)


_MARGINALS = {
    "E": lambda z: gf_phi(1.0, z),
    "B-E": lambda z: gf_phi(z, 1.0),
    "B": lambda z: gf_phi(z, z),
    "W": lambda z: gf_psi(1.0, 1.0, z),
    "V-W": lambda z: gf_psi(1.0, z, 1.0),
    "V": lambda z: gf_psi(1.0, z, z),
    "U": lambda z: gf_psi(z, z, z),
}


def marginal_pgf(which: str) -> Callable:
    """Single-variable pgf of one marginal count: E, B-E, B, W, V-W, V, or U."""
    try:
        return _MARGINALS[which]
    except KeyError:
        raise ValueError(f"unknown marginal {which!r}; choose from {sorted(_MARGINALS)}")


# ---------------------------------------------------------------------------
# contraction coefficients for the pruning transform
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeltaCoeffs:
    """Coefficients of the square-root kernel used by the pruning transform.

    radicand(a) = delta0 + 2 delta1 sqrt(1 - a) - delta2 * a, which must stay
    positive on [0, 1]; delta0 - delta2 >= theta^2 > 0 is enforced.
    """

    delta0: float
    delta1: float
    delta2: float
    theta: float
    lam: float
    alpha: float

    def __post_init__(self):
        if self.delta0 - self.delta2 < self.theta ** 2 - 1e-12:
            raise ValueError("invariant delta0 - delta2 >= theta^2 violated")


def delta_coeffs(theta: float, lam: float, alpha: float,
                 rho: float = 1.0, rho0: float = 1.0, rho1: float = 1.0) -> DeltaCoeffs:
    """Build DeltaCoeffs from theta > 0, lam > 0, alpha > 0 and weights in [0, 1]."""
    if theta <= 0.0 or lam <= 0.0 or alpha <= 0.0:
        raise ValueError("delta_coeffs requires theta, lam, alpha > 0")
    for name, v in (("rho", rho), ("rho0", rho0), ("rho1", rho1)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"delta_coeffs requires {name} in [0, 1], got {v}")
    r = math.sqrt(lam / alpha)
    d0 = theta * theta + lam / alpha + 2.0 * theta * r * (1.0 - rho)
    d1 = theta * rho * r
    d2 = (lam / alpha) * rho0 - theta * r * (rho - rho1)
    return DeltaCoeffs(d0, d1, d2, theta, lam, alpha)


def f_theta(a: float, coeffs: DeltaCoeffs) -> float:
    """theta + sqrt(lam/alpha) - sqrt(delta0 + 2 delta1 sqrt(1-a) - delta2 a)."""
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"f_theta requires a in [0, 1], got {a}")
    radicand = coeffs.delta0 + 2.0 * coeffs.delta1 * math.sqrt(1.0 - a) - coeffs.delta2 * a
    if radicand <= 0.0:
        raise PrecisionError(f"radicand {radicand} not positive; invariant violated")
    return coeffs.theta + math.sqrt(coeffs.lam / coeffs.alpha) - math.sqrt(radicand)


def sigma_moment(n: int, lam: float, alpha: float) -> float:
    """n-th moment weight Gamma(n - 1/2) / (2 sqrt(alpha pi) lam^(n - 1/2))."""
    if n < 1:
        raise ValueError(f"sigma_moment requires n >= 1, got {n}")
    if lam <= 0.0 or alpha <= 0.0:
        raise ValueError("sigma_moment requires lam > 0 and alpha > 0")
    return math.exp(math.lgamma(n - 0.5) - (n - 0.5) * math.log(lam)) / (2.0 * math.sqrt(alpha * math.pi))


# ---------------------------------------------------------------------------
# power-series coefficient extraction
# ---------------------------------------------------------------------------


def pgf_extract(pgf: Callable[[complex], complex], kmax: int,
                radius: float = 0.5, tol: float | None = 1e-8) -> tuple[np.ndarray, float]:
    """Extract probabilities p_0..p_kmax from a pgf by circle quadrature.

    Evaluates the pgf on a uniform grid of the circle |z| = radius and
    inverts with an FFT.  The run is repeated at radius/2 and the maximum
    coefficient deviation between the two radii is returned as the error
    estimate.  When a tolerance is requested, exceeding it raises
    PrecisionError, as does an imaginary residue or a negative coefficient
    beyond 1e-9; tol=None skips the checks and just reports the estimate
    (coefficients beyond k ~ 12 at radius 0.5 sit below double-precision
    resolution, since roundoff grows like radius**-k).
    """
    if not 0.0 < radius < 1.0:
        raise ValueError(f"radius must lie in (0, 1), got {radius}")
    if not 0 <= kmax <= 512:
        raise ValueError(f"kmax must lie in [0, 512], got {kmax}")
    npts = 64
    while npts < 8 * (kmax + 1):
        npts *= 2

    def run(r: float) -> np.ndarray:
        z = r * np.exp(2j * np.pi * np.arange(npts) / npts)
        vals = np.array([pgf(complex(zz)) for zz in z])
        # forward transform carries the e^(-2 pi i jk/N) kernel that picks
        # out the k-th Taylor coefficient; ifft would read the tail backwards
        return np.fft.fft(vals)[: kmax + 1] / npts / r ** np.arange(kmax + 1)

    c_main = run(radius)
    c_half = run(radius / 2.0)
    err = float(np.max(np.abs(c_main - c_half)))
    probs = c_main.real.copy()
    if tol is not None:
        if err > tol:
            raise PrecisionError(f"coefficient deviation {err:.2e} between radii exceeds {tol:.1e}")
        if float(np.max(np.abs(c_main.imag))) > 1e-9:
            raise PrecisionError("imaginary residue above 1e-9 in extracted coefficients")
        if float(probs.min()) < -1e-9:
            raise PrecisionError(f"negative coefficient {probs.min():.2e} below -1e-9")
    return probs, err
