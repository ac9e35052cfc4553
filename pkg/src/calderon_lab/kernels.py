"""Radial convolution kernels with a singularity at the origin.

Two families are supported:

  * the classical kernels built from the modified Bessel function of the
    second kind, Phi(y) = y^(-nu) K_nu(y), which behave like y^(-2 nu)
    near 0 and decay like y^(-nu-1/2) e^(-y);
  * power profiles with a slowly varying correction,
    Phi(z) = z^(alpha - n) * Lambda(z) on (0, z1], continued past z1 by
    an exponential tail.

Both expose the profile in measure coordinates,
phi(tau) = Phi((tau / V_n)^(1/n)), the cone kernel
phi(tau) / (1 + (tau/t)^(k/n)), and checkers for the derivative bounds
that the smoothness estimates require.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sp

from .errors import DerivativeUnstable, DomainError, NonConvergent
from .gridfn import (
    LogGrid,
    SampledFunction,
    cumulative_from_zero,
    cumulative_tail,
    integrate,
    make_log_grid,
    sample,
)


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


# ---------------------------------------------------------------------------
# slowly varying factors
# ---------------------------------------------------------------------------

def _iterated_log(t, level: int, scale: float):
    """level 1: log(e*scale/t); level j+1: log(e * previous).  All levels
    equal 1 at t = scale and are positive and decreasing on (0, scale]."""
    out = np.log(math.e * scale / np.asarray(t, dtype=float))
    for _ in range(level - 1):
        out = np.log(math.e * out)
    return out


_KIND_LEVEL = {"log": 1, "loglog": 2}


@dataclass(frozen=True)
class SlowlyVaryingSpec:
    """Product of iterated-log powers, lambda(t) = prod l_j(t)^e_j,
    measured against e*scale/t so the factors are defined and positive
    on all of (0, scale]."""

    factors: tuple = ()          # ((kind, exponent), ...)
    scale: float = 1.0

    def __post_init__(self):
        for kind, _ in self.factors:
            if kind not in _KIND_LEVEL:
                raise DomainError(f"unknown slowly varying factor kind {kind!r}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.ones_like(t)
        for kind, expo in self.factors:
            out = out * _iterated_log(t, _KIND_LEVEL[kind], self.scale) ** expo
        return out

    def powered(self, q: float) -> "SlowlyVaryingSpec":
        """The same factors with every exponent multiplied by q."""
        return SlowlyVaryingSpec(
            factors=tuple((k, e * q) for k, e in self.factors), scale=self.scale)

    def sympy_expr(self, var):
        expr = sp.Integer(1)
        for kind, expo in self.factors:
            inner = sp.log(sp.E * self.scale / var)
            for _ in range(_KIND_LEVEL[kind] - 1):
                inner = sp.log(sp.E * inner)
            expr *= inner ** expo
        return expr

    def is_trivial(self) -> bool:
        return all(e == 0 for _, e in self.factors)


def slow_variation_witness(sv: SlowlyVaryingSpec, grid: LogGrid,
                           gamma: float) -> dict:
    """Where on the grid t^gamma*lambda increases and t^(-gamma)*lambda
    decreases simultaneously.

    The classical property is asymptotic at the origin: log factors of
    either sign violate it on some range (near T for small gamma), so
    the witness reports the longest contiguous valid run.
    """
    t = grid.points
    lam = sv(t)
    up = t ** gamma * lam
    down = t ** -gamma * lam
    inc_ok = np.diff(up) >= -1e-12 * np.abs(up[:-1])
    dec_ok = np.diff(down) <= 1e-12 * np.abs(down[:-1])
    ok = inc_ok & dec_ok
    best_len, best_lo, run_lo = 0, 0, 0
    length = 0
    for i, flag in enumerate(ok):
        if flag:
            if length == 0:
                run_lo = i
            length += 1
            if length > best_len:
                best_len, best_lo = length, run_lo
        else:
            length = 0
    return {
        "gamma": gamma,
        "holds_everywhere": bool(np.all(ok)),
        "ok_fraction": float(np.mean(ok)),
        "run_lower": float(t[best_lo]) if best_len else math.nan,
        "run_upper": float(t[best_lo + best_len]) if best_len else math.nan,
    }


def slowly_varying_ratios(sv: SlowlyVaryingSpec, gamma: float,
                          grid: LogGrid) -> dict:
    """The three ratios quantifying slow variation, as grid functions:

      head_ratio(t)  = int_0^t tau^(gamma-1) lam / (t^gamma lam(t))
      tail_ratio(t)  = int_t^T tau^(-gamma-1) lam / (t^(-gamma) lam(t))
      log_tail_ratio(t) = lam(t) / int_t^T tau^(-1) lam

    head_ratio and tail_ratio stay bounded; log_tail_ratio tends to 0 at
    the origin.
    """
    if gamma <= 0:
        raise DomainError("gamma must be positive")
    t = grid.points
    lam = sv(t)
    head = cumulative_from_zero(t, t ** (gamma - 1.0) * lam)
    if not np.isfinite(head[0]):
        raise NonConvergent("head integral diverges; gamma too small for factors")
    tail = cumulative_tail(t, t ** (-gamma - 1.0) * lam)
    log_tail = cumulative_tail(t, lam / t)
    with np.errstate(divide="ignore"):
        out = {
            "head_ratio": SampledFunction(grid, head / (t ** gamma * lam)),
            "tail_ratio": SampledFunction(grid, tail / (t ** -gamma * lam)),
            "log_tail_ratio": SampledFunction(grid, np.where(log_tail > 0,
                                                             lam / log_tail, np.inf)),
        }
    return out


# ---------------------------------------------------------------------------
# kernel variants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BesselMcDonald:
    """Profile y^(-nu) K_nu(y); requires nu in (0, n/2)."""
    nu: float


@dataclass(frozen=True)
class PowerSlowlyVarying:
    """Profile z^(alpha-n) Lambda(z) on (0, z1], exponential tail after."""
    alpha: float
    sv: SlowlyVaryingSpec
    z1: float = 1.0
    tail_rate: float = 1.0


def bessel_k_integral(nu: float, rho: float, tol: float = 1e-10) -> float:
    """K_nu(rho) evaluated from its integral representation,
    (1/2) (rho/2)^nu * int_0^inf xi^(-nu-1} exp(-xi - rho^2/(4 xi)) dxi.

    For rho > 700 the value underflows; use bessel_k_flagged to detect.
    """
    if rho <= 0:
        raise DomainError("rho must be positive")
    if rho > 700.0:
        return 0.0
    c = rho * rho / 4.0
    val, _ = integrate(lambda x: x ** (-nu - 1.0) * np.exp(-x - c / x),
                       0.0, np.inf, singular_at_a=True, tol=tol)
    return 0.5 * (rho / 2.0) ** nu * val


def bessel_k_flagged(nu: float, rho: float, tol: float = 1e-10):
    """(value, underflowed) pair; underflow kicks in past rho = 700."""
    if rho > 700.0:
        return 0.0, True
    return bessel_k_integral(nu, rho, tol=tol), False


def bessel_k(nu: float, rho, tol: float = 1e-10):
    """Vectorized K_nu; scalar input via the defining integral, arrays
    via a shared-panel Gauss rule on the log axis (relative accuracy
    well below 1e-10 for rho in (0, 700])."""
    rho = np.asarray(rho, dtype=float)
    if rho.ndim == 0:
        return bessel_k_integral(nu, float(rho), tol=tol)
    return _bessel_k_batch(nu, rho)


def _bessel_k_batch(nu: float, rho: np.ndarray) -> np.ndarray:
    out = np.zeros_like(rho)
    alive = (rho > 0) & (rho <= 700.0)
    if not np.any(alive):
        return out
    r = rho[alive]
    # integrand in u = log xi: exp(-nu*u - e^u - (rho^2/4) e^-u)
    u_lo = min(-45.0, float(np.log(np.min(r) ** 2 / 2980.0)) - 3.0)
    u_hi = 8.0
    n_panels = max(24, int((u_hi - u_lo) / 1.0))
    edges = np.linspace(u_lo, u_hi, n_panels + 1)
    nodes16, w16 = np.polynomial.legendre.leggauss(16)
    mids = 0.5 * (edges[1:] + edges[:-1])
    rads = 0.5 * (edges[1:] - edges[:-1])
    u = (mids[:, None] + rads[:, None] * nodes16[None, :]).ravel()
    w = (rads[:, None] * w16[None, :]).ravel()
    base = -nu * u - np.exp(u)
    vals = np.empty_like(r)
    quarter = r * r / 4.0
    for lo in range(0, len(r), 2048):
        sl = slice(lo, min(lo + 2048, len(r)))
        expo = base[None, :] - quarter[sl, None] * np.exp(-u)[None, :]
        with np.errstate(under="ignore"):
            vals[sl] = np.exp(expo) @ w
    out[alive] = 0.5 * (r / 2.0) ** nu * vals
    return out


@dataclass(frozen=True)
class KernelSpec:
    """A radial kernel on R^n: the profile Phi must be continuous,
    positive, nonincreasing, with finite positive integral of
    Phi(z) z^(n-1) over (0, inf)."""

    variant: object
    n: int = 1

    def __post_init__(self):
        if isinstance(self.variant, BesselMcDonald):
            if not (0.0 < self.variant.nu < self.n / 2.0):
                raise DomainError(
                    f"nu must lie in (0, n/2) = (0, {self.n / 2}), got {self.variant.nu}")
        elif isinstance(self.variant, PowerSlowlyVarying):
            if not (0.0 < self.variant.alpha < self.n):
                raise DomainError(
                    f"alpha must lie in (0, n) = (0, {self.n}), got {self.variant.alpha}")
            if self.variant.z1 <= 0 or self.variant.tail_rate <= 0:
                raise DomainError("z1 and tail_rate must be positive")
        else:
            raise DomainError(f"unknown kernel variant {type(self.variant)}")

    @property
    def ball_volume(self) -> float:
        return unit_ball_volume(self.n)

    @property
    def singularity_order(self) -> float:
        """alpha such that phi(tau) ~ tau^(alpha/n - 1) near 0."""
        if isinstance(self.variant, BesselMcDonald):
            return self.n - 2.0 * self.variant.nu
        return self.variant.alpha

    def profile(self, z):
        """Phi(z), vectorized."""
        z = np.asarray(z, dtype=float)
        scalar = z.ndim == 0
        z = np.atleast_1d(z)
        if isinstance(self.variant, BesselMcDonald):
            nu = self.variant.nu
            with np.errstate(all="ignore"):
                out = np.where(z > 0, z, np.nan) ** (-nu) * _bessel_k_batch(nu, z)
        else:
            v = self.variant
            lam = v.sv(np.minimum(z, v.z1)) if v.sv.factors else np.ones_like(z)
            head = z ** (v.alpha - self.n) * lam
            cap = v.z1 ** (v.alpha - self.n) * (v.sv(v.z1) if v.sv.factors else 1.0)
            out = np.where(z <= v.z1, head,
                           cap * np.exp(-v.tail_rate * (z - v.z1)))
        return float(out[0]) if scalar else out

    def measure_profile_fn(self):
        """phi(tau) = Phi((tau / V_n)^(1/n)) as a callable."""
        vn = self.ball_volume
        n = self.n
        return lambda tau: self.profile((np.asarray(tau, dtype=float) / vn) ** (1.0 / n))

    def radial_mass(self, tol: float = 1e-8) -> float:
        """int_0^inf Phi(z) z^(n-1) dz; raises NonConvergent when the
        kernel is not integrable."""
        n = self.n
        val, _ = integrate(lambda z: self.profile(z) * z ** (n - 1),
                           0.0, np.inf, singular_at_a=True, tol=tol)
        return val

    def validate(self, points: int = 64) -> None:
        """Check positivity, monotonicity, and integrability of Phi on a
        test grid; raises DomainError / NonConvergent on failure."""
        zg = np.geomspace(1e-6, 20.0, points)
        ph = self.profile(zg)
        if not np.all(ph > 0):
            raise DomainError("profile must be positive")
        if np.any(np.diff(ph) > 1e-12 * ph[:-1]):
            raise DomainError("profile must be nonincreasing")
        mass = self.radial_mass(tol=1e-6)
        if not (0.0 < mass < math.inf):
            raise NonConvergent("kernel profile is not integrable")


def measure_profile(kernel: KernelSpec, grid: LogGrid) -> SampledFunction:
    """Sample phi(tau) = Phi((tau/V_n)^(1/n)) on a grid; positive and
    decreasing, kept evaluable everywhere via the analytic extension."""
    return sample(kernel.measure_profile_fn(), grid,
                  monotonicity="decreasing", extension="analytic")


def cone_kernel(phi, k: int, n: int, t, tau):
    """phi(tau) / (1 + (tau/t)^(k/n)); nondecreasing in t, at most
    phi(tau), within a factor 2 of the piecewise form
    min(phi(tau), (t/tau)^(k/n) phi(tau))."""
    t = np.asarray(t, dtype=float)
    tau = np.asarray(tau, dtype=float)
    return phi(tau) / (1.0 + (tau / t) ** (k / float(n)))


def auto_z1(kernel: KernelSpec, z_grid: np.ndarray | None = None,
            factor: float = 4.0) -> float:
    """Largest grid point where the small-argument two-sided bound still
    holds within `factor`: the ratio Phi(y) * y^(2 nu) (power variants:
    Phi(z) * z^(n-alpha) / Lambda) must stay within [limit/factor,
    limit*factor] of its value at the smallest grid point."""
    if z_grid is None:
        z_grid = np.geomspace(1e-6, 20.0, 256)
    if isinstance(kernel.variant, BesselMcDonald):
        ratio = kernel.profile(z_grid) * z_grid ** (2.0 * kernel.variant.nu)
    else:
        v = kernel.variant
        lam = v.sv(np.minimum(z_grid, v.z1)) if v.sv.factors else np.ones_like(z_grid)
        ratio = kernel.profile(z_grid) * z_grid ** (kernel.n - v.alpha) / lam
    rhat = ratio / ratio[0]
    ok = (rhat >= 1.0 / factor) & (rhat <= factor)
    if not ok[0]:
        raise DomainError("two-sided bound fails at the smallest test point")
    bad = np.nonzero(~ok)[0]
    idx = (bad[0] - 1) if len(bad) else (len(z_grid) - 1)
    return float(z_grid[idx])


# ---------------------------------------------------------------------------
# derivative condition checker
# ---------------------------------------------------------------------------

# coefficients a[j][i] in (z^-1 d/dz)^j Phi = sum_i a[j][i] z^(i-2j) Phi^(i)
@lru_cache(maxsize=None)
def _radial_derivative_coeffs(j: int) -> tuple:
    if j == 1:
        return (0.0, 1.0)
    prev = _radial_derivative_coeffs(j - 1)
    out = [0.0] * (j + 1)
    for i, a in enumerate(prev):
        if a == 0.0:
            continue
        # z^-1 d/dz [z^(i-2(j-1)) Phi^(i)] contributes to orders i and i+1
        out[i] += a * (i - 2 * (j - 1))
        out[i + 1] += a
    return tuple(out)


_STENCILS = {
    1: (np.array([-1, 0, 1]), np.array([-0.5, 0.0, 0.5])),
    2: (np.array([-1, 0, 1]), np.array([1.0, -2.0, 1.0])),
    3: (np.array([-2, -1, 0, 1, 2]), np.array([-0.5, 1.0, 0.0, -1.0, 0.5])),
    4: (np.array([-2, -1, 0, 1, 2]), np.array([1.0, -4.0, 6.0, -4.0, 1.0])),
}


def _derivatives_richardson(f, z: np.ndarray, order: int, h_rel: float = 1e-4,
                            stability_tol: float = 1e-3) -> np.ndarray:
    """order-th derivative at points z by central differences with two
    Richardson extrapolation levels (h, h/2, h/4, each O(h^2))."""
    if order not in _STENCILS:
        raise DomainError(f"derivative order {order} not supported")
    offs, coefs = _STENCILS[order]
    estimates = []
    for lvl in range(3):
        h = z * h_rel / 2 ** lvl
        pts = z[:, None] + offs[None, :] * h[:, None]
        vals = f(pts.ravel()).reshape(pts.shape)
        estimates.append((vals * coefs[None, :]).sum(axis=1) / h ** order)
    d_h, d_h2, d_h4 = estimates
    r1 = (4.0 * d_h2 - d_h) / 3.0
    r2 = (4.0 * d_h4 - d_h2) / 3.0
    r3 = (16.0 * r2 - r1) / 15.0
    scale = np.maximum(np.abs(r3), 1e-300)
    disagreement = np.abs(r2 - r1) / scale
    if np.any(disagreement > stability_tol):
        worst = float(np.max(disagreement))
        raise DerivativeUnstable(
            f"extrapolation levels disagree by {worst:.2e} (> {stability_tol})")
    return r3


@dataclass
class DerivativeConditionReport:
    """Constants of the derivative bounds a kernel profile satisfies.

    a1     -- sup over (0, z1] of max_j z^(2j) |Phi_j(z)| / Phi(z)
    a2     -- same quantity on (z1, inf) against z^k Phi(z)
    delta1 -- inf over (0, z1] of (-1)^k z^k Phi^(k)(z) / Phi(z)
    where Phi_j = (z^-1 d/dz)^j Phi.
    """
    a1: float
    a2: float
    delta1: float
    z1: float
    inner_ok: bool
    outer_ok: bool
    lower_ok: bool


def _phi_derivative_fns(kernel: KernelSpec, k: int):
    """Callables z -> Phi^(i)(z), i = 0..k: symbolic for the power
    variants (exact), Richardson differences for the Bessel family."""
    if isinstance(kernel.variant, PowerSlowlyVarying):
        v = kernel.variant
        z = sp.symbols("z", positive=True)
        head = z ** (v.alpha - kernel.n) * v.sv.sympy_expr(z)
        cap = head.subs(z, v.z1)
        tail = cap * sp.exp(-v.tail_rate * (z - v.z1))
        fns = []
        for i in range(k + 1):
            h_l = sp.lambdify(z, sp.diff(head, z, i), "numpy")
            t_l = sp.lambdify(z, sp.diff(tail, z, i), "numpy")
            def fn(zz, h_l=h_l, t_l=t_l):
                zz = np.asarray(zz, dtype=float)
                out = np.where(zz <= v.z1,
                               np.asarray(h_l(np.minimum(zz, v.z1)), dtype=float),
                               np.asarray(t_l(np.maximum(zz, v.z1)), dtype=float))
                return out
            fns.append(fn)
        return fns
    prof = kernel.profile
    fns = [lambda zz: prof(zz)]
    for i in range(1, k + 1):
        fns.append(lambda zz, i=i: _derivatives_richardson(prof, np.atleast_1d(
            np.asarray(zz, dtype=float)), i))
    return fns


def check_derivative_conditions(kernel: KernelSpec, k: int,
                                z1: float | None = None,
                                points: int = 96) -> DerivativeConditionReport:
    """Evaluate the two-scale derivative bounds and the k-th derivative
    sign bound for a kernel profile on test grids either side of z1.

    z1 defaults to the kernel's own split point (power variants) or the
    automatically selected small-argument range (Bessel family).
    """
    if k < 1:
        raise DomainError("k must be a positive integer")
    if z1 is None:
        z1 = (kernel.variant.z1 if isinstance(kernel.variant, PowerSlowlyVarying)
              else auto_z1(kernel))
    derivs = _phi_derivative_fns(kernel, k)

    z_in = np.geomspace(z1 * 1e-5, z1, points)
    z_out = np.geomspace(z1 * 1.02, max(10.0 * z1, z1 + 30.0), points)

    def radial_ratios(z, denom):
        d_vals = [np.asarray(derivs[i](z), dtype=float) for i in range(k + 1)]
        worst = np.zeros_like(z)
        for j in range(1, k + 1):
            coeffs = _radial_derivative_coeffs(j)
            phi_j = np.zeros_like(z)
            for i, a in enumerate(coeffs):
                if a != 0.0:
                    phi_j += a * z ** (i - 2 * j) * d_vals[i]
            worst = np.maximum(worst, z ** (2 * j) * np.abs(phi_j) / denom)
        return worst, d_vals

    phi_in = np.asarray(derivs[0](z_in), dtype=float)
    ratios_in, d_in = radial_ratios(z_in, phi_in)
    a1 = float(np.max(ratios_in))

    phi_out = np.asarray(derivs[0](z_out), dtype=float)
    ratios_out, _ = radial_ratios(z_out, z_out ** k * phi_out)
    a2 = float(np.max(ratios_out))

    delta1 = float(np.min((-1.0) ** k * z_in ** k * d_in[k] / phi_in))

    return DerivativeConditionReport(
        a1=a1, a2=a2, delta1=delta1, z1=float(z1),
        inner_ok=bool(np.isfinite(a1)),
        outer_ok=bool(np.isfinite(a2)),
        lower_ok=bool(delta1 > 0.0))
