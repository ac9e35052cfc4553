"""The optimal-lattice construction and its associate-norm machinery.

Given a weighted Lorentz base space and a kernel profile phi, the
smallest function lattice receiving the cone of smoothness envelopes has
an explicit norm built from the aggregate Psi_q: either a plain sup
norm (the limiting q = 1 case) or a weighted Stieltjes integral against
d Psi_q / Psi_q.  Its associate norm is equivalent, under one of two
dominance conditions on phi, to the product functional

    rho_tilde(g) built from (int_0^t phi) * (int_t^T g),

and this module computes all four candidate associate functionals, the
dominance conditions with their exponent witnesses, the dyadic
discretization sequences used to compare them, and the Hardy-inequality
constants that control the q > 1 comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DomainError,
    Exhausted,
    NonConvergent,
    NoSolution,
    NotEmbedded,
    WitnessMissing,
)
from .gridfn import (
    LogGrid,
    SampledFunction,
    classify_boundedness,
    cumulative_from_zero,
    cumulative_tail,
    head_mass,
    integrate,
    segment_masses,
)
from .lorentz import LorentzSpace, embedding_function


# ---------------------------------------------------------------------------
# tail aggregate and the two dominance conditions
# ---------------------------------------------------------------------------

def tail_embedding_function(space: LorentzSpace, phi, k: int, n: int):
    """(Wtilde, U_q): the tail density Wtilde(t) = V(t)^-1 t^(1-k/n) phi(t)
    and its tail aggregate

        U_1(t) = sup_{[t,T]} Wtilde,
        U_q(t) = ( int_t^T Wtilde^(q') v )^(1/q'),   q > 1,

    with U_q(T) = 0 for q > 1."""
    t = space.grid.points
    wt = t ** (1.0 - k / float(n)) * np.asarray(phi(t), dtype=float) / space.V.values
    wtilde = SampledFunction(space.grid, wt)
    if space.q == 1.0:
        vals = np.maximum.accumulate(wt[::-1])[::-1]
    else:
        vals = cumulative_tail(t, wt ** space.qp * space.v_vals) ** (1.0 / space.qp)
    uq = SampledFunction(space.grid, vals, monotonicity="decreasing")
    return wtilde, uq


def largest_monotone_exponent(t: np.ndarray, vals: np.ndarray,
                              tol: float = 1e-10, j_max: int = 20) -> float:
    """Largest eps in {2^-j : j = 0..j_max} such that t^eps * vals is
    nonincreasing on the grid (0.0 when none passes).  Monotone in eps,
    so the first pass in descending order is the largest."""
    vals = np.asarray(vals, dtype=float)
    for j in range(j_max + 1):
        eps = 2.0 ** -j
        prod = t ** eps * vals
        if np.all(np.diff(prod) <= tol * np.maximum(np.abs(prod[:-1]), 1e-300)):
            return eps
    return 0.0


@dataclass
class ConditionWitness:
    which: str              # "A" | "B"
    d: float                # the dominance constant (inf when unbounded)
    d_grid: float           # raw grid supremum of the defining ratio
    epsilon: float          # monotonicity exponent witness (0 when none)
    holds: bool
    failure_locus: float | None = None


def check_condition_a(phi, V: SampledFunction, k: int, n: int,
                      grid: LogGrid) -> ConditionWitness:
    """Tail-dominated-by-head condition: d1 bounds
    int_t^T tau^(-k/n) phi / ( t^(-k/n) int_0^t phi ), together with an
    exponent eps making t^eps / V(t) nonincreasing."""
    t = grid.points
    ph = np.asarray(phi(t), dtype=float)
    head = cumulative_from_zero(t, ph)
    if not np.isfinite(head[0]):
        raise NonConvergent("phi is not integrable at 0")
    tail = cumulative_tail(t, t ** (-k / float(n)) * ph)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(head > 0, tail / (t ** (-k / float(n)) * head), np.inf)
    d_grid = float(np.max(ratio[:-1]))
    # ratios converging to a positive limit carry power-small corrections
    # that a tight log-exponent fit mistakes for slow growth; the
    # genuinely unbounded cases grow like a full power of the log
    tag = classify_boundedness(grid, np.maximum(ratio, 1e-300), e_tol=0.4).tag
    unbounded = tag == "divergent"
    eps = largest_monotone_exponent(t, 1.0 / V.values)
    holds = (not unbounded) and eps > 0.0
    locus = float(t[int(np.argmax(ratio[:-1]))]) if unbounded else None
    return ConditionWitness(which="A", d=(math.inf if unbounded else d_grid),
                            d_grid=d_grid, epsilon=eps, holds=holds,
                            failure_locus=locus)


def check_condition_b(phi, u_q: SampledFunction, k: int, n: int,
                      grid: LogGrid) -> ConditionWitness:
    """Head-dominated-by-local condition: d2 bounds
    int_0^t tau^(-k/n) phi / ( t^(1-k/n) phi(t) ), together with an
    exponent eps making t^eps U_q(t) nonincreasing."""
    t = grid.points
    ph = np.asarray(phi(t), dtype=float)
    kn = k / float(n)
    integrand = t ** -kn * ph
    head = cumulative_from_zero(t, integrand)
    if not np.isfinite(head[0]):
        d_grid = math.inf
        unbounded = True
        ratio = np.full_like(t, math.inf)
    else:
        ratio = head / (t ** (1.0 - kn) * ph)
        d_grid = float(np.max(ratio))
        unbounded = classify_boundedness(grid, ratio, e_tol=0.4).tag == "divergent"
    eps = largest_monotone_exponent(t, u_q.values)
    holds = (not unbounded) and math.isfinite(d_grid) and eps > 0.0
    locus = None
    if unbounded and math.isfinite(d_grid):
        locus = float(t[int(np.argmax(ratio))])
    return ConditionWitness(which="B", d=(math.inf if unbounded else d_grid),
                            d_grid=d_grid, epsilon=eps, holds=holds,
                            failure_locus=locus)


# ---------------------------------------------------------------------------
# the optimal norm
# ---------------------------------------------------------------------------

def half_level_point(psi: SampledFunction, rel_tol: float = 1e-6) -> float:
    """The point T1 where the nondecreasing aggregate reaches half its
    terminal value, by bisection on the interpolated grid function.
    Raises NoSolution when the aggregate never drops below half (e.g.
    when its limit at 0 is already at least half)."""
    vals = psi.values
    target = 0.5 * vals[-1]
    if not math.isfinite(target):
        raise NoSolution("aggregate is infinite at T")
    if vals[0] >= target:
        raise NoSolution("aggregate exceeds half its terminal value on the whole grid")
    lo, hi = psi.grid.t_min, psi.grid.t_max
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        val = float(psi(mid))
        if abs(val - target) <= rel_tol * vals[-1]:
            return mid
        if val < target:
            lo = mid
        else:
            hi = mid
    raise NoSolution("bisection failed to localize the half level")


@dataclass
class OptimalNormSpec:
    """Description of the optimal lattice norm: `case` is "sup" when the
    norm collapses to the plain sup norm (q = 1 with a positive limit of
    the aggregate at 0), else "weighted"."""
    case: str
    psi: SampledFunction
    T1: float | None
    q: float


def make_optimal_norm_spec(space: LorentzSpace, phi) -> OptimalNormSpec:
    """Build the optimal-norm description for an embedded configuration;
    raises NotEmbedded when the aggregate is infinite at T."""
    psi = embedding_function(space, phi)
    if not math.isfinite(psi.values[-1]):
        raise NotEmbedded("aggregate infinite at T; no optimal lattice")
    if space.q == 1.0:
        # positive limit at 0 iff the underlying density neither decays
        # nor diverges; the aggregate is then essentially flat
        if psi.values[0] > 0.5 * psi.values[-1]:
            return OptimalNormSpec(case="sup", psi=psi, T1=None, q=1.0)
    return OptimalNormSpec(case="weighted", psi=psi,
                           T1=half_level_point(psi), q=space.q)


def optimal_norm(spec: OptimalNormSpec, f: SampledFunction) -> float:
    """Evaluate the optimal lattice norm of f.

    "sup" case: sup |f| over (0, T).  "weighted" case:

      ( int_0^T ( sup_(0,t) |f| / Psi(t) )^q  dPsi/Psi )^(1/q)
        + Psi(T)^(-1) * sup_(T1,T) |f|,

    the Stieltjes integral taken against forward differences of Psi on
    the grid.  +inf is a legal value.
    """
    av = np.abs(f.values)
    if spec.case == "sup":
        return float(np.max(av))
    psi = spec.psi(f.grid.points) if f.grid is not spec.psi.grid else spec.psi.values
    run = np.maximum.accumulate(av)
    dpsi = np.diff(psi)
    terms = (run[:-1] / psi[:-1]) ** spec.q * dpsi / psi[:-1]
    core = float(np.sum(terms)) ** (1.0 / spec.q)
    t = f.grid.points
    tail_sup = float(np.max(av[t >= spec.T1])) if np.any(t >= spec.T1) else av[-1]
    return core + tail_sup / psi[-1]


# ---------------------------------------------------------------------------
# the split kernel mass and the four associate functionals
# ---------------------------------------------------------------------------

class AssociateNormEngine:
    """Shared tables for evaluating the associate functionals of many
    nonnegative g on one grid.

    The double-integral functional needs the full cone-kernel matrix
    (O(grid^2), cached here once); the reduced functionals only need
    running integrals.
    """

    def __init__(self, space: LorentzSpace, phi, k: int, n: int):
        self.space = space
        self.k, self.n = k, n
        t = space.grid.points
        self.t = t
        self.kn = k / float(n)
        self.phi_vals = np.asarray(phi(t), dtype=float)
        self.iphi = cumulative_from_zero(t, self.phi_vals)
        if not np.isfinite(self.iphi[0]):
            raise NonConvergent("phi is not integrable at 0")
        self.jk = cumulative_tail(t, t ** -self.kn * self.phi_vals)
        # log-trapezoid weights for integrals against g(xi) d xi
        u = np.log(t)
        du = np.empty_like(t)
        du[1:-1] = 0.5 * (u[2:] - u[:-2])
        du[0] = 0.5 * (u[1] - u[0])
        du[-1] = 0.5 * (u[-1] - u[-2])
        self.xi_weights = t * du
        # cone kernel matrix: rows xi, columns tau
        ratio = (t[None, :] / t[:, None]) ** self.kn   # (xi, tau) -> (tau/xi)^(k/n)
        self.omega = self.phi_vals[None, :] / (1.0 + ratio)
        # smooth factors multiplying g in the reduced functionals, with
        # their below-grid head masses (g itself is treated as locally
        # constant below the grid: a two-point power fit on staircase or
        # random data would be meaningless)
        self.split_factor = self.iphi + t ** self.kn * self.jk
        self.split_head = head_mass(t, self.split_factor)
        self.power_head = t[0] ** (self.kn + 1.0) / (self.kn + 1.0)

    def _cum_scaled_head(self, g: np.ndarray, factor: np.ndarray,
                         factor_head: float) -> np.ndarray:
        out = np.empty(len(self.t))
        out[0] = g[0] * factor_head
        np.cumsum(segment_masses(self.t, g * factor), out=out[1:])
        out[1:] += out[0]
        return out

    def split_kernel_mass_vals(self, t_idx: int | None = None) -> np.ndarray:
        """Phi_k(xi, t) on the grid for fixed t (default T): head mass up
        to xi plus xi^(k/n) times the tail of tau^(-k/n) phi over [xi, t]."""
        j_at_t = 0.0 if t_idx is None else self.jk[t_idx]
        return self.iphi + self.t ** self.kn * (self.jk - j_at_t)

    # -- the four functionals ----------------------------------------------

    def rho_tilde(self, g: np.ndarray) -> float:
        sp = self.space
        gtail = cumulative_tail(self.t, g)
        prod = self.iphi * gtail
        if sp.q == 1.0:
            vals = prod / sp.V.values
            if classify_boundedness(sp.grid, np.maximum(vals, 1e-300)).tag == "divergent":
                return math.inf
            return float(np.max(vals))
        return self._qprime_norm(prod ** sp.qp * sp.w_vals, tail_const=0.0)

    def rho1(self, g: np.ndarray) -> float:
        sp = self.space
        inner = (self._cum_scaled_head(g, self.split_factor, self.split_head)
                 - self.jk * self._cum_scaled_head(g, self.t ** self.kn,
                                                   self.power_head))
        if not np.all(np.isfinite(inner)):
            return math.inf
        inner = np.maximum(inner, 0.0)
        if sp.q == 1.0:
            return float(np.max(inner / sp.V.values))
        return self._qprime_norm(inner ** sp.qp * sp.w_vals, tail_const=0.0)

    def rho2(self, g: np.ndarray) -> float:
        sp = self.space
        if sp.q == 1.0:
            return 0.0
        mass = self._cum_scaled_head(g, self.split_factor, self.split_head)[-1]
        if not math.isfinite(mass):
            return math.inf
        return float(mass * sp.tail_w ** (1.0 / sp.qp))

    def rho0(self, g: np.ndarray) -> float:
        sp = self.space
        psi0 = (self.xi_weights * g) @ self.omega     # tau -> int Omega(xi,tau) g(xi) dxi
        cum = cumulative_from_zero(self.t, psi0)
        if not np.isfinite(cum[0]):
            return math.inf
        if sp.q == 1.0:
            vals = cum / sp.V.values
            if classify_boundedness(sp.grid, np.maximum(vals, 1e-300)).tag == "divergent":
                return math.inf
            return float(np.max(vals))
        total_pow = self._qprime_power_integral(cum ** sp.qp * sp.w_vals)
        if not math.isfinite(total_pow):
            return math.inf
        total_pow += cum[-1] ** sp.qp * sp.tail_w
        return float(total_pow ** (1.0 / sp.qp))

    def rho0_hat(self, g: np.ndarray) -> float:
        """q = 1 only: the nested form sup_t V^-1 int_0^t phi(tau)
        (int_tau^T g) dtau, which dominates rho_tilde term by term."""
        if self.space.q != 1.0:
            raise DomainError("the nested form is a q = 1 functional")
        gtail = cumulative_tail(self.t, g)
        cum = cumulative_from_zero(self.t, self.phi_vals * gtail)
        if not np.isfinite(cum[0]):
            return math.inf
        return float(np.max(cum / self.space.V.values))

    # -- helpers -------------------------------------------------------------

    def _qprime_power_integral(self, y: np.ndarray) -> float:
        head = head_mass(self.t, y)
        if not math.isfinite(head):
            return math.inf
        return head + float(np.sum(segment_masses(self.t, y)))

    def _qprime_norm(self, y: np.ndarray, tail_const: float) -> float:
        total = self._qprime_power_integral(y)
        if not math.isfinite(total):
            return math.inf
        return float((total + tail_const) ** (1.0 / self.space.qp))


@dataclass
class AssociatedNorms:
    rho0: float
    rho_tilde: float
    rho1: float
    rho2: float


def kernel_mass_split(phi, k: int, n: int, xi: float, t: float,
                      tol: float = 1e-8) -> float:
    """Phi_k(xi, t) = int_0^xi phi + xi^(k/n) int_xi^t tau^(-k/n) phi,
    for 0 < xi <= t."""
    if not (0.0 < xi <= t):
        raise DomainError("need 0 < xi <= t")
    kn = k / float(n)
    head, _ = integrate(lambda s: np.asarray(phi(s), dtype=float),
                        0.0, xi, singular_at_a=True, tol=tol)
    if xi == t:
        return head
    tail, _ = integrate(lambda s: np.asarray(phi(s), dtype=float) * s ** -kn,
                        xi, t, tol=tol)
    return head + xi ** kn * tail


def associated_norms(space: LorentzSpace, phi, k: int, n: int,
                     g) -> AssociatedNorms:
    """All four associate functionals of a nonnegative g sampled on the
    space's grid.  For repeated evaluation over a family build one
    AssociateNormEngine and call its methods directly."""
    eng = AssociateNormEngine(space, phi, k, n)
    gv = g.values if isinstance(g, SampledFunction) else np.asarray(g, dtype=float)
    if np.any(gv < 0):
        raise DomainError("g must be nonnegative")
    return AssociatedNorms(rho0=eng.rho0(gv), rho_tilde=eng.rho_tilde(gv),
                           rho1=eng.rho1(gv), rho2=eng.rho2(gv))


# ---------------------------------------------------------------------------
# dyadic level discretizations
# ---------------------------------------------------------------------------

def _rightmost_crossing(grid: LogGrid, env: np.ndarray, level: float) -> float:
    """sup{ t : env(t) >= level } for a nonincreasing envelope sampled on
    the grid, refined by bisection between the bracketing samples."""
    t = grid.points
    if env[0] < level:
        raise Exhausted(f"level {level} above the envelope maximum {env[0]}")
    idx = int(np.nonzero(env >= level)[0][-1])
    if idx == len(t) - 1:
        return float(t[-1])
    f = SampledFunction(grid, env)
    lo, hi = float(t[idx]), float(t[idx + 1])
    for _ in range(80):
        mid = math.sqrt(lo * hi)
        if f(mid) >= level:
            lo = mid
        else:
            hi = mid
    return lo


def level_discretization(u1: SampledFunction, count: int = 20) -> np.ndarray:
    """nu_m = sup{ t : U(t) = 2^m } for a positive decreasing U
    normalized so U(T) = 1; nu_0 = T, strictly decreasing toward 0.
    Raises Exhausted when the grid floor is reached before `count`."""
    env = np.maximum.accumulate(u1.values[::-1])[::-1]
    env = env / env[-1]
    out = np.empty(count)
    out[0] = u1.grid.t_max
    for m in range(1, count):
        out[m] = _rightmost_crossing(u1.grid, env, 2.0 ** m)
        if out[m] <= u1.grid.t_min * (1 + 1e-9):
            raise Exhausted(f"grid floor reached at index {m}")
    return out


def two_sided_level_discretization(uq: SampledFunction, m_minus: int = 5,
                                   m_plus: int | None = None):
    """delta_m = sup{ tau : U_q(tau) = 2^m } for m in [-m_minus, m_plus];
    requires U_q(T) = 0 and U_q blowing up at 0.  m_plus defaults to the
    largest level found above 10x the grid floor."""
    env = np.maximum.accumulate(uq.values[::-1])[::-1]
    if uq.values[-1] > 1e-12 * env[0]:
        raise DomainError("tail aggregate must vanish at T")
    f10 = SampledFunction(uq.grid, env)(10.0 * uq.grid.t_min)
    if m_plus is None:
        m_plus = int(math.floor(math.log2(f10))) if f10 > 0 else 0
    ms = np.arange(-m_minus, m_plus + 1)
    deltas = np.empty(len(ms))
    for i, m in enumerate(ms):
        deltas[i] = _rightmost_crossing(uq.grid, env, 2.0 ** m)
        if deltas[i] <= uq.grid.t_min * (1 + 1e-9):
            raise Exhausted(f"grid floor reached at level index {m}")
    return ms, deltas


# ---------------------------------------------------------------------------
# Hardy constants
# ---------------------------------------------------------------------------

def hardy_constants(space: LorentzSpace, delta: float = 0.0,
                    T0: float | None = None) -> dict:
    """The weighted-Hardy constant

      B_delta = sup_t ( int_t^T0 w tau^(delta q') )^(1/q')
                      ( int_0^t w^(-q/q') tau^(-(delta+1) q) )^(1/q)

    together with the theoretical bound (q/q')^(1/q') / (eps - delta q)
    and the induced bound on the best inequality constant,
    c3 <= B_delta q^(1/q) q'^(1/q').  eps is the largest exponent making
    V(t) t^(-eps) nondecreasing (WitnessMissing when none exists).
    """
    if space.q <= 1.0:
        raise DomainError("Hardy constants are a q > 1 construction")
    t = space.grid.points
    eps = largest_monotone_exponent(t, 1.0 / space.V.values)
    if eps == 0.0:
        raise WitnessMissing("no exponent witness for the cumulative weight")
    if not delta < eps / space.q:
        raise DomainError(f"delta must be below eps/q = {eps / space.q}")
    q, qp = space.q, space.qp
    w = space.w_vals
    upper = cumulative_tail(t, w * t ** (delta * qp))
    if T0 is not None and not math.isfinite(T0):
        wt = space.weight
        V_T = space.V.values[-1]
        def w_beyond(s):
            V = wt.cumulative_beyond(V_T, s)
            return V ** -qp * wt(s) * s ** (delta * qp)
        extra, _ = integrate(w_beyond, space.T, math.inf, tol=1e-9)
        upper = upper + extra
    lower = cumulative_from_zero(t, w ** (-q / qp) * t ** (-(delta + 1.0) * q))
    if not np.isfinite(lower[0]):
        raise NonConvergent("lower Hardy integral diverges at 0")
    b_vals = upper ** (1.0 / qp) * lower ** (1.0 / q)
    b_delta = float(np.max(b_vals))
    bound = (q / qp) ** (1.0 / qp) / (eps - delta * q)
    return {
        "B_delta": b_delta,
        "bound": bound,
        "within_bound": bool(b_delta <= bound * (1 + 1e-9)),
        "c3_bound": b_delta * q ** (1.0 / q) * qp ** (1.0 / qp),
        "epsilon": eps,
        "argmax_t": float(t[int(np.argmax(b_vals))]),
    }


# ---------------------------------------------------------------------------
# the reproducible sample family for equivalence experiments
# ---------------------------------------------------------------------------

FAMILY_SEED = 0x5EED


def sample_family(grid: LogGrid, count: int = 50, seed: int = FAMILY_SEED):
    """The fixed experiment family of nonnegative g on a grid:
    10 head indicators, 10 band indicators, 15 powers t^s with
    s in (-1/2, 2), and decreasing staircases for the remainder.
    Deterministic for a given seed and grid."""
    rng = np.random.default_rng(seed)
    t = grid.points
    T = grid.t_max
    family = []
    n_head = min(10, count)
    for a in np.geomspace(1e-4 * T, 0.9 * T, n_head):
        family.append((f"head_{a:.3e}", (t < a).astype(float)))
    n_band = min(10, max(count - len(family), 0))
    for _ in range(n_band):
        lo, hi = np.sort(rng.uniform(np.log(1e-5 * T), np.log(T), size=2))
        family.append(("band_%.2f_%.2f" % (lo, hi),
                       ((t >= math.exp(lo)) & (t < math.exp(hi))).astype(float)))
    n_pow = min(15, max(count - len(family), 0))
    for s in np.linspace(-0.45, 2.0, n_pow):
        family.append((f"power_{s:+.2f}", (t / T) ** s))
    while len(family) < count:
        breaks = np.sort(rng.choice(len(t) - 2, size=4, replace=False)) + 1
        levels = np.sort(rng.uniform(0.1, 2.0, size=5))[::-1]
        vals = np.empty_like(t)
        prev = 0
        for b, lv in zip(list(breaks) + [len(t)], levels):
            vals[prev:b] = lv
            prev = b
        family.append((f"stair_{len(family)}", vals))
    return family[:count]


def equivalence_report(space: LorentzSpace, phi, k: int, n: int,
                       family=None) -> dict:
    """Ratios rho0/rho_tilde over the sample family; the two-sided
    equivalence constant is the spread C = max ratio / min ratio."""
    if family is None:
        family = sample_family(space.grid)
    eng = AssociateNormEngine(space, phi, k, n)
    ratios = {}
    infinite = 0
    for name, g in family:
        r0 = eng.rho0(g)
        rt = eng.rho_tilde(g)
        if math.isinf(r0) and math.isinf(rt):
            ratios[name] = math.nan
            infinite += 1
        else:
            ratios[name] = r0 / rt if rt > 0 else math.nan
    vals = np.array([v for v in ratios.values() if math.isfinite(v)])
    if len(vals) == 0:
        return {"ratios": ratios, "min_ratio": math.nan, "max_ratio": math.nan,
                "spread": math.nan, "count": 0, "both_infinite": infinite}
    return {
        "ratios": ratios,
        "min_ratio": float(vals.min()),
        "max_ratio": float(vals.max()),
        "spread": float(vals.max() / vals.min()),
        "count": int(len(vals)),
        "both_infinite": infinite,
    }
