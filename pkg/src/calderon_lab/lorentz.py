"""Weighted Lorentz and Marcinkiewicz norms and the embedding criterion.

A weight v(t) = t^a * (iterated-log factors) determines the Lorentz
functional  ( int (f*)^q v )^(1/q)  and, through its cumulative V and
the dual weight w = V^(-q') v, the associate-norm evaluators.  The
aggregate

    Psi_q(t) = sup_{(0,t]} W          (q = 1)
             = ( int_0^t W^q' v )^(1/q')   (q > 1),
    W(t) = V(t)^(-1) * int_0^t phi,

is nondecreasing, and its finiteness at T decides whether convolutions
against the kernel land in the bounded continuous functions.  Infinity
is a legal value throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, Inconclusive, NonConvergent, TrivialSpace
from .gridfn import (
    LogGrid,
    SampledFunction,
    classify_boundedness,
    classify_zero_endpoint,
    cumulative_from_zero,
    cumulative_tail,
    default_grid,
    head_mass,
    integrate,
    make_log_grid,
    segment_masses,
)
from .kernels import SlowlyVaryingSpec
from .rearrange import maximal_function


@dataclass(frozen=True)
class WeightSpec:
    """v(t) = t^power_exponent * sv(t) on (0, T], continued beyond T by
    its leading power (power_extend) or frozen (constant).

    The slowly varying part, when present, already carries any q-th
    power (build it with SlowlyVaryingSpec.powered).  Integrability at 0
    requires power_exponent > -1; otherwise the space is trivial.
    """

    power_exponent: float
    sv: SlowlyVaryingSpec | None = None
    beyond_T: str = "power_extend"
    T: float = 1.0

    def __post_init__(self):
        if self.beyond_T not in ("power_extend", "constant"):
            raise DomainError(f"unknown continuation {self.beyond_T!r}")
        if self.sv is not None and self.sv.scale != self.T:
            raise DomainError("slowly varying factors must be anchored at T")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        inside = t <= self.T
        out = np.empty_like(t)
        tt = np.where(inside, t, self.T)
        lam = self.sv(tt) if self.sv is not None else np.ones_like(tt)
        out = tt ** self.power_exponent * lam
        if np.any(~inside):
            sv_T = float(self.sv(self.T)) if self.sv is not None else 1.0
            if self.beyond_T == "power_extend":
                out[~inside] = t[~inside] ** self.power_exponent * sv_T
            else:
                out[~inside] = self.T ** self.power_exponent * sv_T
        return float(out[0]) if scalar else out

    def cumulative_beyond(self, V_T: float, t):
        """V(t) for t >= T given V(T), under the continuation rule."""
        t = np.asarray(t, dtype=float)
        a = self.power_exponent
        sv_T = float(self.sv(self.T)) if self.sv is not None else 1.0
        if self.beyond_T == "power_extend":
            return V_T + sv_T * (t ** (a + 1.0) - self.T ** (a + 1.0)) / (a + 1.0)
        return V_T + sv_T * self.T ** a * (t - self.T)


def power_weight(q: float, p: float, T: float = 1.0,
                 sv: SlowlyVaryingSpec | None = None) -> WeightSpec:
    """The standard family v(t) = t^(q/p-1) * b(t)^q: pass the plain b
    as sv and the q-th power is applied here."""
    return WeightSpec(power_exponent=q / p - 1.0,
                      sv=sv.powered(q) if sv is not None else None, T=T)


def cumulative_weight(weight: WeightSpec, grid: LogGrid | None = None) -> SampledFunction:
    """V(t) = int_0^t v, increasing; raises TrivialSpace when v is not
    integrable at 0 (the space then contains only 0)."""
    if grid is None:
        grid = default_grid(weight.T)
    if weight.power_exponent <= -1.0:
        raise TrivialSpace(
            f"weight power {weight.power_exponent} <= -1: V is infinite")
    vals = cumulative_from_zero(grid.points, weight(grid.points))
    if not np.isfinite(vals[0]):
        raise TrivialSpace("cumulative weight is infinite")
    return SampledFunction(grid=grid, values=vals, monotonicity="increasing")


class LorentzSpace:
    """The pair (q, weight) with its derived grid quantities.

    Attributes:
      q, qp      -- the exponent and its conjugate (qp = inf at q = 1)
      grid       -- working grid on (0, T]
      v_vals, V  -- weight samples and cumulative weight
      w_vals     -- dual weight V^(-q') v (q > 1 only)
      tail_w     -- int_T^inf w dt, closed form V(T)^(1-q')/(q'-1)
    """

    def __init__(self, q: float, weight: WeightSpec, grid: LogGrid | None = None):
        if q < 1.0 or not math.isfinite(q):
            raise DomainError(f"q must lie in [1, inf), got {q}")
        self.q = float(q)
        self.weight = weight
        self.grid = grid if grid is not None else default_grid(weight.T)
        if abs(self.grid.t_max - weight.T) > 1e-12 * weight.T:
            raise DomainError("grid must end at the weight's T")
        self.v_vals = weight(self.grid.points)
        self.V = cumulative_weight(weight, self.grid)
        if q > 1.0:
            self.qp = q / (q - 1.0)
            self.w_vals = self.V.values ** (-self.qp) * self.v_vals
            self.tail_w = self.V.values[-1] ** (1.0 - self.qp) / (self.qp - 1.0)
        else:
            self.qp = math.inf
            self.w_vals = None
            self.tail_w = None

    @property
    def T(self) -> float:
        return self.weight.T

    def on_grid(self, grid: LogGrid) -> "LorentzSpace":
        return LorentzSpace(self.q, self.weight, grid)


def check_norm_conditions(space: LorentzSpace) -> dict:
    """Verify that the Lorentz functional is equivalent to a norm.

    q = 1:  t^(-1) V(t) must be almost decreasing; c is the largest
            increase ratio over ordered grid pairs (threshold 1e6).
    q > 1:  c = sup_t t^q int_t^inf tau^(-q) v(tau) dtau / V(t).
    """
    t = space.grid.points
    V = space.V.values
    if space.q == 1.0:
        ratio = V / t
        c = float(np.max(ratio / np.minimum.accumulate(ratio)))
        return {"ok": bool(c < 1e6), "c": c}
    q = space.q
    a = space.weight.power_exponent
    sv_T = float(space.weight.sv(space.T)) if space.weight.sv is not None else 1.0
    inner = cumulative_tail(t, t ** (-q) * space.v_vals)
    if space.weight.beyond_T == "power_extend":
        if a - q + 1.0 >= 0.0:
            return {"ok": False, "c": math.inf}
        beyond = sv_T * space.T ** (a - q + 1.0) / (q - a - 1.0)
    else:
        if q <= 1.0:
            return {"ok": False, "c": math.inf}
        beyond = sv_T * space.T ** a * space.T ** (1.0 - q) / (q - 1.0)
    c = float(np.max(t ** q * (inner + beyond) / V))
    return {"ok": bool(np.isfinite(c)), "c": c}


def lorentz_norm(space: LorentzSpace, fstar: SampledFunction) -> float:
    """( int_0^inf (f*)^q v )^(1/q) for a nonincreasing f* >= 0.

    The extension tag of f* governs t beyond its grid; +inf is a legal
    return value (never an error).
    """
    t = fstar.grid.points
    y = np.abs(fstar.values) ** space.q * space.weight(t)
    head = head_mass(t, y)
    total = head + float(np.sum(segment_masses(t, y)))
    if fstar.extension != "zero_beyond_T" and fstar.values[-1] > 0:
        # both continuation rules give the weight infinite total mass
        # (power with exponent > -1, or a positive constant), so any
        # nonvanishing constant continuation of f* costs an infinite norm
        total = math.inf
    return float(total ** (1.0 / space.q))


def marcinkiewicz_norm(weight, fstar: SampledFunction) -> float:
    """sup_t v(t) * (1/t) int_0^t f*;  weight may be a WeightSpec or any
    callable.  The supremum runs over the grid of f*."""
    fss = maximal_function(fstar)
    t = fstar.grid.points
    return float(np.max(fss.values * np.asarray(weight(t), dtype=float)))


# ---------------------------------------------------------------------------
# the embedding aggregate and criterion
# ---------------------------------------------------------------------------

def kernel_average(space: LorentzSpace, phi: SampledFunction) -> SampledFunction:
    """W(t) = V(t)^(-1) int_0^t phi, the density the aggregate is built
    from."""
    t = space.grid.points
    iphi = cumulative_from_zero(t, phi(t))
    if not np.isfinite(iphi[0]):
        raise NonConvergent("kernel profile is not integrable at 0")
    return SampledFunction(grid=space.grid, values=iphi / space.V.values)


def _fitted_head_integral(grid: LogGrid, y: np.ndarray, fit) -> float:
    """Integral over (0, t_min) of the fitted model C t^p L^e matching
    the first sample (used when the two-point power rule is too crude,
    i.e. for log-borderline heads)."""
    t0 = grid.points[0]
    L0 = math.log(math.e * grid.t_max / t0)
    C = y[0] / (t0 ** fit.p * L0 ** fit.e)
    val, _ = integrate(
        lambda s: C * s ** fit.p * np.log(math.e * grid.t_max / s) ** fit.e,
        0.0, t0, singular_at_a=True, tol=1e-8)
    return val


def embedding_function(space: LorentzSpace, phi: SampledFunction) -> SampledFunction:
    """The nondecreasing aggregate Psi_q(t) whose value at T decides the
    embedding; identically +inf when the defining integral (or sup)
    diverges at the origin."""
    W = kernel_average(space, phi)
    t = space.grid.points
    if space.q == 1.0:
        tag = classify_boundedness(space.grid, W.values).tag
        if tag == "divergent":
            vals = np.full_like(t, math.inf)
        else:
            vals = np.maximum.accumulate(W.values)
        return SampledFunction(grid=space.grid, values=vals,
                               monotonicity="increasing")
    y = W.values ** space.qp * space.v_vals
    fit = classify_zero_endpoint(space.grid, y)
    head = head_mass(t, y)
    if fit.tag == "divergent":
        head = math.inf
    elif not math.isfinite(head) and fit.tag == "convergent":
        head = _fitted_head_integral(space.grid, y, fit)
    if not math.isfinite(head):
        vals = np.full_like(t, math.inf)
    else:
        vals = (head + np.concatenate(([0.0], np.cumsum(segment_masses(t, y))))) \
            ** (1.0 / space.qp)
    return SampledFunction(grid=space.grid, values=vals, monotonicity="increasing")


def embedding_criterion(space: LorentzSpace, phi: SampledFunction,
                        spans=(1e-4, 1e-6, 1e-8)) -> dict:
    """Finiteness classification of Psi_q(T) under grid refinement.

    The aggregate is recomputed with the grid floor pushed down through
    `spans`; growth by more than 10x per refinement (or a divergent
    head) classifies the value as infinite.  An ambiguous trend raises
    Inconclusive rather than deciding silently.
    """
    T = space.T
    values = []
    for span in spans:
        g = make_log_grid(span * T, T, space.grid.count)
        psi = embedding_function(space.on_grid(g), phi)
        values.append(float(psi.values[-1]))
    if any(not math.isfinite(v) for v in values):
        return {"embeds": False, "psi_at_T": math.inf, "refinements": values}
    growth = [values[i + 1] / values[i] for i in range(len(values) - 1)]
    if all(g > 10.0 for g in growth):
        return {"embeds": False, "psi_at_T": math.inf, "refinements": values}
    if all(g < 1.5 for g in growth):
        return {"embeds": True, "psi_at_T": values[-1], "refinements": values}
    raise Inconclusive(
        f"refinement trend ambiguous: values {values}")


# ---------------------------------------------------------------------------
# associate norm (the dual evaluator used by envelopes and duality checks)
# ---------------------------------------------------------------------------

def associate_norm(space: LorentzSpace, hstar: SampledFunction) -> float:
    """Norm of a nonincreasing h* >= 0 on (0, T] in the associate space:

      q = 1:  sup_t V(t)^(-1) int_0^t h*
      q > 1:  ( int_0^inf (int_0^t h*)^(q') w dt )^(1/q')

    h* is treated as zero beyond T.
    """
    if hstar.grid.t_max > space.T * (1 + 1e-12):
        raise DomainError("h* must live on (0, T]")
    t = space.grid.points
    h = np.maximum(hstar(t), 0.0)
    cum = cumulative_from_zero(t, h)
    if not np.isfinite(cum[0]):
        return math.inf
    if space.q == 1.0:
        return float(np.max(cum / space.V.values))
    inner = cum ** space.qp * space.w_vals
    head = head_mass(t, inner)
    if not math.isfinite(head):
        fit = classify_zero_endpoint(space.grid, inner)
        if fit.tag == "convergent":
            head = _fitted_head_integral(space.grid, inner, fit)
        else:
            return math.inf
    total = head + float(np.sum(segment_masses(t, inner)))
    total += cum[-1] ** space.qp * space.tail_w
    return float(total ** (1.0 / space.qp))
