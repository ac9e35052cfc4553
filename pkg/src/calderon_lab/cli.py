"""Configuration-driven experiment runner.

Configs are plain text, one dotted key per line:

    scenario = embedding_check
    space.q = 2
    kernel.variant = power
    kernel.alpha = 0.75
    k = 1
    n = 1

`#` starts a comment; whitespace around `=` is ignored.  See the README
for the full key list.  Every run writes a JSON report (with one
assertion verdict per checked quantity), CSV series `t,value`, and
plain two-column .dat files; reports are byte-identical across runs
with the same config and seed, apart from the wall-time field.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigInvalid, Inconclusive, ScenarioFailed, ToolkitError
from .gridfn import LogGrid, SampledFunction, make_log_grid, sample
from .kernels import (
    BesselMcDonald,
    KernelSpec,
    PowerSlowlyVarying,
    SlowlyVaryingSpec,
    auto_z1,
    check_derivative_conditions,
    measure_profile,
    cone_kernel,
)
from .lorentz import (
    LorentzSpace,
    WeightSpec,
    associate_norm,
    embedding_criterion,
    embedding_function,
    power_weight,
)
from .optimal import (
    check_condition_a,
    check_condition_b,
    equivalence_report,
    half_level_point,
    make_optimal_norm_spec,
    optimal_norm,
    sample_family,
    tail_embedding_function,
)
from .potentials import (
    bump_and_staircase_family,
    calderon_norm,
    convolve,
    envelope_bounds,
    field_rearrangement,
    modulus_curve,
    power_modulus_norm,
    stieltjes_modulus_norm,
    upper_cone_check,
)

SCENARIOS = (
    "embedding_check",
    "optimal_norm",
    "equivalence_sweep",
    "envelope",
    "besov_case",
    "lorentz_karamata_case",
    "covering_sample",
)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    scenario: str
    q: float = 2.0
    p: float | None = None          # power weight t^(q/p-1); None -> v == 1
    b_log: float = 0.0              # log exponent of the slowly varying b
    kernel_variant: str = "power"   # "power" | "bessel_mcdonald"
    alpha: float = 0.75
    nu: float | None = None
    z1: float = 1.0
    lambda_log: float = 0.0         # kernel slowly-varying log exponent
    k: int = 1
    n: int = 1
    T: float = 1.0
    grid_points: int = 512
    tmin_span: float = 1e-8
    field_resolution: int = 256
    seed: int = 0x5EED
    out: str | None = None
    workers: int = 1

    def validate(self) -> None:
        def bad(fieldname, reason):
            raise ConfigInvalid(f"{fieldname}: {reason}")
        if self.scenario not in SCENARIOS:
            bad("scenario", f"must be one of {SCENARIOS}")
        if self.q < 1.0:
            bad("space.q", "must be >= 1")
        if self.p is not None and self.p <= 1.0:
            bad("space.p", "must be > 1")
        if self.kernel_variant not in ("power", "bessel_mcdonald"):
            bad("kernel.variant", "must be power or bessel_mcdonald")
        if self.kernel_variant == "power" and not (0.0 < self.alpha < self.n):
            bad("kernel.alpha", f"must lie in (0, n) = (0, {self.n})")
        if self.kernel_variant == "bessel_mcdonald":
            nu = self.nu if self.nu is not None else (self.n - self.alpha) / 2.0
            if not (0.0 < nu < self.n / 2.0):
                bad("kernel.nu", f"must lie in (0, n/2) = (0, {self.n / 2})")
        if self.k < 1:
            bad("k", "must be a positive integer")
        if not (1 <= self.n <= 3):
            bad("n", "must be 1, 2, or 3")
        if self.T <= 0:
            bad("T", "must be positive")
        if self.grid_points < 16:
            bad("grid.points", "must be at least 16")
        if not (0.0 < self.tmin_span < 1.0):
            bad("grid.tmin", "span must lie in (0, 1)")


_KEY_MAP = {
    "scenario": ("scenario", str),
    "space.q": ("q", float),
    "space.p": ("p", float),
    "space.b_log": ("b_log", float),
    "kernel.variant": ("kernel_variant", str),
    "kernel.alpha": ("alpha", float),
    "kernel.nu": ("nu", float),
    "kernel.z1": ("z1", float),
    "kernel.lambda_log": ("lambda_log", float),
    "k": ("k", int),
    "n": ("n", int),
    "T": ("T", float),
    "grid.points": ("grid_points", int),
    "grid.tmin": ("tmin_span", float),
    "field.resolution": ("field_resolution", int),
    "seed": ("seed", int),
    "out": ("out", str),
    "workers": ("workers", int),
}


def parse_config_text(text: str) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _KEY_MAP:
            raise ConfigInvalid(f"line {lineno}: unknown key {key!r}")
        attr, conv = _KEY_MAP[key]
        try:
            values[attr] = conv(val)
        except ValueError as exc:
            raise ConfigInvalid(f"line {lineno}: {key}: {exc}") from None
    if "scenario" not in values:
        raise ConfigInvalid("scenario: missing required key")
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text())


# ---------------------------------------------------------------------------
# report plumbing
# ---------------------------------------------------------------------------

@dataclass
class ReportRecord:
    scenario: str
    inputs: dict
    scalars: dict = field(default_factory=dict)
    assertions: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)      # name -> (t, values)
    wall_time_s: float = 0.0
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(
            a["passed"] for a in self.assertions.values())

    def to_json(self) -> str:
        doc = {
            "scenario": self.scenario,
            "inputs": self.inputs,
            "scalars": _plain(self.scalars),
            "assertions": _plain(self.assertions),
            "series": sorted(self.series),
            "passed": self.passed,
            "error": self.error,
            "wall_time_s": self.wall_time_s,
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return {"inf": "Infinity", "-inf": "-Infinity"}.get(str(x), x) \
            if not math.isfinite(x) else x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def _check(assertions: dict, name: str, passed: bool, value, detail: str = ""):
    assertions[name] = {"passed": bool(passed), "value": _plain(value),
                        "detail": detail}


def write_report(record: ReportRecord, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(record.to_json())
    series_dir = out / "series"
    series_dir.mkdir(exist_ok=True)
    for name, (t, vals) in record.series.items():
        order = np.argsort(t)
        tt, vv = np.asarray(t)[order], np.asarray(vals)[order]
        keep = np.concatenate(([True], np.diff(tt) > 0))
        pairs = [(repr(float(a)), repr(float(b)))
                 for a, b in zip(tt[keep], vv[keep])]
        lines_csv = ["t,value"] + [f"{a},{b}" for a, b in pairs]
        (series_dir / f"{name}.csv").write_text("\n".join(lines_csv) + "\n")
        lines_dat = [f"{a} {b}" for a, b in pairs]
        (series_dir / f"{name}.dat").write_text("\n".join(lines_dat) + "\n")


# ---------------------------------------------------------------------------
# shared builders
# ---------------------------------------------------------------------------

def _build_weight(cfg: ExperimentConfig) -> WeightSpec:
    sv = None
    if cfg.b_log != 0.0:
        sv = SlowlyVaryingSpec(factors=(("log", cfg.b_log),), scale=cfg.T)
    if cfg.p is None and sv is None:
        return WeightSpec(power_exponent=0.0, T=cfg.T)
    p = cfg.p if cfg.p is not None else cfg.q
    return power_weight(cfg.q, p, T=cfg.T, sv=sv)


def _build_kernel(cfg: ExperimentConfig) -> KernelSpec:
    if cfg.kernel_variant == "bessel_mcdonald":
        nu = cfg.nu if cfg.nu is not None else (cfg.n - cfg.alpha) / 2.0
        return KernelSpec(BesselMcDonald(nu=nu), n=cfg.n)
    factors = (("log", cfg.lambda_log),) if cfg.lambda_log != 0.0 else ()
    sv = SlowlyVaryingSpec(factors=factors, scale=cfg.z1)
    return KernelSpec(PowerSlowlyVarying(alpha=cfg.alpha, sv=sv, z1=cfg.z1), n=cfg.n)


def _grid(cfg: ExperimentConfig) -> LogGrid:
    return make_log_grid(cfg.tmin_span * cfg.T, cfg.T, cfg.grid_points)


def _space_and_profile(cfg: ExperimentConfig):
    grid = _grid(cfg)
    space = LorentzSpace(cfg.q, _build_weight(cfg), grid)
    phi = measure_profile(_build_kernel(cfg), grid)
    return space, phi


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

def _scenario_embedding_check(cfg: ExperimentConfig, rec: ReportRecord):
    space, phi = _space_and_profile(cfg)
    crit = embedding_criterion(space, phi)
    psi = embedding_function(space, phi)
    rec.scalars["embeds"] = crit["embeds"]
    rec.scalars["psi_at_T"] = crit["psi_at_T"]
    rec.scalars["refinements"] = crit["refinements"]
    finite = np.isfinite(psi.values)
    rec.series["psi"] = (space.grid.points[finite], psi.values[finite])
    _check(rec.assertions, "psi_nondecreasing",
           bool(np.all(np.diff(psi.values[finite]) >= -1e-12)), crit["psi_at_T"],
           "aggregate must be nondecreasing in t")


def _scenario_optimal_norm(cfg: ExperimentConfig, rec: ReportRecord):
    space, phi = _space_and_profile(cfg)
    spec = make_optimal_norm_spec(space, phi)
    rec.scalars["case"] = spec.case
    rec.scalars["psi_at_T"] = float(spec.psi.values[-1])
    if spec.T1 is not None:
        rec.scalars["T1"] = spec.T1
        target = 0.5 * spec.psi.values[-1]
        _check(rec.assertions, "half_level",
               abs(spec.psi(spec.T1) - target) <= 1e-6 * spec.psi.values[-1],
               spec.T1, "aggregate at T1 must be half its terminal value")
    probe = SampledFunction(space.grid, np.minimum(spec.psi.values, spec.psi.values[-1]) ** 1.5)
    small = SampledFunction(space.grid, 0.5 * probe.values)
    n_big, n_small = optimal_norm(spec, probe), optimal_norm(spec, small)
    rec.scalars["probe_norm"] = n_big
    _check(rec.assertions, "homogeneity",
           abs(n_small - 0.5 * n_big) <= 1e-9 * n_big, n_small,
           "norm of f/2 equals half the norm of f")
    _check(rec.assertions, "monotone",
           n_small <= n_big * (1 + 1e-12), n_big,
           "smaller envelope has smaller norm")
    rec.series["psi"] = (space.grid.points, spec.psi.values)


def _scenario_equivalence_sweep(cfg: ExperimentConfig, rec: ReportRecord):
    space, phi = _space_and_profile(cfg)
    wt, uq = tail_embedding_function(space, phi, cfg.k, cfg.n)
    ca = check_condition_a(phi, space.V, cfg.k, cfg.n, space.grid)
    cb = check_condition_b(phi, uq, cfg.k, cfg.n, space.grid)
    condition = "A" if ca.holds else ("B" if cb.holds else "neither")
    rec.scalars["condition"] = condition
    rec.scalars["d1"] = ca.d
    rec.scalars["d2"] = cb.d
    rec.scalars["epsilon_a"] = ca.epsilon
    rec.scalars["epsilon_b"] = cb.epsilon
    fam = sample_family(space.grid, count=50, seed=cfg.seed)
    rep = equivalence_report(space, phi, cfg.k, cfg.n, fam)
    rec.scalars["ratio_min"] = rep["min_ratio"]
    rec.scalars["ratio_max"] = rep["max_ratio"]
    rec.scalars["ratio_spread"] = rep["spread"]
    rec.series["uq"] = (space.grid.points, uq.values)
    if cfg.q > 1.0:
        from .optimal import hardy_constants
        h = hardy_constants(space, delta=0.0)
        rec.scalars["hardy_B0"] = h["B_delta"]
        rec.scalars["hardy_bound"] = h["bound"]
        _check(rec.assertions, "hardy_within_bound", h["within_bound"],
               h["B_delta"], "Hardy constant sits below its theoretical bound")
    if condition == "neither":
        rec.scalars["equivalence_unverified"] = True
        _check(rec.assertions, "spread_recorded", True, rep["spread"],
               "neither dominance condition holds; spread recorded, not asserted")
    else:
        _check(rec.assertions, "spread_bounded",
               math.isfinite(rep["spread"]) and rep["spread"] < 50.0,
               rep["spread"], "two-sided equivalence constant below 50")


def _scenario_envelope(cfg: ExperimentConfig, rec: ReportRecord):
    space, phi = _space_and_profile(cfg)
    tg = make_log_grid(1e-6 * cfg.T, cfg.T, 48)
    upper, _ = envelope_bounds(space, phi, cfg.k, cfg.n, tg)
    rec.series["envelope"] = (tg.points, upper.values)
    _check(rec.assertions, "nondecreasing",
           bool(np.all(np.diff(upper.values) >= -1e-10 * upper.values[:-1])),
           float(upper.values[-1]), "envelope curve must be nondecreasing")
    profile_norm = associate_norm(
        space, SampledFunction(space.grid, phi(space.grid.points),
                               extension="zero_beyond_T"))
    ratio = upper.values[-1] / profile_norm
    rec.scalars["value_at_T_over_profile_norm"] = ratio
    _check(rec.assertions, "endpoint_factor_two",
           0.5 - 1e-9 <= ratio <= 1.0 + 1e-9, ratio,
           "kernel at t=T sits between half and all of the profile norm")
    sel = (tg.points >= 1e-6) & (tg.points <= 1e-2)
    A = np.vstack([np.ones(sel.sum()), np.log(tg.points[sel])]).T
    slope = float(np.linalg.lstsq(A, np.log(upper.values[sel]), rcond=None)[0][1])
    rec.scalars["small_t_slope"] = slope


def _scenario_besov_case(cfg: ExperimentConfig, rec: ReportRecord):
    space, phi = _space_and_profile(cfg)
    spec = make_optimal_norm_spec(space, phi)
    kernel = _build_kernel(cfg)
    fields = bump_and_staircase_family(count=10, resolution=cfg.field_resolution,
                                       seed=cfg.seed)
    exponent = cfg.alpha / cfg.n - 1.0 / cfg.q
    tg = make_log_grid(1e-6 * cfg.T, cfg.T, 64)
    factors = []
    for name, f in fields:
        u = convolve(kernel, f)
        omega = modulus_curve(u, cfg.k, tg, n=cfg.n)
        opt = u.sup_norm() + stieltjes_modulus_norm(spec, omega)
        direct = u.sup_norm() + power_modulus_norm(omega, exponent, cfg.q)
        factors.append(opt / direct if direct > 0 else math.nan)
    factors = np.array(factors)
    rec.scalars["factor_min"] = float(np.nanmin(factors))
    rec.scalars["factor_max"] = float(np.nanmax(factors))
    spread = float(np.nanmax(factors) / np.nanmin(factors))
    rec.scalars["factor_spread"] = spread
    _check(rec.assertions, "two_sided_factor",
           max(np.nanmax(factors), 1.0 / np.nanmin(factors)) <= 8.0,
           spread, "optimal and direct smoothness norms agree within factor 8")


def _scenario_lorentz_karamata_case(cfg: ExperimentConfig, rec: ReportRecord):
    if cfg.b_log == 0.0:
        raise ConfigInvalid("space.b_log: this scenario needs a log weight factor")
    space, phi = _space_and_profile(cfg)
    crit = embedding_criterion(space, phi)
    rec.scalars["embeds"] = crit["embeds"]
    rec.scalars["psi_at_T"] = crit["psi_at_T"]
    p = cfg.p if cfg.p is not None else cfg.q
    borderline = abs(cfg.alpha / cfg.n - 1.0 / p) < 1e-12
    rec.scalars["borderline_alpha"] = borderline
    if cfg.q > 1.0:
        qp = cfg.q / (cfg.q - 1.0)
        rec.scalars["expected_embeds"] = (
            (cfg.alpha / cfg.n > 1.0 / p) or (borderline and cfg.b_log * qp > 1.0))
        _check(rec.assertions, "criterion_matches_exponent_rule",
               crit["embeds"] == rec.scalars["expected_embeds"], crit["embeds"],
               "embedding classification matches the exponent rule")
    psi = embedding_function(space, phi)
    finite = np.isfinite(psi.values)
    rec.series["psi"] = (space.grid.points[finite], psi.values[finite])
    if crit["embeds"] and not borderline:
        t = space.grid.points
        b = SlowlyVaryingSpec(factors=(("log", cfg.b_log),), scale=cfg.T)(t)
        model = t ** (cfg.alpha / cfg.n - 1.0 / p) / b
        ratio = psi.values / model
        rec.scalars["model_ratio_spread"] = float(ratio.max() / ratio.min())
        _check(rec.assertions, "power_model_two_sided",
               ratio.max() / ratio.min() < 50.0, rec.scalars["model_ratio_spread"],
               "aggregate matches the power-times-log model up to constants")


def _scenario_covering_sample(cfg: ExperimentConfig, rec: ReportRecord):
    space, phi = _space_and_profile(cfg)
    kernel = _build_kernel(cfg)
    report = check_derivative_conditions(kernel, cfg.k)
    rec.scalars["a1"] = report.a1
    rec.scalars["a2"] = report.a2
    rec.scalars["delta1"] = report.delta1
    rec.scalars["z1"] = report.z1
    rec.scalars["consistency_T"] = kernel.ball_volume * report.z1 ** cfg.n
    _check(rec.assertions, "derivative_bounds",
           report.inner_ok and report.outer_ok and report.lower_ok,
           [report.a1, report.a2, report.delta1],
           "profile satisfies the two-scale derivative bounds")
    t = space.grid.points
    # sufficiency pair for the associate construction: the profile lies in
    # the associate space and the kernel sees every scale
    c0 = associate_norm(space, SampledFunction(
        space.grid, phi(t), extension="zero_beyond_T"))
    rec.scalars["c0_profile_norm"] = c0
    _check(rec.assertions, "profile_in_associate_space", math.isfinite(c0), c0,
           "the profile must have finite associate norm")
    masses = np.empty(16)
    tg = np.geomspace(1e-6 * cfg.T, cfg.T, 16)
    from .gridfn import head_mass, segment_masses
    for i, tt in enumerate(tg):
        y = cone_kernel(phi, cfg.k, cfg.n, tt, t)
        masses[i] = head_mass(t, y) + float(np.sum(segment_masses(t, y)))
    rec.scalars["kernel_mass_min"] = float(np.min(masses))
    _check(rec.assertions, "kernel_mass_positive", bool(np.all(masses > 0)),
           float(np.min(masses)), "cone kernel mass positive at every scale")
    fam = bump_and_staircase_family(count=3, resolution=cfg.field_resolution,
                                    seed=cfg.seed)
    cone = upper_cone_check(space, kernel, cfg.k, fam,
                            t_grid=make_log_grid(1e-4 * cfg.T, cfg.T, 32))
    rec.scalars["empirical_c1"] = cone.c1
    rec.scalars["covering_ratios"] = cone.per_field
    _check(rec.assertions, "upper_constant_finite", math.isfinite(cone.c1),
           cone.c1, "empirical upper constant recorded (no direction asserted)")


_SCENARIO_FNS = {
    "embedding_check": _scenario_embedding_check,
    "optimal_norm": _scenario_optimal_norm,
    "equivalence_sweep": _scenario_equivalence_sweep,
    "envelope": _scenario_envelope,
    "besov_case": _scenario_besov_case,
    "lorentz_karamata_case": _scenario_lorentz_karamata_case,
    "covering_sample": _scenario_covering_sample,
}


# ---------------------------------------------------------------------------
# run / sweep
# ---------------------------------------------------------------------------

def run(cfg: ExperimentConfig, out_dir=None) -> ReportRecord:
    """Execute one scenario; deterministic given the seed.  Writes the
    report and series files when an output directory is known."""
    cfg.validate()
    rec = ReportRecord(scenario=cfg.scenario, inputs=_inputs_echo(cfg))
    start = time.perf_counter()
    try:
        _SCENARIO_FNS[cfg.scenario](cfg, rec)
    except ConfigInvalid:
        raise
    except ToolkitError as exc:
        rec.error = f"{type(exc).__name__}: {exc}"
    except Exception as exc:   # defensive: a scenario bug should not kill a sweep
        rec.error = f"ScenarioFailed: {type(exc).__name__}: {exc}"
    rec.wall_time_s = time.perf_counter() - start
    target = out_dir if out_dir is not None else cfg.out
    if target:
        write_report(rec, target)
    return rec


def _inputs_echo(cfg: ExperimentConfig) -> dict:
    doc = {k: v for k, v in vars(cfg).items() if v is not None and k != "out"}
    return _plain(doc)


def sweep(configs, out_dir=None, workers: int | None = None) -> list[ReportRecord]:
    """Run many configs; one failure never aborts the rest.  Results come
    back in input order; a summary CSV is written when out_dir is set."""
    configs = list(configs)
    if not configs:
        raise ConfigInvalid("sweep: empty config list")
    if workers is None:
        workers = int(os.environ.get("CALDERON_LAB_WORKERS", "1"))
    names = [f"item_{i:03d}" for i in range(len(configs))]

    def one(i):
        cfg = configs[i]
        sub = (Path(out_dir) / names[i]) if out_dir else None
        try:
            return run(cfg, out_dir=sub)
        except ToolkitError as exc:
            rec = ReportRecord(scenario=getattr(cfg, "scenario", "?"),
                               inputs=_inputs_echo(cfg) if isinstance(cfg, ExperimentConfig) else {},
                               error=f"{type(exc).__name__}: {exc}")
            return rec

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(one, range(len(configs))))
    else:
        records = [one(i) for i in range(len(configs))]

    if out_dir:
        lines = ["item,scenario,passed,error," +
                 "psi_at_T,condition,ratio_spread,empirical_c1"]
        def cell(value):
            return repr(float(value)) if isinstance(value, (int, float)) else ""
        for name, rec in zip(names, records):
            s = rec.scalars
            lines.append(",".join([
                name, rec.scenario, str(rec.passed),
                (rec.error or "").replace(",", ";"),
                cell(s.get("psi_at_T")), str(s.get("condition", "")),
                cell(s.get("ratio_spread")), cell(s.get("empirical_c1")),
            ]))
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "summary.csv").write_text("\n".join(lines) + "\n")
    return records


def selftest(out_dir=None) -> list[ReportRecord]:
    """A fast end-to-end exercise of the main scenarios."""
    configs = [
        parse_config_text("scenario = embedding_check\nspace.q = 2\n"
                          "kernel.variant = power\nkernel.alpha = 0.75\n"
                          "grid.points = 256\n"),
        parse_config_text("scenario = optimal_norm\nspace.q = 2\n"
                          "kernel.variant = power\nkernel.alpha = 0.75\n"
                          "grid.points = 256\n"),
        parse_config_text("scenario = equivalence_sweep\nspace.q = 2\nn = 2\n"
                          "kernel.variant = power\nkernel.alpha = 1.5\nk = 1\n"
                          "grid.points = 256\n"),
    ]
    return sweep(configs, out_dir=out_dir)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--grid-points", type=int, default=None)
    common.add_argument("--tmin", type=float, default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", type=str, default=None)
    common.add_argument("--workers", type=int, default=None)
    parser = argparse.ArgumentParser(prog="calderon-lab",
                                     description="numerical experiments on "
                                                 "smoothness norms and optimal lattices")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", parents=[common], help="run one config file")
    p_run.add_argument("config")
    p_sweep = sub.add_parser("sweep", parents=[common],
                             help="run every .cfg file in a directory")
    p_sweep.add_argument("config_dir")
    sub.add_parser("selftest", parents=[common],
                   help="fast built-in scenario exercise")
    args = parser.parse_args(argv)

    def apply_overrides(cfg: ExperimentConfig) -> ExperimentConfig:
        if args.grid_points is not None:
            cfg.grid_points = args.grid_points
        if args.tmin is not None:
            cfg.tmin_span = args.tmin
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out = args.out
        cfg.validate()
        return cfg

    workers = args.workers
    if workers is None:
        workers = int(os.environ.get("CALDERON_LAB_WORKERS", "1"))

    try:
        if args.command == "run":
            cfg = apply_overrides(load_config(args.config))
            rec = run(cfg)
            print(f"{cfg.scenario}: passed={rec.passed}"
                  + (f" error={rec.error}" if rec.error else ""))
            return 0 if rec.passed else 1
        if args.command == "sweep":
            paths = sorted(Path(args.config_dir).glob("*.cfg"))
            if not paths:
                raise ConfigInvalid(f"no .cfg files in {args.config_dir}")
            configs = [apply_overrides(load_config(p)) for p in paths]
            records = sweep(configs, out_dir=args.out, workers=workers)
            for p, rec in zip(paths, records):
                print(f"{p.name}: passed={rec.passed}"
                      + (f" error={rec.error}" if rec.error else ""))
            return 0 if all(r.passed for r in records) else 1
        records = selftest(out_dir=args.out)
        for rec in records:
            print(f"{rec.scenario}: passed={rec.passed}"
                  + (f" error={rec.error}" if rec.error else ""))
        return 0 if all(r.passed for r in records) else 1
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
