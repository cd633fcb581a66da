"""Command-line runner for the experiments.

    string-polaron <experiment> [--config FILE] [--set k=v]... [--out DIR] [--sweep k=v1,v2,...]

Experiments: spectrum, modes, oracle, fluct, profile, decay, validate.
Exit status: 0 success, 1 failed validation, 2 usage or config error,
3 numerical failure.
"""

import argparse
import copy
import csv
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dynamics, fluctuations, modes, oracle, spectral
from .config import KINDS, OPTIONS, Config, load_config, parse_assignment, parse_sweep
from .core import damping_ratio, with_damping_ratio
from .errors import (ComputeError, ConfigError, InternalError, ModelError, OutsideWeakCoupling,
                     ParameterError)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_COMPUTE = 0, 1, 2, 3


# --------------------------------------------------------------------------
# output formatting

def fmt(x):
    """Fixed 17-significant-digit rendering used in every artifact."""
    return format(float(x), ".17g")


def to_json(obj, indent=0):
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}{to_json(str(k))}: {to_json(v, indent + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        if any(isinstance(v, (dict, list, tuple)) for v in obj):
            items = [pad + to_json(v, indent + 1) for v in obj]
            return "[\n" + ",\n".join(items) + "\n" + end + "]"
        return "[" + ", ".join(to_json(v, indent + 1) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    if obj is None:
        return "null"
    s = str(obj)
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_json(path, obj):
    Path(path).write_text(to_json(obj) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# experiment spec

@dataclass
class ExperimentSpec:
    kind: str
    config: Config = field(default_factory=Config)
    sweep: tuple = None          # (key, [values as text])
    output: Path = Path("out")
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment {self.kind!r} (choose from {', '.join(KINDS)})")
        self.output = Path(self.output)

    def option(self, key, default=None):
        return self.config.options.get(key, default)


@dataclass
class Outcome:
    summary: dict
    passed: bool = True


def _guard(module, operation, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (ConfigError, ParameterError):
        raise
    except ModelError as exc:
        raise ComputeError(module, operation, exc) from exc
    except (FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise ComputeError(module, operation, exc) from exc


def _param_summary(p):
    return {"params": {k: v for k, v in p.to_dict().items()}, "eta": p.eta,
            "units": p.units.label()}


# --------------------------------------------------------------------------
# experiments

def run_spectrum(spec, p, out):
    sd = spectral.SpectralDensity.tabulate(p, n_points=spec.option("grid_points", 2001))
    write_csv(out / "spectrum.csv", ["omega", "nu0", "nu", "excess"], sd.table())
    summary = _param_summary(p)
    summary["sum_rule"] = _guard("spectral", "sum_rule", spectral.sum_rule, p)
    summary["sum_rule_contour"] = spectral.sum_rule_contour(p)
    if p.Omega > 0:
        quad = _guard("spectral", "particle_energy", spectral.particle_energy, p)
        summary["ep_ground_quadrature"] = quad
        try:
            closed = spectral.ground_state_energy_weak_coupling(p)
        except OutsideWeakCoupling as exc:
            closed = None
            summary["closed_form_note"] = str(exc)
        summary["ep_ground_closed_form"] = closed
        if closed is not None:
            rep = spectral.ground_state_report(p)
            summary["discrepancy"] = rep.discrepancy
            summary["eta_part_quadrature"] = rep.eta_part_quadrature
            summary["eta_part_closed_form"] = rep.eta_part_closed_form
            summary["eta_part_ratio"] = rep.eta_part_ratio
    if spec.option("histogram", False):
        summary["histogram"] = _histogram(spec, p, out)
    if spec.option("continuity", False):
        c = _guard("spectral", "continuity_check", spectral.continuity_check, p)
        write_csv(out / "continuity.csv", ["boundary", "E_p"], zip(c.boundaries, c.energies))
        summary["continuity"] = {"max_step": c.max_step, "lipschitz_bound": c.lipschitz_bound,
                                 "max_jump": c.max_jump}
    return Outcome(summary)


def _histogram(spec, p, out=None, n_bins=25):
    pc = p.replace(L=spec.option("count_L", 1e4), omega_max=p.omega_max)
    top = spec.option("count_max", 5.0 * (p.Omega if p.Omega > 0 else p.eta / p.m))
    w, _ = _guard("modes", "roots_below", modes.roots_below, pc, top)
    edges = np.linspace(0.0, top, n_bins + 1)
    counts, expected = spectral.root_histogram(w, edges, pc)
    z = np.abs(counts - expected) / np.sqrt(expected)
    grid = np.linspace(top / 400, top, 400)
    cum = np.searchsorted(w, grid, side="right") - np.array([spectral.mode_count(pc, g) for g in grid])
    if out is not None:
        write_csv(out / "histogram.csv", ["lo", "hi", "count", "expected"],
                  zip(edges[:-1], edges[1:], counts.astype(int), expected))
    worst = int(np.argmax(z))
    return {"L": pc.L, "n_roots": int(w.size), "max_sigma": float(z[worst]),
            "worst_count": int(counts[worst]), "worst_expected": float(expected[worst]),
            "max_cumulative_deviation": float(np.max(np.abs(cum)))}


def run_modes(spec, p, out):
    n = spec.option("n_roots", p.n_modes + 1)
    truncated = spec.option("truncated", False)
    norm = spec.option("normalization", "exact")
    cache = spec.option("cache_dir")
    sp = modes.load_cache(p, n, truncated, cache, norm) if cache else None
    if sp is None:
        sp = _guard("modes", "solve_secular", modes.solve_secular, p, n_roots=n,
                    truncated=truncated, normalization=norm)
        if cache:
            modes.save_cache(sp, cache)
    sp.write_csv(out / "modes.csv")
    summary = _param_summary(p)
    summary.update({"n_roots": len(sp), "truncated": truncated, "normalization": norm,
                    "omega_lowest": sp.omega_q[0], "omega_highest": sp.omega_q[-1]})
    if truncated:
        res = modes.truncated_secular_function(p, sp.omega_q**2)
        summary["max_secular_residual"] = float(np.max(np.abs(res)))
    else:
        th = p.L * sp.omega_q / (2 * p.s) - sp.branch * math.pi
        res = modes._branch_function(p, sp.branch, th)
        summary["max_secular_residual"] = float(np.max(np.abs(res)))
        summary["wavevector_residual"] = modes.wavevector_residual(sp)
    if spec.option("check_forms", False):
        ea, eb = _guard("modes", "form_residuals", modes.orthonormality_errors, sp)
        summary["max_A_minus_identity"] = ea
        summary["max_B_offdiag_rel"] = eb
    return Outcome(summary)


def run_oracle(spec, p, out):
    forms = oracle.build_forms(p)
    o = _guard("oracle", "diagonalize", oracle.diagonalize, forms)
    o.write_csv(out / "oracle.csv")
    ra, rb = o.residuals()
    fin = _guard("modes", "truncated_roots", modes.solve_secular, p, truncated=True)
    cont, _ = _guard("modes", "continuum_roots", modes.continuum_roots, p, p.n_modes + 1)
    ref = o.omega
    nz = ref > 0
    summary = _param_summary(p)
    summary.update({
        "size": forms.size, "condition_number": forms.condition_number(),
        "residual_A": ra, "residual_B": rb,
        "max_rel_finite": float(np.max(np.abs(fin.omega_q[nz] - ref[nz]) / ref[nz])),
        "max_rel_continuum": float(np.max(np.abs(cont[nz] - ref[nz]) / ref[nz])),
    })
    write_csv(out / "roots_vs_oracle.csv", ["index", "omega_oracle", "omega_finite", "omega_continuum"],
              zip(range(ref.size), ref, fin.omega_q, cont))
    return Outcome(summary)


def run_fluct(spec, p, out):
    temps = spec.option("temperatures", [p.T])
    rows, reports = [], []
    for T in temps:
        rep = _guard("fluctuations", "fluctuation_report", fluctuations.fluctuation_report,
                     p.replace(T=T), omega_top=spec.option("omega_top"))
        reports.append(rep)
        rows.append(rep.row())
    write_csv(out / "fluct.csv", ["T", "x2_mode_sum", "x2_fdt", "discrepancy"], rows)
    tol = spec.config.tolerances["fluct_rel"]
    summary = _param_summary(p)
    summary["x2_mode_sum"] = reports[0].x2_mode_sum
    summary["x2_fdt"] = reports[0].x2_fdt
    summary["x2_matsubara"] = reports[0].x2_matsubara
    summary["discrepancy"] = reports[0].discrepancy
    summary["rows"] = [{"T": r.T, "x2_mode_sum": r.x2_mode_sum, "x2_fdt": r.x2_fdt,
                        "x2_matsubara": r.x2_matsubara, "discrepancy": r.discrepancy,
                        "n_modes": r.n_modes} for r in reports]
    summary["max_discrepancy"] = max(r.discrepancy for r in reports)
    summary["within_tolerance"] = summary["max_discrepancy"] < tol
    return Outcome(summary)


# The tail window needs L >> s / Omega and a small damping ratio; these apply
# unless the config sets the keys itself.
PROFILE_DEFAULTS = {"L": "4000", "omega_max": "1000", "damping_ratio": "0.1"}


def run_profile(spec, p, out):
    given = spec.config.params
    extra = {k: v for k, v in PROFILE_DEFAULTS.items()
             if k not in given and not (k == "damping_ratio" and "rho" in given)}
    if extra:
        p = spec.config.model_params(extra)
    lo, hi = fluctuations.default_window(p)
    z_min = spec.option("z_min", 0.5 * lo)
    z_max = spec.option("z_max", min(2 * hi, 0.5 * p.L))
    z = np.geomspace(z_min, z_max, spec.option("z_points", 120))
    rep = _guard("fluctuations", "r2_profile", fluctuations.r2_profile, p, z)
    write_csv(out / "profile.csv", ["z", "r2_total", "r2_baseline", "r2_excess"], rep.rows())
    sel = (rep.z >= lo) & (rep.z <= hi)
    log_law = 2 * p.hbar / (math.pi * p.eta) * np.log(rep.z[sel] * p.q_max)
    ratio = rep.r2_baseline[sel] / log_law
    summary = _param_summary(p)
    summary.update({
        "window": list(rep.tail_fit.window), "n_fit_points": rep.tail_fit.n_points,
        "tail_coefficient": rep.tail_fit.amplitude, "expected_coefficient": rep.expected_amplitude,
        "coefficient_ratio": rep.tail_fit.amplitude / rep.expected_amplitude,
        "tail_exponent": rep.free_fit.exponent,
        "baseline_over_2ln_ratio_min": float(ratio.min()),
        "baseline_over_2ln_ratio_max": float(ratio.max()),
        "excess_routes_max_rel": float(np.max(np.abs(rep.r2_excess - rep.r2_excess_direct)
                                              / np.abs(rep.r2_excess_direct))),
    })
    return Outcome(summary)


def _near_monitors(p):
    wavelength = 2 * math.pi * p.s / p.Omega
    return tuple(np.linspace(0.5 * wavelength / 6, wavelength, 12))


def run_decay(spec, p, out):
    t_max = spec.option("t_max")
    fit = _guard("dynamics", "run_decay_experiment", dynamics.run_decay_experiment, p,
                 x0=spec.option("x0", 1.0), v0=spec.option("v0", 0.0), t_max=t_max,
                 dz=spec.option("dz"), cfl=spec.option("cfl", 0.5),
                 allow_reflection=spec.option("allow_reflection", False),
                 monitor_z=tuple(spec.option("monitor_z", _near_monitors(p))),
                 snapshot_times=tuple(spec.option("snapshot_times", ())),
                 record_every=spec.option("record_every", 1))
    sim = fit.simulation
    every = max(1, sim.t.size // 20000)
    write_csv(out / "decay.csv", ["t", "x", "energy_total", "energy_radiated"],
              zip(sim.t[::every], sim.x[::every], sim.energy[::every], sim.radiated[::every]))
    if sim.snapshots:
        z = sim.lattice.z
        rows = ((t, zz, r) for t, R in sorted(sim.snapshots.items()) for zz, r in zip(z, R))
        write_csv(out / "snapshots.csv", ["t", "z", "R"], rows)
    summary = _param_summary(p)
    summary.update({
        "gamma_fit": fit.gamma_fit, "gamma_theory": fit.gamma_theory,
        "gamma_ratio": fit.gamma_ratio, "omega_fit": fit.omega_fit,
        "omega_theory": fit.omega_theory, "window": list(fit.window),
        "n_extrema": fit.n_extrema, "energy_drift_per_period": fit.energy_drift,
        "energy_fluctuation": fit.energy_fluctuation, "shadow_drift": fit.shadow_drift,
        "dz": sim.lattice.dz, "dt": sim.dt,
        "reflection_time": dynamics.reflection_time(p),
        "retarded_residual": dynamics.check_retarded_solution(sim),
        "reflection_detected_at": dynamics.detect_reflection(fit),
    })
    return Outcome(summary)


# --------------------------------------------------------------------------
# validation

@dataclass(frozen=True)
class CheckResult:
    name: str
    route_a: float
    route_b: float
    discrepancy: float
    tolerance: float

    @property
    def passed(self):
        return bool(self.discrepancy <= self.tolerance)


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def as_dict(self):
        return {"passed": self.passed,
                "checks": [{"name": c.name, "route_a": c.route_a, "route_b": c.route_b,
                            "discrepancy": c.discrepancy, "tolerance": c.tolerance,
                            "passed": c.passed} for c in self.checks]}


def report(validation, stream=None):
    """Print a fixed-width table; returns the exit status it implies."""
    if not validation.checks:
        raise InternalError("validation report is empty")
    stream = stream or sys.stdout
    names = [c.name for c in validation.checks]
    if len(set(names)) != len(names):
        raise InternalError("a cross-check appears more than once")
    w = max(len(n) for n in names)
    head = f"{'check':<{w}}  {'route A':>22}  {'route B':>22}  {'discrepancy':>11}  {'tolerance':>9}    "
    print(head, file=stream)
    print("-" * len(head), file=stream)
    for c in validation.checks:
        mark = "✓" if c.passed else "✗"
        print(f"{c.name:<{w}}  {c.route_a:>22.15g}  {c.route_b:>22.15g}  "
              f"{c.discrepancy:>11.3e}  {c.tolerance:>9.2e}  {mark}", file=stream)
    status = "all checks passed" if validation.passed else "VALIDATION FAILED"
    print(status, file=stream)
    return EXIT_OK if validation.passed else EXIT_FAIL


# Fixed settings of the six cross-checks, on top of the configured parameters:
#   roots      the N-mode secular equation vs the generalized eigensolver
#   histogram  roots of the secular equation at L = count_L (default 1e4) up to 5 Omega
#   fluct      L raised to at least 2000 so finite-size corrections stay below 1e-5
#   energy     eta/(m Omega) = 0.01, omega_max = 1000 Omega; total E_p compared
#   gamma      t_max = 150, L = 2.1 s t_max, release from x0 = 1
#   profile    128 continuum modes, random amplitudes from ``seed``, 41 positions

def run_validate(spec, p, out):
    tol = spec.config.tolerances
    checks = []

    o = _guard("oracle", "diagonalize", oracle.diagonalize, oracle.build_forms(p))
    fin = _guard("modes", "solve_secular", modes.solve_secular, p, truncated=True)
    nz = o.omega > 0
    rel = np.abs(fin.omega_q[nz] - o.omega[nz]) / o.omega[nz]
    i = int(np.argmax(rel))
    checks.append(CheckResult("secular roots vs oracle eigenvalues", fin.omega_q[nz][i],
                              o.omega[nz][i], float(rel[i]), tol["secular_vs_oracle"]))

    h = _histogram(spec, p)
    checks.append(CheckResult("nu(omega) vs root histogram", h["worst_count"], h["worst_expected"],
                              h["max_sigma"], tol["histogram_sigma"]))

    pf = p.replace(L=max(p.L, 2000.0), omega_max=p.omega_max)
    fr = _guard("fluctuations", "fluctuation_report", fluctuations.fluctuation_report, pf)
    checks.append(CheckResult("<x^2> mode sum vs FDT", fr.x2_mode_sum, fr.x2_fdt,
                              fr.discrepancy, tol["fluct_rel"]))

    pe = with_damping_ratio(p, 0.01).replace(omega_max=1000.0 * p.Omega)
    g = _guard("spectral", "ground_state_report", spectral.ground_state_report, pe)
    checks.append(CheckResult("E_p quadrature vs weak-coupling form", g.quadrature, g.closed_form,
                              abs(g.discrepancy) / abs(g.closed_form), tol["energy_rel"]))

    t_max = 150.0
    pd = p.replace(L=2.1 * p.s * t_max, omega_max=p.omega_max)
    fit = _guard("dynamics", "run_decay_experiment", dynamics.run_decay_experiment, pd, t_max=t_max)
    checks.append(CheckResult("decay rate vs rho s / m", fit.gamma_fit, fit.gamma_theory,
                              abs(fit.gamma_ratio - 1), tol["gamma_rel"]))

    sp = _guard("modes", "solve_secular", modes.solve_secular, p, n_roots=128, n_rows=1)
    rng = np.random.default_rng(spec.option("seed", spec.seed))
    amp = rng.normal(size=len(sp))
    z = np.linspace(-0.5 * p.L, 0.5 * p.L, 41)
    ra = modes.string_profile(sp, amp, z)
    rb = _guard("modes", "string_profile_fourier", modes.string_profile_fourier, sp, amp, z)
    j = int(np.argmax(np.abs(ra - rb)))
    checks.append(CheckResult("string profile closed form vs Fourier sum", ra[j], rb[j],
                              float(np.max(np.abs(ra - rb)) / np.max(np.abs(ra))),
                              tol["profile_routes"]))

    val = ValidationReport(checks)
    summary = _param_summary(p)
    summary.update(val.as_dict())
    summary["tolerances"] = dict(tol)
    code = report(val)
    return Outcome(summary, passed=code == EXIT_OK)


EXPERIMENTS = {
    "spectrum": (run_spectrum, ("sum_rule", "ep_ground_quadrature", "ep_ground_closed_form")),
    "modes": (run_modes, ("n_roots", "max_secular_residual")),
    "oracle": (run_oracle, ("max_rel_finite", "max_rel_continuum")),
    "fluct": (run_fluct, ("x2_mode_sum", "x2_fdt", "discrepancy")),
    "profile": (run_profile, ("tail_coefficient", "tail_exponent")),
    "decay": (run_decay, ("gamma_fit", "gamma_theory", "gamma_ratio")),
    "validate": (run_validate, ("passed",)),
}


# --------------------------------------------------------------------------
# driver

def _run_one(spec, out):
    fn, _ = EXPERIMENTS[spec.kind]
    p = spec.config.model_params()
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc.strerror}") from None
    outcome = fn(spec, p, out)
    summary = {"experiment": spec.kind}
    summary.update(outcome.summary)
    write_json(out / "summary.json", summary)
    return outcome


def _trend(values):
    v = [x for x in values if isinstance(x, (int, float)) and math.isfinite(x)]
    if len(v) < 2:
        return "n/a"
    d = np.diff(v)
    if np.all(d > 0):
        return "increasing"
    if np.all(d < 0):
        return "decreasing"
    return "non-monotone"


def run(spec):
    """Run one experiment (or a sweep of it); returns the exit status."""
    if spec.sweep is None:
        outcome = _run_one(spec, spec.output)
        return EXIT_OK if outcome.passed else EXIT_FAIL

    key, values = spec.sweep
    if key not in OPTIONS and key not in ("damping_ratio",) and not _is_param(key):
        raise ConfigError("unknown sweep key", key=key)
    instances = []
    for v in values:
        cfg = copy.deepcopy(spec.config)
        cfg.set(key, v)
        sub = ExperimentSpec(kind=spec.kind, config=cfg, output=spec.output / f"{key}={v}",
                             seed=spec.seed)
        # validate parameters up front so config errors surface before any work
        cfg.model_params()
        instances.append(sub)
    with ThreadPoolExecutor(max_workers=min(4, len(instances))) as pool:
        outcomes = list(pool.map(lambda s: _run_one(s, s.output), instances))
    _, headline = EXPERIMENTS[spec.kind]
    rows = [[v] + [o.summary.get(h) for h in headline] for v, o in zip(values, outcomes)]
    write_csv(spec.output / "sweep.csv", [key] + list(headline), rows)
    write_json(spec.output / "sweep.json", {
        "experiment": spec.kind, "sweep_key": key, "values": list(values),
        "rows": [dict(zip([key] + list(headline), r)) for r in rows],
        "trend": {h: _trend([o.summary.get(h) for o in outcomes]) for h in headline},
    })
    return EXIT_OK if all(o.passed for o in outcomes) else EXIT_FAIL


def _is_param(key):
    from .core import PARAM_FIELDS, _ALIASES
    return key in PARAM_FIELDS or key in _ALIASES


def build_parser():
    ap = argparse.ArgumentParser(prog="string-polaron",
                                 description="Particle on an elastic string: spectra, fluctuations, dynamics.")
    ap.add_argument("experiment", help=", ".join(KINDS))
    ap.add_argument("--config", help="flat key = value parameter file")
    ap.add_argument("--set", action="append", default=[], metavar="K=V",
                    help="override one key (repeatable)")
    ap.add_argument("--out", default="out", help="output directory (default: out)")
    ap.add_argument("--sweep", metavar="K=V1,V2,...", help="run once per value")
    ap.add_argument("--seed", type=int, default=0)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config) if args.config else Config()
        for item in args.set:
            k, v = parse_assignment(item)
            cfg.set(k, v)
        sweep = parse_sweep(args.sweep) if args.sweep else None
        spec = ExperimentSpec(kind=args.experiment, config=cfg, sweep=sweep,
                              output=Path(args.out), seed=args.seed)
        return run(spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParameterError as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ComputeError as exc:
        print(f"compute error in {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except ModelError as exc:
        print(f"compute error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
