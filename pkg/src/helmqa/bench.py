"""Experiment harness: JSON config in, CSV artifacts out.

Four experiments mirror the CLI subcommands: the deflated homogeneous mode
study, the nonhomogeneous D sweep that locates D*, the ICE sweep that
locates sigma*, and the condition-number table. Every stochastic choice is
seeded from the config seed, so reruns write byte-identical CSVs (the
``wall_ms`` column stays empty unless ``record_timing`` is set).
"""
import csv
import io
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import aqae, densela, fem1d
from .errors import ConfigError
from .samplers import (MAX_EXHAUSTIVE_DIM, ExhaustiveSampler, IceConfig, IceSampler,
                       SaConfig, SimulatedAnnealingSampler, _mix_seed)

SUMMARY_COLUMNS = ("experiment", "N", "p", "k0", "D", "sigma_eta", "seed", "converged",
                   "final_residual", "D_star", "sigma_star", "wall_ms")
EXPERIMENTS = ("homogeneous", "helmholtz", "ice-sweep", "cond-table")
SOLVERS = ("exhaustive", "simulated_annealing")
SOURCES = {"sin2pi": fem1d.default_source, "zero": fem1d.zero_source}
DEFAULT_CASES = ((10, 1, 0.0), (10, 1, math.pi), (10, 1, 2 * math.pi),
                 (2, 5, 0.0), (2, 5, math.pi), (2, 5, 2 * math.pi))


@dataclass
class ExperimentConfig:
    experiment: str = "homogeneous"
    problem: str = "homogeneous"
    N: int = 10
    p: int = 1
    k0: float = 0.0
    nodes: str = "equispaced"
    material: str = "vacuum_sio2"
    source: str = "sin2pi"
    D: int = None
    D_range: list = None
    n_modes: int = 3
    solver: str = "exhaustive"
    sa: dict = field(default_factory=dict)
    ice: dict = field(default_factory=dict)
    sigma_range: list = None
    aqae: dict = field(default_factory=dict)
    threshold: float = 1e-6
    drop_orders: float = 6.0
    repeats: int = 5
    stop_at_first: bool = True
    cases: list = None
    record_timing: bool = False
    seed: int = 0

    @classmethod
    def from_dict(cls, doc, experiment=None):
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        doc = dict(doc)
        if "k0_pi" in doc:
            doc["k0"] = math.pi * float(doc.pop("k0_pi"))
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        if experiment is not None:
            doc["experiment"] = experiment
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, experiment=None):
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc, experiment)

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}")
        if self.experiment == "cond-table":
            return
        if self.problem not in ("homogeneous", "nonhomogeneous"):
            raise ConfigError("problem must be 'homogeneous' or 'nonhomogeneous'")
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}")
        if self.source not in SOURCES:
            raise ConfigError(f"source must be one of {sorted(SOURCES)}")
        if self.material not in ("vacuum_sio2", "uniform"):
            raise ConfigError("material must be 'vacuum_sio2' or 'uniform'")
        if (self.D is None) == (self.D_range is None):
            raise ConfigError("give exactly one of D and D_range")
        if self.experiment == "helmholtz" and self.problem != "nonhomogeneous":
            raise ConfigError("helmholtz runs the nonhomogeneous problem")
        if self.experiment == "homogeneous" and self.problem != "homogeneous":
            raise ConfigError("homogeneous runs the homogeneous problem")
        if self.experiment != "helmholtz" and self.D_range is not None:
            raise ConfigError("D_range is only meaningful for helmholtz")
        if self.experiment == "ice-sweep" and not self.sigma_range:
            raise ConfigError("ice-sweep needs a non-empty sigma_range")
        if self.experiment == "ice-sweep" and self.repeats < 3:
            raise ConfigError("ice-sweep needs repeats >= 3")
        if self.drop_orders <= 0:
            raise ConfigError("drop_orders must be positive")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if self.n_modes < 0:
            raise ConfigError("n_modes must be >= 0")
        if self.solver == "exhaustive":
            top = max(self.d_values())
            if self.N * self.p * top > MAX_EXHAUSTIVE_DIM:
                raise ConfigError(f"exhaustive solver needs N*p*D <= {MAX_EXHAUSTIVE_DIM}, "
                                  f"got {self.N * self.p * top}")
        try:
            self.sa_config()
            self.aqae_config(self.d_values()[0])
            IceConfig(**self.ice)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def d_values(self):
        if self.D is not None:
            return [int(self.D)]
        lo, hi = (int(v) for v in self.D_range)
        if not 1 <= lo <= hi:
            raise ConfigError(f"bad D_range {self.D_range}")
        return list(range(lo, hi + 1))

    def sa_config(self, seed=None):
        opts = dict(self.sa)
        opts["seed"] = self.seed if seed is None else seed
        return SaConfig(**opts)

    def aqae_config(self, D):
        opts = dict(self.aqae)
        qae = aqae.QaeConfig(n_lambda=opts.pop("n_lambda", 10),
                             lambda_min=opts.pop("lambda_min", None),
                             lambda_max=opts.pop("lambda_max", None))
        return aqae.AqaeConfig(D=D, qae=qae, **opts)

    def material_profile(self):
        if self.material == "uniform":
            return fem1d.MaterialProfile.homogeneous(1.0)
        return fem1d.MaterialProfile()

    def to_dict(self):
        return asdict(self)


def build_problem(cfg):
    return fem1d.assemble(cfg.N, cfg.p, cfg.material_profile(), cfg.k0,
                          SOURCES[cfg.source], cfg.nodes)


def build_gevp(cfg, prob=None):
    prob = prob or build_problem(cfg)
    if cfg.problem == "homogeneous":
        return fem1d.homogeneous_gevp(prob)
    return fem1d.normal_gevp(prob)


def build_sampler(cfg, ice=None):
    if cfg.solver == "exhaustive":
        inner = ExhaustiveSampler()
    else:
        inner = SimulatedAnnealingSampler(cfg.sa_config())
    if ice is not None and ice.sigma_eta > 0:
        return IceSampler(inner, ice)
    return inner


@dataclass
class RunSummary:
    rows: list = field(default_factory=list)
    D_star: int = None
    sigma_star: float = None
    threshold: float = 1e-6
    details: dict = field(default_factory=dict)
    traces: list = field(default_factory=list)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in self.rows:
            w.writerow([_fmt(row.get(c)) for c in SUMMARY_COLUMNS])
        return buf.getvalue()


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write(path, text):
    """Atomic write: readers never see a half-written artifact."""
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _row(cfg, **kw):
    row = {"experiment": cfg.experiment, "N": cfg.N, "p": cfg.p, "k0": float(cfg.k0),
           "seed": cfg.seed}
    row.update(kw)
    return row


def _elapsed_ms(cfg, t0):
    return int(round(1000 * (time.perf_counter() - t0))) if cfg.record_timing else None


def _finish(cfg, out_dir, summary):
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        _write(os.path.join(out_dir, "summary.csv"), summary.to_csv())
        doc = {"config": cfg.to_dict(), "threshold": summary.threshold,
               "D_star": summary.D_star, "sigma_star": summary.sigma_star}
        doc.update(summary.details)
        _write(os.path.join(out_dir, "result.json"),
               json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")
    return summary


def _json_default(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    raise TypeError(type(v).__name__)


def run_homogeneous(cfg, out_dir=None):
    """Lowest ``n_modes`` eigenpairs with deflation; one trace CSV per mode."""
    summary = RunSummary(threshold=cfg.threshold)
    if cfg.n_modes == 0:
        return _finish(cfg, out_dir, summary)
    t0 = time.perf_counter()
    prob = build_problem(cfg)
    gevp = fem1d.homogeneous_gevp(prob)
    refs = densela.generalized_eigen(gevp.H, gevp.M)
    D = cfg.d_values()[0]
    results = aqae.solve_modes(gevp, cfg.n_modes, cfg.aqae_config(D), build_sampler(cfg),
                               seed=cfg.seed, references=refs)
    modes = []
    for n, (trace, pair) in enumerate(results):
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            _write(os.path.join(out_dir, f"trace_mode{n}.csv"), trace.to_csv())
        modes.append({"mode": n, "lambda": pair.value, "reference": refs[n].value,
                      "eig_disc": trace.eig_disc[-1], "mode_disc": trace.mode_disc[-1],
                      "final_residual": trace.final_residual,
                      "converged": trace.converged(cfg.threshold),
                      "flags": sorted(trace.flags)})
        summary.rows.append(_row(cfg, D=D, sigma_eta=0.0, converged=trace.converged(cfg.threshold),
                                 final_residual=trace.final_residual))
    ms = _elapsed_ms(cfg, t0)
    for row in summary.rows:
        row["wall_ms"] = ms
    summary.details["modes"] = modes
    summary.traces = [t for t, _ in results]
    return _finish(cfg, out_dir, summary)


def run_nonhomogeneous(cfg, out_dir=None):
    """Ascending D sweep on the normal-equation pencil.

    A D value counts as converged when the median final relative residual
    over the repeats is at most ``threshold``; D* is the first such D.
    """
    t0 = time.perf_counter()
    prob = build_problem(cfg)
    gevp = fem1d.normal_gevp(prob)
    ref = densela.generalized_eigen(gevp.H, gevp.M)[0]
    x_ref = densela.solve_spd(prob.A_normal, prob.b)
    summary = RunSummary(threshold=cfg.threshold)
    per_d = []
    best = None  # (median, traces) of D* or of the best D tried
    for D in cfg.d_values():
        traces = []
        for r in range(cfg.repeats):
            sampler = build_sampler(cfg)
            tr = aqae.aqae_solve(gevp, cfg.aqae_config(D), sampler, reference=ref,
                                 seed=_mix_seed(cfg.seed, D, r))
            traces.append(tr)
            if out_dir is not None:
                os.makedirs(out_dir, exist_ok=True)
                _write(os.path.join(out_dir, f"trace_D{D}_rep{r}.csv"), tr.to_csv())
        finals = np.array([t.final_residual for t in traces])
        med = float(np.nanmedian(finals)) if np.any(~np.isnan(finals)) else math.nan
        ok = bool(med <= cfg.threshold)
        per_d.append({"D": D, "median_final_residual": med,
                      "final_residuals": finals.tolist(), "converged": ok})
        summary.rows.append(_row(cfg, D=D, sigma_eta=0.0, converged=ok, final_residual=med))
        if summary.D_star is None and (best is None or med < best[0] or math.isnan(best[0])):
            best = (med, traces)
        if ok and summary.D_star is None:
            summary.D_star = D
            if cfg.stop_at_first:
                break
    ms = _elapsed_ms(cfg, t0)
    for row in summary.rows:
        row["D_star"] = summary.D_star
        row["wall_ms"] = ms
    chosen = min(best[1], key=lambda t: (math.isnan(t.final_residual), t.final_residual))
    summary.traces = best[1]
    solution = _solution_report(prob, gevp, chosen, x_ref, out_dir)
    summary.details.update({"per_D": per_d, "solution": solution,
                            "lambda_reference": ref.value})
    return _finish(cfg, out_dir, summary)


def _solution_report(prob, gevp, trace, x_ref, out_dir):
    try:
        phi = aqae.recover_solution(trace.final_lambda, trace.final_phi, gevp.b)
    except Exception as exc:  # report, do not abort the sweep
        return {"error": f"{type(exc).__name__}: {exc}"}
    err = float(np.linalg.norm(phi - x_ref) / np.linalg.norm(x_ref))
    if out_dir is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("x", "phi", "phi_reference"))
        for x, a, b in zip(prob.dof_coordinates(), phi, x_ref):
            w.writerow((repr(float(x)), repr(float(a)), repr(float(b))))
        os.makedirs(out_dir, exist_ok=True)
        _write(os.path.join(out_dir, "solution.csv"), buf.getvalue())
    return {"relative_error": err}


def run_ice_sweep(cfg, out_dir=None):
    """Residual drop versus ICE magnitude; sigma* is the first sigma whose
    mean drop over repeats falls below ``drop_orders`` orders of magnitude."""
    t0 = time.perf_counter()
    prob = build_problem(cfg)
    gevp = build_gevp(cfg, prob)
    ref = densela.generalized_eigen(gevp.H, gevp.M)[0]
    D = cfg.d_values()[0]
    summary = RunSummary(threshold=cfg.threshold)
    stats = []
    ice_opts = {k: v for k, v in cfg.ice.items() if k not in ("sigma_eta", "seed")}
    for s_idx, sigma in enumerate(cfg.sigma_range):
        sigma = float(sigma)
        drops, finals = [], []
        for r in range(cfg.repeats):
            ice = IceConfig(sigma_eta=sigma, seed=_mix_seed(cfg.seed, 7, s_idx, r), **ice_opts)
            tr = aqae.aqae_solve(gevp, cfg.aqae_config(D), build_sampler(cfg, ice),
                                 reference=ref, seed=_mix_seed(cfg.seed, s_idx, r))
            drops.append(tr.orders_dropped())
            finals.append(tr.final_residual)
            if out_dir is not None:
                os.makedirs(out_dir, exist_ok=True)
                _write(os.path.join(out_dir, f"trace_sigma{s_idx}_rep{r}.csv"), tr.to_csv())
        drops = np.array(drops, dtype=float)
        finite = np.where(np.isinf(drops), 16.0, drops)  # exact hit counts as machine precision
        mean, std = float(np.nanmean(finite)), float(np.nanstd(finite))
        stats.append({"sigma_eta": sigma, "mean_drop": mean, "std_drop": std,
                      "drops": drops.tolist(), "final_residuals": finals})
        med = float(np.nanmedian(finals))
        summary.rows.append(_row(cfg, D=D, sigma_eta=sigma, converged=bool(med <= cfg.threshold),
                                 final_residual=med))
        if summary.sigma_star is None and mean < cfg.drop_orders:
            summary.sigma_star = sigma
    ms = _elapsed_ms(cfg, t0)
    for row in summary.rows:
        row["sigma_star"] = summary.sigma_star
        row["wall_ms"] = ms
    summary.details["ice"] = stats
    if out_dir is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("sigma_eta", "mean_drop", "std_drop", "repeats"))
        for s in stats:
            w.writerow((repr(s["sigma_eta"]), repr(s["mean_drop"]), repr(s["std_drop"]),
                        len(s["drops"])))
        os.makedirs(out_dir, exist_ok=True)
        _write(os.path.join(out_dir, "ice_stats.csv"), buf.getvalue())
    return _finish(cfg, out_dir, summary)


def run_condition_table(cases=None, nodes="equispaced", out_dir=None, cfg=None):
    """Condition numbers of ``(K+M)^T (K+M)`` for each ``(N, p, k0)``."""
    cases = [tuple(c) for c in (cases or DEFAULT_CASES)]
    table = []
    for N, p, k0 in cases:
        prob = fem1d.assemble(int(N), int(p), k0=float(k0), nodes=nodes)
        kappa = densela.condition_number(prob.A_normal)
        table.append({"N": int(N), "p": int(p), "k0": float(k0), "nodes": nodes,
                      "condition_number": kappa, "sqrt_condition": math.sqrt(kappa)})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("N", "p", "k0", "nodes", "condition_number", "sqrt_condition"))
    for t in table:
        w.writerow((t["N"], t["p"], repr(t["k0"]), t["nodes"], repr(t["condition_number"]),
                    repr(t["sqrt_condition"])))
    summary = RunSummary()
    summary.details["table"] = table
    seed = cfg.seed if cfg is not None else 0
    for t in table:
        summary.rows.append({"experiment": "cond-table", "N": t["N"], "p": t["p"],
                             "k0": t["k0"], "seed": seed})
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        _write(os.path.join(out_dir, "cond_table.csv"), buf.getvalue())
        if cfg is not None:
            _finish(cfg, out_dir, summary)
    return summary


def run(cfg, out_dir=None):
    if cfg.experiment == "homogeneous":
        return run_homogeneous(cfg, out_dir)
    if cfg.experiment == "helmholtz":
        return run_nonhomogeneous(cfg, out_dir)
    if cfg.experiment == "ice-sweep":
        return run_ice_sweep(cfg, out_dir)
    return run_condition_table(cfg.cases, cfg.nodes, out_dir, cfg)
