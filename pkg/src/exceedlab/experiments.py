"""Experiment runner: configuration, seeded parallel replication, outputs.

An experiment is described by a flat text config (INI-style sections, one
key per line) or built programmatically as an :class:`ExperimentConfig`.
Running one executes the named experiment kind, writes its table
(CSV by default) plus a JSON summary into the output directory, and
finishes with a ``manifest.json`` listing every emitted file with its
SHA-256 digest, the resolved config snapshot, the code version, and
per-stage timings.

Determinism contract: the data outputs (tables and summaries) are a pure
function of (config, seed), independent of the parallelism degree.
Replicates map to workers by static contiguous chunking keyed to the
replicate id, every replicate draws from its own (seed, replicate)
stream, results are merged in replicate order, and probability
aggregation uses exact summation (math.fsum).  Manifest timing fields are
informational and excluded from the contract; ``replay`` re-runs the
config snapshot and re-verifies the output digests.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
import math
import multiprocessing
import os
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from exceedlab import __version__ as _CODE_VERSION
from exceedlab import exceedance as xc
from exceedlab import mtc
from exceedlab import panelgen as pg
from exceedlab import studentize as stu
from exceedlab.numerics import (
    any_exceedence_prob,
    bivariate_normal_tail,
    dependence_summary,
    phi_bound,
    student_t_quantile,
    student_t_sf,
    threshold_regime,
)

__all__ = [
    "EXPERIMENT_KINDS",
    "ExperimentConfig",
    "RunManifest",
    "default_jobs",
    "load_manifest",
    "replay",
    "resolve_level",
    "run",
    "validate_config",
]

EXPERIMENT_KINDS = ("calibrate", "tails", "coupling", "cluster", "mtc", "paper-table")

_JOBS_ENV = "EXCEEDLAB_JOBS"


def default_jobs() -> int:
    """Worker count: the EXCEEDLAB_JOBS override, else the CPU count."""
    env = os.environ.get(_JOBS_ENV)
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Everything one run needs; validated before any work starts.

    ``level_policy`` is ``"eta"`` (derive t from the admissible floor at
    slack eta, using gamma from the model's maximal correlation),
    ``"ma-refined"`` (the moving-average log-log refinement) or
    ``"explicit"`` (use ``level_t`` as given).  ``s_level`` optionally
    fixes the R-scale level for tails/coupling; by default it is the
    mapped t-level.
    """

    kind: str
    panel: pg.PanelSpec
    level_policy: str = "eta"
    eta: float = 0.05
    level_t: float | None = None
    rho_max_override: float | None = None
    loglog_coeff: float = 3.0
    reps: int = 1000
    jobs: int = 0
    out: str | None = None
    fmt: str = "csv"
    # tails
    s_level: float | None = None
    row: int = 1
    pair: tuple[int, int] | None = None
    # block scheme override (cluster/coupling); derived from the level if None
    block_ell: int | None = None
    # coupling
    se_cap: float = 0.02
    match_draws: int = 100_000
    # mtc
    bh_q: float = 0.1
    fwer_a: float = 0.05
    # paper-table
    p_list: tuple[int, ...] = (10_000, 100_000, 1_000_000)
    p0: int = 1_000_000
    # validation proxy
    logp_n_ratio_max: float = 0.5

    def validate(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        self.panel.validate()
        if self.level_policy not in ("eta", "ma-refined", "explicit"):
            raise ValueError(f"unknown level policy {self.level_policy!r}")
        if self.level_policy == "explicit" and (
            self.level_t is None or self.level_t <= 0.0
        ):
            raise ValueError("explicit level policy needs a positive level_t")
        if self.level_policy == "ma-refined" and self.panel.model.kind != "moving-average":
            raise ValueError("ma-refined level policy needs a moving-average model")
        if self.reps < 1:
            raise ValueError(f"replicate count must be >= 1, got {self.reps!r}")
        if self.jobs < 0:
            raise ValueError("jobs must be >= 0 (0 means auto)")
        if self.fmt not in ("csv", "json"):
            raise ValueError(f"unknown output format {self.fmt!r}")
        if self.pair is not None:
            i1, i2 = self.pair
            if i1 == i2 or not (1 <= i1 <= self.panel.p and 1 <= i2 <= self.panel.p):
                raise ValueError(f"invalid pair {self.pair!r}")
        if not 0.0 < self.bh_q < 1.0:
            raise ValueError("bh_q must lie in (0, 1)")
        if not 0.0 < self.fwer_a < 1.0:
            raise ValueError("fwer_a must lie in (0, 1)")
        if self.p0 < 2 or any(p < 2 for p in self.p_list):
            raise ValueError("paper-table test counts must be >= 2")

    # -- flat text round trip ------------------------------------------------

    def to_text(self) -> str:
        cp = configparser.ConfigParser()
        cp["experiment"] = {
            "kind": self.kind,
            "reps": str(self.reps),
            "jobs": str(self.jobs),
            "format": self.fmt,
        }
        if self.out:
            cp["experiment"]["out"] = self.out
        cp["level"] = {
            "policy": self.level_policy,
            "eta": repr(self.eta),
            "loglog_coeff": repr(self.loglog_coeff),
        }
        if self.level_t is not None:
            cp["level"]["t"] = repr(self.level_t)
        if self.s_level is not None:
            cp["level"]["s"] = repr(self.s_level)
        if self.rho_max_override is not None:
            cp["level"]["rho_max"] = repr(self.rho_max_override)
        if self.block_ell is not None:
            cp["level"]["ell"] = str(self.block_ell)
        cp["tails"] = {"row": str(self.row)}
        if self.pair is not None:
            cp["tails"]["pair"] = f"{self.pair[0]}, {self.pair[1]}"
        cp["coupling"] = {
            "se_cap": repr(self.se_cap),
            "match_draws": str(self.match_draws),
        }
        cp["mtc"] = {"bh_q": repr(self.bh_q), "fwer_a": repr(self.fwer_a)}
        cp["paper-table"] = {
            "p_list": ", ".join(str(p) for p in self.p_list),
            "p0": str(self.p0),
        }
        cp["validate"] = {"logp_n_ratio_max": repr(self.logp_n_ratio_max)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue() + pg.panel_spec_to_config(self.panel)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        cp.read_string(text)
        panel = pg.panel_spec_from_config(text)
        exp = cp["experiment"] if "experiment" in cp else {}
        level = cp["level"] if "level" in cp else {}
        tails = cp["tails"] if "tails" in cp else {}
        coupling = cp["coupling"] if "coupling" in cp else {}
        mtc_sec = cp["mtc"] if "mtc" in cp else {}
        ptab = cp["paper-table"] if "paper-table" in cp else {}
        vsec = cp["validate"] if "validate" in cp else {}

        pair = None
        if tails.get("pair"):
            i1, i2 = (int(tok) for tok in tails["pair"].split(","))
            pair = (i1, i2)
        p_list = tuple(
            int(tok) for tok in ptab.get("p_list", "10000, 100000, 1000000").split(",")
        )
        cfg = cls(
            kind=exp.get("kind", "calibrate"),
            panel=panel,
            level_policy=level.get("policy", "eta"),
            eta=float(level.get("eta", 0.05)),
            level_t=float(level["t"]) if level.get("t") else None,
            rho_max_override=float(level["rho_max"]) if level.get("rho_max") else None,
            loglog_coeff=float(level.get("loglog_coeff", 3.0)),
            reps=int(exp.get("reps", 1000)),
            jobs=int(exp.get("jobs", 0)),
            out=exp.get("out") or None,
            fmt=exp.get("format", "csv"),
            s_level=float(level["s"]) if level.get("s") else None,
            row=int(tails.get("row", 1)),
            pair=pair,
            block_ell=int(level["ell"]) if level.get("ell") else None,
            se_cap=float(coupling.get("se_cap", 0.02)),
            match_draws=int(coupling.get("match_draws", 100_000)),
            bh_q=float(mtc_sec.get("bh_q", 0.1)),
            fwer_a=float(mtc_sec.get("fwer_a", 0.05)),
            p_list=p_list,
            p0=int(ptab.get("p0", 1_000_000)),
            logp_n_ratio_max=float(vsec.get("logp_n_ratio_max", 0.5)),
        )
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_text(fh.read())


def _effective_rho_max(cfg: ExperimentConfig) -> float:
    if cfg.rho_max_override is not None:
        return cfg.rho_max_override
    return cfg.panel.model.rho_max


def resolve_level(cfg: ExperimentConfig) -> tuple[float, float, float]:
    """The operative levels of a run: (t-level, R-level, gamma).

    gamma comes from the maximal pairwise correlation (the model's, or an
    explicit override); the t-level from the level policy; the R-level is
    the exact level map of the t-level unless ``s_level`` overrides it.
    """
    gamma = dependence_summary(_effective_rho_max(cfg)).gamma
    if cfg.level_policy == "explicit":
        t = float(cfg.level_t)
    elif cfg.level_policy == "ma-refined":
        t = threshold_regime(
            cfg.panel.p, cfg.eta, gamma, variant="moving-average",
            loglog_coeff=cfg.loglog_coeff,
        ).t_refined
    else:
        t = threshold_regime(cfg.panel.p, cfg.eta, gamma).t_min
    s = cfg.s_level if cfg.s_level is not None else stu.t_level_to_r_level(t, cfg.panel.n)
    return t, float(s), gamma


def validate_config(cfg: ExperimentConfig) -> list[str]:
    """Soft regime diagnostics (run() separately enforces the hard errors).

    Checks every proxy it can: the log p = o(n) regime (warn when
    log(p)/n exceeds the configured ratio), kappa <= log p for the
    moving-average generalization, correlation and weight constraints.
    """
    notes: list[str] = []
    try:
        cfg.validate()
    except (ValueError, pg.SpecError) as exc:
        notes.append(f"error: {exc}")
        return notes
    p, n = cfg.panel.p, cfg.panel.n
    ratio = math.log(p) / n
    if ratio > cfg.logp_n_ratio_max:
        notes.append(
            f"warning: log(p)/n = {ratio:.3g} exceeds {cfg.logp_n_ratio_max:g}; "
            "the sample-size regime (log p small against n) is violated"
        )
    model = cfg.panel.model
    if model.kind == "moving-average" and model.kappa > math.log(p):
        notes.append(
            f"warning: kappa = {model.kappa} exceeds log(p) = {math.log(p):.3g}; "
            "the moving-average window outgrows the admissible range"
        )
    if n < 2:
        notes.append("warning: group size below 2 cannot be studentized")
    return notes


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _fmt_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_table(path: Path, schema: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {schema}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt_cell(v) for v in row) + "\n")


def _write_json_table(path: Path, schema: str, header: list[str], rows: list[list]) -> None:
    payload = {
        "schema_version": schema,
        "rows": [dict(zip(header, [_json_cell(v) for v in row])) for row in rows],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _json_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    return v


def _emit(cfg: ExperimentConfig, out: Path, name: str, schema: str,
          header: list[str], rows: list[list]) -> Path:
    if cfg.fmt == "json":
        path = out / f"{name}.json"
        _write_json_table(path, schema, header, rows)
    else:
        path = out / f"{name}.csv"
        _write_table(path, schema, header, rows)
    return path


def _write_summary(out: Path, name: str, summary: dict) -> Path:
    path = out / f"{name}_summary.json"
    with open(path, "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return path


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Replicated experiment workers (top level: must pickle for worker pools)
# ---------------------------------------------------------------------------


def _chunks(reps: int, jobs: int) -> list[tuple[int, int]]:
    bounds = [i * reps // jobs for i in range(jobs + 1)]
    return [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _run_chunked(cfg: ExperimentConfig, worker, jobs: int) -> list:
    spans = _chunks(cfg.reps, max(1, jobs))
    if len(spans) <= 1 or jobs <= 1:
        return worker(cfg, 0, cfg.reps)
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(processes=jobs) as pool:
        parts = pool.starmap(worker, [(cfg, a, b) for a, b in spans])
    records: list = []
    for part in parts:
        records.extend(part)
    return records


def _block_scheme_for(cfg: ExperimentConfig, r_level: float) -> xc.BlockScheme:
    if cfg.block_ell is not None:
        return xc.block_scheme(cfg.panel.p, cfg.panel.model.kappa, ell=cfg.block_ell)
    return xc.block_scheme(cfg.panel.p, cfg.panel.model.kappa, s=r_level)


def _cluster_worker(cfg: ExperimentConfig, start: int, stop: int) -> list[tuple]:
    t_level, r_level, _ = resolve_level(cfg)
    kappa = cfg.panel.model.kappa
    scheme = _block_scheme_for(cfg, r_level)
    records = []
    for rep in range(start, stop):
        panel = pg.generate(cfg.panel.with_replicate(rep))
        rows = stu.studentize_panel(panel)
        exc = xc.extract(rows.t, t_level)
        cs = xc.cluster_stats(exc, scheme)
        within = cs.total >= 2 and 0 < cs.min_gap <= kappa
        records.append(
            (rep, *cs.to_csv_row(), int(cs.total >= 1), int(within))
        )
    return records


def _mtc_worker(cfg: ExperimentConfig, start: int, stop: int) -> list[tuple]:
    t_level, _, gamma = resolve_level(cfg)
    marginal = mtc.StudentTMarginal(cfg.panel.n - 1)
    nonnull = cfg.panel.nonnull_rows()
    records = []
    for rep in range(start, stop):
        panel = pg.generate(cfg.panel.with_replicate(rep))
        rows = stu.studentize_panel(panel)
        pv = mtc.one_sided_p_values(rows, marginal)
        reports = (
            mtc.bh_fdr(pv, cfg.bh_q, nonnull=nonnull),
            mtc.stepdown_fwer(pv, cfg.fwer_a, nonnull=nonnull),
            mtc.single_threshold(rows.t, t_level, nonnull=nonnull, gamma=gamma),
        )
        for rpt in reports:
            records.append(
                (
                    rep, rpt.kind, rpt.nominal, rpt.rejected.size,
                    rpt.false_rejections, rpt.fdp,
                )
            )
    return records


# ---------------------------------------------------------------------------
# Experiment implementations
# ---------------------------------------------------------------------------


def _experiment_calibrate(cfg: ExperimentConfig, out: Path) -> tuple[list[Path], dict]:
    t_level, r_level, gamma = resolve_level(cfg)
    summary_dep = dependence_summary(_effective_rho_max(cfg))
    p, n = cfg.panel.p, cfg.panel.n
    q_single = float(student_t_sf(t_level, n - 1))
    phi = phi_bound(t_level, p, gamma).phi_nominal
    p_any = any_exceedence_prob(p, q_single)
    header = ["p", "n", "rho_max", "alpha", "gamma", "eta", "t_min", "t_refined",
              "r_level", "q_single_t", "p_any_independent", "phi_nominal"]
    regime = threshold_regime(
        p, cfg.eta, gamma,
        variant="moving-average" if cfg.panel.model.kind == "moving-average" else "plain",
        loglog_coeff=cfg.loglog_coeff,
    )
    rows = [[
        p, n, summary_dep.rho_max, summary_dep.alpha, summary_dep.gamma, cfg.eta,
        regime.t_min, regime.t_refined if regime.t_refined is not None else "",
        r_level, q_single, p_any, phi,
    ]]
    table = _emit(cfg, out, "calibrate", "exceedlab.calibrate.v1", header, rows)
    summary = {
        "schema_version": "exceedlab.calibrate.v1",
        "alpha": summary_dep.alpha,
        "gamma": summary_dep.gamma,
        "rho_max": summary_dep.rho_max,
        "eta": cfg.eta,
        "t_min": regime.t_min,
        "t_refined": regime.t_refined,
        "t_level": t_level,
        "r_level": r_level,
        "q_single_t": q_single,
        "p_any_independent": p_any,
        "phi_nominal": phi,
    }
    return [table], summary


def _experiment_paper_table(cfg: ExperimentConfig, out: Path) -> tuple[list[Path], dict]:
    n = cfg.panel.n
    # Default calibration for this table is the empirically motivated
    # rho_max = 0.1 (gamma = 1.225) unless explicitly overridden.
    rho_max = cfg.rho_max_override if cfg.rho_max_override is not None else 0.1
    gamma = dependence_summary(rho_max).gamma
    q0 = 1.0 / cfg.p0
    t = student_t_quantile(1.0 - q0, n - 1)
    header = ["p", "t", "q_single", "p_any_exceedence", "phi_nominal", "ratio"]
    rows = []
    for p in cfg.p_list:
        p_any = any_exceedence_prob(p, q0)
        phi = phi_bound(t, p, gamma).phi_nominal
        rows.append([p, t, q0, p_any, phi, phi / p_any])
    table = _emit(cfg, out, "paper_table", "exceedlab.paper-table.v1", header, rows)
    summary = {
        "schema_version": "exceedlab.paper-table.v1",
        "n": n,
        "gamma": gamma,
        "t": t,
        "rows": [dict(zip(header, [_json_cell(v) for v in row])) for row in rows],
        "note": (
            "ratio = phi_nominal / P(any exceedence); the nominal shape sets "
            "the unknowable exp(o(t^2)) prefactor to 1, so ratios are "
            "indicative upper shapes, not certified bounds (at the largest "
            "test count the computed ratio is on the order of tens of "
            "percent; quoted sub-percent figures are not reproducible from "
            "the nominal shape)"
        ),
    }
    return [table], summary


def _experiment_tails(cfg: ExperimentConfig, out: Path) -> tuple[list[Path], dict]:
    _, s, gamma = resolve_level(cfg)
    header = ["kind", "i1", "i2", "lag", "rho_lag", "s", "estimate", "se",
              "wilson_low", "wilson_high", "hits", "reps", "exponent", "method",
              "reference"]
    rows = []
    single = xc.tail_probability_single(cfg.panel, s, cfg.reps, i=cfg.row)
    ref_single = ""
    if cfg.panel.law.is_gaussian and s * s < cfg.panel.n:
        t_eq = stu.r_level_to_t_level(s, cfg.panel.n)
        ref_single = float(
            mtc.StudentizedNormalMarginal(cfg.panel.n).sf(t_eq)
        )
    rows.append(["single", cfg.row, "", 0, "", s, single.estimate, single.se,
                 single.wilson_low, single.wilson_high, single.hits, single.reps,
                 single.exponent, single.method, ref_single])
    pair_est = None
    if cfg.pair is not None:
        i1, i2 = cfg.pair
        pair_est = xc.tail_probability_pair(cfg.panel, i1, i2, s, cfg.reps)
        ref_pair = bivariate_normal_tail(s, min(pair_est.rho_lag, 0.999))
        rows.append(["pair", i1, i2, pair_est.lag, pair_est.rho_lag, s,
                     pair_est.estimate, pair_est.se, pair_est.wilson_low,
                     pair_est.wilson_high, pair_est.hits, pair_est.reps,
                     pair_est.exponent, pair_est.method, ref_pair])
    table = _emit(cfg, out, "tails", "exceedlab.tails.v1", header, rows)
    summary = {
        "schema_version": "exceedlab.tails.v1",
        "s": s,
        "gamma": gamma,
        "single": {
            "estimate": single.estimate, "se": single.se,
            "exponent": single.exponent, "hits": single.hits,
        },
    }
    if pair_est is not None:
        summary["pair"] = {
            "estimate": pair_est.estimate, "se": pair_est.se,
            "exponent": pair_est.exponent, "lag": pair_est.lag,
            "rho_lag": pair_est.rho_lag, "hits": pair_est.hits,
        }
    return [table], summary


def _experiment_coupling(cfg: ExperimentConfig, out: Path) -> tuple[list[Path], dict]:
    _, s, _ = resolve_level(cfg)
    scheme = _block_scheme_for(cfg, s)
    est = xc.coupling_estimate(
        cfg.panel, scheme, s, cfg.reps,
        se_cap=cfg.se_cap, match_draws=cfg.match_draws,
    )
    header = ["block", "pi_dependent", "se_dependent", "pi_independent",
              "se_independent", "abs_gap"]
    rows = [
        [j + 1, est.pi[j], est.se_pi[j], est.pi_prime[j], est.se_pi_prime[j],
         abs(est.pi[j] - est.pi_prime[j])]
        for j in range(est.pi.shape[0])
    ]
    table = _emit(cfg, out, "coupling", "exceedlab.coupling.v1", header, rows)
    summary = est.to_json_dict()
    summary["ell"] = scheme.ell
    summary["m"] = scheme.m
    return [table], summary


def _experiment_cluster(cfg: ExperimentConfig, out: Path, jobs: int) -> tuple[list[Path], dict]:
    t_level, r_level, gamma = resolve_level(cfg)
    records = _run_chunked(cfg, _cluster_worker, jobs)
    records.sort(key=lambda rec: rec[0])
    header = ["replicate", *xc.ClusterStats.CSV_FIELDS, "any_exceedance",
              "within_kappa_cluster"]
    table = _emit(cfg, out, "cluster", "exceedlab.cluster.v1", header, records)

    reps = cfg.reps
    any_hits = sum(rec[9] for rec in records)
    within_hits = sum(rec[10] for rec in records)
    f_holds = sum(rec[8] for rec in records)
    counts: dict[str, int] = {}
    for rec in records:
        counts[str(rec[1])] = counts.get(str(rec[1]), 0) + 1
    n = cfg.panel.n
    q_exact = None
    if cfg.panel.law.is_gaussian:
        q_exact = float(mtc.StudentizedNormalMarginal(n).sf(t_level))
    q_t = float(student_t_sf(t_level, n - 1))
    phi = phi_bound(t_level, cfg.panel.p, gamma).phi_nominal
    summary = {
        "schema_version": "exceedlab.cluster.v1",
        "replicates": reps,
        "t_level": t_level,
        "r_level": r_level,
        "gamma": gamma,
        "phi_nominal": phi,
        "q_single_exact_normal": q_exact,
        "q_single_t_approx": q_t,
        "p_any_empirical": math.fsum([rec[9] for rec in records]) / reps,
        "p_any_wilson": list(xc.wilson_interval(any_hits, reps)),
        "p_any_independent_ref": any_exceedence_prob(
            cfg.panel.p, q_exact if q_exact is not None else q_t
        ),
        "within_kappa_cluster_fraction": within_hits / reps,
        "event_f_fraction": f_holds / reps,
        "count_histogram": counts,
    }
    return [table], summary


def _experiment_mtc(cfg: ExperimentConfig, out: Path, jobs: int) -> tuple[list[Path], dict]:
    t_level, _, gamma = resolve_level(cfg)
    records = _run_chunked(cfg, _mtc_worker, jobs)
    records.sort(key=lambda rec: (rec[0], rec[1]))
    header = ["replicate", "procedure", "nominal", "rejections",
              "false_rejections", "fdp"]
    table = _emit(cfg, out, "mtc", "exceedlab.mtc.v1", header, records)

    marginal = mtc.StudentTMarginal(cfg.panel.n - 1)
    summary: dict = {
        "schema_version": "exceedlab.mtc.v1",
        "replicates": cfg.reps,
        "t_level": t_level,
        "gamma": gamma,
        "procedures": {},
    }
    for kind in ("bh", "stepdown-fwer", "single-threshold"):
        rows_k = [rec for rec in records if rec[1] == kind]
        if not rows_k:
            continue
        reps = len(rows_k)
        fwer_hits = sum(1 for rec in rows_k if rec[4] > 0)
        fdps = [rec[5] for rec in rows_k]
        # operative level: the first-rejection p-value threshold of the
        # procedure, mapped back to a t-level for the phi shape
        if kind == "bh":
            t_op = marginal.upper_quantile(cfg.bh_q / cfg.panel.p)
        elif kind == "stepdown-fwer":
            u1 = -math.expm1(math.log1p(-cfg.fwer_a) / cfg.panel.p)
            t_op = marginal.upper_quantile(u1)
        else:
            t_op = t_level
        summary["procedures"][kind] = {
            "nominal": rows_k[0][2],
            "fwer": fwer_hits / reps,
            "fwer_wilson": list(xc.wilson_interval(fwer_hits, reps)),
            "fdr": math.fsum(fdps) / reps,
            "fdr_se": float(np.std(fdps, ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0,
            "mean_rejections": math.fsum(rec[3] for rec in rows_k) / reps,
            "phi_nominal_at_operative": phi_bound(
                t_op, cfg.panel.p, gamma
            ).phi_nominal if t_op > 0 else None,
        }
    return [table], summary


# ---------------------------------------------------------------------------
# Manifest and runner
# ---------------------------------------------------------------------------


@dataclass
class RunManifest:
    """Recorded provenance of one run; see module docstring for scope."""

    kind: str
    seed: int
    code_version: str
    config_text: str
    wall_clock_s: float
    timings: dict
    outputs: list[dict]
    schema_version: str = "exceedlab.manifest.v1"

    def to_json_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "kind": self.kind,
            "seed": self.seed,
            "code_version": self.code_version,
            "config": self.config_text,
            "wall_clock_s": self.wall_clock_s,
            "timings": self.timings,
            "outputs": self.outputs,
        }


def run(cfg: ExperimentConfig, out_dir=None) -> RunManifest:
    """Execute the configured experiment and write outputs plus manifest.

    ``out_dir`` overrides ``cfg.out``; one of them must be set.  Returns
    the manifest (also written as ``manifest.json`` in the output
    directory).
    """
    cfg.validate()
    out = Path(out_dir if out_dir is not None else (cfg.out or "."))
    out.mkdir(parents=True, exist_ok=True)
    jobs = cfg.jobs if cfg.jobs > 0 else default_jobs()

    t_start = time.perf_counter()
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    if cfg.kind == "calibrate":
        tables, summary = _experiment_calibrate(cfg, out)
    elif cfg.kind == "paper-table":
        tables, summary = _experiment_paper_table(cfg, out)
    elif cfg.kind == "tails":
        tables, summary = _experiment_tails(cfg, out)
    elif cfg.kind == "coupling":
        tables, summary = _experiment_coupling(cfg, out)
    elif cfg.kind == "cluster":
        tables, summary = _experiment_cluster(cfg, out, jobs)
    else:
        tables, summary = _experiment_mtc(cfg, out, jobs)
    timings["experiment_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    name = cfg.kind.replace("-", "_")
    summary_path = _write_summary(out, name, summary)
    outputs = []
    for path in [*tables, summary_path]:
        outputs.append({"path": path.name, "sha256": _sha256(path)})
    timings["write_s"] = time.perf_counter() - t0

    manifest = RunManifest(
        kind=cfg.kind,
        seed=cfg.panel.seed,
        code_version=_CODE_VERSION,
        config_text=replace(cfg, out=None, jobs=0).to_text(),
        wall_clock_s=time.perf_counter() - t_start,
        timings=timings,
        outputs=outputs,
    )
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest.to_json_dict(), fh, sort_keys=True, indent=1)
        fh.write("\n")
    return manifest


def load_manifest(path) -> RunManifest:
    with open(path) as fh:
        raw = json.load(fh)
    if raw.get("schema_version") != "exceedlab.manifest.v1":
        raise ValueError(f"{path}: unsupported manifest schema")
    return RunManifest(
        kind=raw["kind"],
        seed=raw["seed"],
        code_version=raw["code_version"],
        config_text=raw["config"],
        wall_clock_s=raw["wall_clock_s"],
        timings=raw["timings"],
        outputs=raw["outputs"],
    )


def replay(manifest_path, work_dir=None, jobs: int | None = None) -> tuple[bool, list[str]]:
    """Re-run a manifest's config and verify the recorded output digests.

    Returns (ok, per-file report lines).  The rerun happens in
    ``work_dir`` (a temporary sibling directory by default); parallelism
    may differ from the original run, the outputs may not.
    """
    manifest_path = Path(manifest_path)
    manifest = load_manifest(manifest_path)
    cfg = ExperimentConfig.from_text(manifest.config_text)
    if jobs is not None:
        cfg.jobs = jobs
    if work_dir is None:
        work_dir = manifest_path.parent / "_replay"
    fresh = run(cfg, out_dir=work_dir)
    recorded = {entry["path"]: entry["sha256"] for entry in manifest.outputs}
    produced = {entry["path"]: entry["sha256"] for entry in fresh.outputs}
    report = []
    ok = True
    for name, digest in sorted(recorded.items()):
        new = produced.get(name)
        if new is None:
            ok = False
            report.append(f"MISSING {name}")
        elif new != digest:
            ok = False
            report.append(f"MISMATCH {name}: recorded {digest[:12]} got {new[:12]}")
        else:
            report.append(f"OK {name}")
    for name in sorted(set(produced) - set(recorded)):
        report.append(f"EXTRA {name}")
    return ok, report
