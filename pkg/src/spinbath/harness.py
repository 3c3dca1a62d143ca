"""Experiment orchestration: configs, the full relaxation pipeline, outputs.

One run samples a coupling table, prepares the initial state, steps the
composite state forward in sample intervals of tau = pi/10, and records the
reduced-density-matrix diagnostics at every sample.  Outputs are a
manifest (JSON, enough to reconstruct the model bit-exactly), the
diagnostic time series (CSV) and a one-row summary (CSV).
"""

from __future__ import annotations

import json
import math
import os
import time
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import set_thread_cap
from .errors import ConfigError
from .hamiltonian import CouplingTable, Part, operator_for, sample_couplings
from .hilbert import StateVector
from .propagator import ChebyshevPlan, _chebyshev_apply, spectral_bounds
from .rdm import (
    DiagnosticRecord,
    SystemEigensystem,
    canonical_average,
    coherence_sigma,
    delta_to_canonical,
    effective_beta,
    eigenvalue_variance,
    entropy,
    format_float,
    rdm_spectrum,
    reduce_to_system,
    schwarz_check,
    to_system_eigenbasis,
    trace_distance,
    write_series,
)
from .typicality import RandomStateSpec, initial_state

#: sample interval of the time series
TAU = math.pi / 10.0

_MODES = ("reproducible", "fast")


@dataclass
class RunConfig:
    """Everything needed to reproduce one simulation run."""

    n_s: int = 4
    n_e: int = 12
    j: float = -0.5
    delta_bound: float = 0.2
    omega_bound: float = 0.5
    beta: float | None = 1.0  # None for non-thermal initial states
    init: str = "env_thermal_product"
    system_init: object = "neel"
    t_f_over_tau: int = 190
    sample_every: int = 1
    seed: int = 2026
    mode: str = "reproducible"
    dis_dt_over_tau: int | None = None
    early_stop_drift: float | None = None  # extension, see docs
    replicas: int = 1
    outputs: str | None = None

    def __post_init__(self):
        if self.t_f_over_tau < 1:
            raise ConfigError(f"t_f_over_tau must be >= 1, got {self.t_f_over_tau}")
        if self.sample_every < 1:
            raise ConfigError(f"sample_every must be >= 1, got {self.sample_every}")
        if self.mode not in _MODES:
            raise ConfigError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        for name in ("j", "delta_bound", "omega_bound"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if self.beta is not None and self.beta != math.inf:
            if not math.isfinite(self.beta) or self.beta < 0:
                raise ConfigError(f"beta must be >= 0 or 'inf', got {self.beta}")
        if self.dis_dt_over_tau is not None:
            if self.dis_dt_over_tau < 0:
                raise ConfigError("dis_dt_over_tau must be >= 0")
            if self.dis_dt_over_tau > self.t_f_over_tau:
                raise ConfigError(
                    f"dis_dt_over_tau={self.dis_dt_over_tau} exceeds "
                    f"t_f_over_tau={self.t_f_over_tau}")
            if self.dis_dt_over_tau % self.sample_every:
                raise ConfigError(
                    "dis_dt_over_tau must be a multiple of sample_every")
        self.state_spec()  # validates init kind / beta combination

    def state_spec(self, state_seed: int | None = None) -> RandomStateSpec:
        thermal = self.init in ("env_thermal_product", "composite_thermal")
        return RandomStateSpec(
            kind=self.init,
            seed=self.seed if state_seed is None else state_seed,
            beta=self.beta if thermal else None,
            system_init=self.system_init,
        )

    def to_dict(self) -> dict:
        doc = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "beta" and v == math.inf:
                v = "inf"
            doc[f.name] = v
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        doc = dict(doc)
        if doc.get("beta") == "inf":
            doc["beta"] = math.inf
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json_file(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(doc)

    def child_seeds(self) -> tuple[int, int, int]:
        """(couplings, state, lanczos) streams split from the master seed."""
        kids = np.random.SeedSequence(self.seed).spawn(3)
        return tuple(int(k.generate_state(1)[0]) for k in kids)


@dataclass
class SummaryRow:
    """Last-sample summary in the schema of the published tables."""

    beta: float | None
    b: float
    sigma: float
    delta: float
    s_b: float
    s_rho: float
    e_b: float
    e_rho: float
    s_beta: float | None = None
    e_beta: float | None = None

    def header(self) -> list[str]:
        cols = ["beta", "b", "sigma", "delta", "s_b", "s_rho", "e_b", "e_rho"]
        if self.s_beta is not None:
            cols += ["s_beta", "e_beta"]
        return cols

    def values(self) -> list[str]:
        def fmt(x):
            if x is None:
                return ""
            if x == math.inf:
                return "inf"
            return format_float(float(x))

        vals = [fmt(self.beta), fmt(self.b), fmt(self.sigma), fmt(self.delta),
                fmt(self.s_b), fmt(self.s_rho), fmt(self.e_b), fmt(self.e_rho)]
        if self.s_beta is not None:
            vals += [fmt(self.s_beta), fmt(self.e_beta)]
        return vals

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(",".join(self.header()) + "\n")
            fh.write(",".join(self.values()) + "\n")


@dataclass
class RunResult:
    config: RunConfig
    table: CouplingTable
    eigensystem: SystemEigensystem
    records: list
    snapshots: list = field(repr=False)  # spin-basis RDM per sample
    summary: SummaryRow | None
    manifest: dict
    out_dir: Path | None


def _apply_thread_cap():
    cap = os.environ.get("SPINBATH_THREADS")
    if cap:
        try:
            set_thread_cap(int(cap))
        except ValueError:
            raise ConfigError(f"SPINBATH_THREADS={cap!r} is not an integer")


def relaxation_time(records, frac: float = 0.1) -> float:
    """Entry time (in tau units) into the terminal band of var(t).

    Returns the last sample time at which var exceeded ``frac`` times its
    first post-initial value; 0.0 if it never did.
    """
    if len(records) < 3:
        return math.nan
    threshold = frac * records[1].var
    t_relax = 0.0
    for r in records:
        if r.var > threshold:
            t_relax = r.t_over_tau
    return t_relax


def run(config: RunConfig, out_dir=None) -> RunResult:
    """Execute the full pipeline for one configuration.

    Writes manifest.json, series.csv and summary.csv into ``out_dir`` when
    given; on an exception mid-run the partial series is flushed and the
    manifest is marked incomplete before the error propagates.
    """
    _apply_thread_cap()
    t_start = time.perf_counter()
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    seed_couplings, seed_state, seed_lanczos = config.child_seeds()
    table = sample_couplings(config.n_s, config.n_e, config.j,
                             config.delta_bound, config.omega_bound,
                             seed_couplings)
    es = SystemEigensystem.from_table(table)
    window = spectral_bounds(table, Part.TOTAL, seed=seed_lanczos)
    spec = config.state_spec(seed_state)
    psi = initial_state(spec, table)

    step_tau = config.sample_every
    plan = ChebyshevPlan.real_time(window, step_tau * TAU)
    n_steps = config.t_f_over_tau // config.sample_every
    ops = {p: operator_for(table, p) for p in
           (Part.SYSTEM, Part.ENVIRONMENT, Part.INTERACTION)}
    op_total = operator_for(table, Part.TOTAL)

    manifest = {
        "package_version": __version__,
        "config": config.to_dict(),
        "couplings": {
            "seed": seed_couplings,
            "sha256": table.sha256(),
            "state_seed": seed_state,
            "lanczos_seed": seed_lanczos,
        },
        "initial_state": spec.to_dict(),
        "state_basis": "spin_product",
        "window": {"e_min": window.e_min, "e_max": window.e_max,
                   "safety": window.safety, "lo": window.lo, "hi": window.hi},
        "chebyshev": {"n_terms": plan.n_terms, "step_over_tau": step_tau},
        "incomplete": False,
    }

    records: list[DiagnosticRecord] = []
    snapshots = []
    spectra_t = []
    norm_max_dev = 0.0
    e_tot0 = None
    energy_drift = 0.0
    b_pairs_excluded = 0
    early_stopped = False

    def sample(t_over_tau: float, psi: StateVector):
        nonlocal norm_max_dev, e_tot0, energy_drift, b_pairs_excluded
        nrm = psi.norm()
        norm_max_dev = max(norm_max_dev, abs(nrm - 1.0))
        rho = reduce_to_system(psi)
        rho.validate()
        rho_eig = to_system_eigenbasis(rho, es)
        lam = rdm_spectrum(rho)
        diag = rho_eig.diagonal()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            b, _, excluded = effective_beta(diag, es, details=True)
        b_pairs_excluded += excluded
        delta = delta_to_canonical(diag, es, b) if math.isfinite(b) else math.nan
        if math.isfinite(b):
            schwarz_check(diag, es, b)
        e_sys = ops[Part.SYSTEM].expectation(psi.data)
        e_env = ops[Part.ENVIRONMENT].expectation(psi.data)
        e_int = ops[Part.INTERACTION].expectation(psi.data)
        e_tot = e_sys + e_env + e_int
        if e_tot0 is None:
            e_tot0 = e_tot
        energy_drift = max(energy_drift, abs(e_tot - e_tot0))
        records.append(DiagnosticRecord(
            t_over_tau=t_over_tau, var=math.nan, entropy=entropy(lam),
            sigma=coherence_sigma(rho_eig), delta=delta, b=b,
            e_sys=e_sys, e_env=e_env, e_int=e_int, rdm_eigenvalues=lam))
        snapshots.append(rho.matrix)
        spectra_t.append(lam)

    def finalize(incomplete: bool, error: str | None = None) -> SummaryRow | None:
        if spectra_t:
            ref = spectra_t[-1]
            for r, lam in zip(records, spectra_t):
                r.var = eigenvalue_variance(lam, ref)
        summary = None
        if records and not incomplete:
            summary = _summary_from_records(config, es, records)
        manifest["telemetry"] = {
            "wall_time_s": time.perf_counter() - t_start,
            "norm_max_deviation": norm_max_dev,
            "energy_drift_max": energy_drift,
            "b_pairs_excluded_total": b_pairs_excluded,
            "samples": len(records),
            "effective_t_f_over_tau": records[-1].t_over_tau if records else 0,
            "early_stopped": early_stopped,
        }
        manifest["incomplete"] = incomplete
        if error:
            manifest["error"] = error
        if out_dir is not None and records:
            write_series(records, out_dir / "series.csv")
            with open(out_dir / "manifest.json", "w") as fh:
                json.dump(manifest, fh, indent=2)
            if summary is not None:
                summary.write_csv(out_dir / "summary.csv")
            if (config.dis_dt_over_tau is not None) and not incomplete:
                dis_series(result_snapshots=snapshots, records=records,
                           dt_over_tau=config.dis_dt_over_tau,
                           sample_every=config.sample_every,
                           path=out_dir / "dis.csv")
        return summary

    try:
        sample(0.0, psi)
        for k in range(1, n_steps + 1):
            data = _chebyshev_apply(op_total, plan, psi.data)
            psi = StateVector(data, psi.layout)
            sample(float(k * config.sample_every), psi)
            if config.early_stop_drift is not None and len(spectra_t) >= 21:
                drift = max(eigenvalue_variance(lam, spectra_t[-1])
                            for lam in spectra_t[-21:-1])
                if drift < config.early_stop_drift:
                    early_stopped = True
                    break
    except Exception as exc:
        finalize(incomplete=True, error=f"{type(exc).__name__}: {exc}")
        raise

    summary = finalize(incomplete=False)
    return RunResult(config, table, es, records, snapshots, summary,
                     manifest, out_dir)


def _summary_from_records(config: RunConfig, es: SystemEigensystem,
                          records) -> SummaryRow:
    last = records[-1]
    b = last.b
    s_rho = last.entropy
    e_rho = last.e_sys
    s_b = canonical_average(es, b, "entropy") if math.isfinite(b) else math.nan
    e_b = canonical_average(es, b, "energy") if math.isfinite(b) else math.nan
    row = SummaryRow(beta=config.beta, b=b, sigma=last.sigma, delta=last.delta,
                     s_b=s_b, s_rho=s_rho, e_b=e_b, e_rho=e_rho)
    if config.init == "composite_thermal":
        row.s_beta = canonical_average(es, config.beta, "entropy")
        row.e_beta = canonical_average(es, config.beta, "energy")
    return row


def dis_series(result: RunResult | None = None, dt_over_tau: int = 1000,
               path=None, result_snapshots=None, records=None,
               sample_every=None):
    """Trace distance dis(t, dt) between RDM snapshots dt apart.

    Operates on a finished RunResult (or raw snapshot arrays); ``dt`` must be
    a multiple of the sampling interval and not exceed the series length.
    Returns the list of (t_over_tau, dis) rows and optionally writes them as
    CSV.
    """
    if result is not None:
        result_snapshots = result.snapshots
        records = result.records
        sample_every = result.config.sample_every
    if dt_over_tau < 0:
        raise ConfigError("dt_over_tau must be >= 0")
    if dt_over_tau % sample_every:
        raise ConfigError(
            f"dt_over_tau={dt_over_tau} is not a multiple of the sampling "
            f"interval {sample_every}")
    span = int(records[-1].t_over_tau - records[0].t_over_tau)
    if dt_over_tau > span:
        raise ConfigError(f"dt_over_tau={dt_over_tau} exceeds the series span {span}")
    lag = dt_over_tau // sample_every
    rows = []
    for k in range(len(result_snapshots) - lag):
        d = trace_distance(result_snapshots[k], result_snapshots[k + lag])
        rows.append((records[k].t_over_tau, d))
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write("t_over_tau,dis\n")
            for t, d in rows:
                fh.write(f"{format_float(t)},{format_float(d)}\n")
    return rows


def replica_seed(master_seed: int, replica: int) -> int:
    """Deterministic per-replica master seed (replica 0 keeps the original)."""
    if replica == 0:
        return master_seed
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(replica,))
    return int(ss.generate_state(1)[0])
