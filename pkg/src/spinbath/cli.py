"""Command-line entry point.

Subcommands (all read one JSON config via --config):

* ``run``        full relaxation pipeline -> manifest.json, series.csv, summary.csv
* ``dos``        initial-state-conditional environment DOS -> dos.csv
* ``perturb``    second-order thermal-state expansion -> perturb.json
* ``typicality`` thermal-state estimator statistics -> typicality.json
* ``oracle``     dense cross-checks of the kernels, PASS/FAIL per invariant

Exit codes: 0 success, 2 configuration error, 3 numerical-consistency error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import (
    CapacityError,
    ConfigError,
    NumericalConsistencyError,
    PrecisionLossError,
)
from .hamiltonian import Part, sample_couplings
from .harness import RunConfig, replica_seed, run
from .hilbert import HilbertLayout, StateVector
from .oracles import oracle_suite
from .perturbation import perturbation_report
from .spectra import conditional_dos, environment_spectrum
from .typicality import (
    energy_scaling_study,
    gaussian_unit_vector,
    typicality_report,
)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spinbath", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("run", "solve the composite dynamics and record RDM diagnostics"),
        ("dos", "conditional density of states of the environment"),
        ("perturb", "second-order expansion of the thermal reduced state"),
        ("typicality", "random thermal-state estimator statistics"),
        ("oracle", "dense exact-diagonalization cross-checks"),
    ]:
        q = sub.add_parser(name, help=help_)
        q.add_argument("--config", required=True, help="JSON config file")
        q.add_argument("--seed", type=int, default=None, help="override config seed")
        q.add_argument("--out", default=None, help="output directory")
    return p


def _load(args) -> tuple[RunConfig, Path]:
    config = RunConfig.from_json_file(args.config)
    if args.seed is not None:
        doc = config.to_dict()
        doc["seed"] = args.seed
        config = RunConfig.from_dict(doc)
    out = Path(args.out or config.outputs or "spinbath_out")
    return config, out


def _table_for(config: RunConfig):
    seed_couplings, seed_state, _ = config.child_seeds()
    table = sample_couplings(config.n_s, config.n_e, config.j,
                             config.delta_bound, config.omega_bound,
                             seed_couplings)
    return table, seed_state


def _cmd_run(config: RunConfig, out: Path) -> int:
    for r in range(config.replicas):
        sub = out if config.replicas == 1 else out / f"replica_{r:02d}"
        doc = config.to_dict()
        doc["seed"] = replica_seed(config.seed, r)
        doc["replicas"] = 1
        result = run(RunConfig.from_dict(doc), sub)
        s = result.summary
        print(f"run complete: {sub}  b={s.b:.4g} sigma={s.sigma:.4g} "
              f"delta={s.delta:.4g} S={s.s_rho:.4g}")
    return 0


def _cmd_dos(config: RunConfig, out: Path) -> int:
    if config.beta is None or math.isinf(config.beta):
        raise ConfigError("dos needs a finite beta in the config")
    table, seed_state = _table_for(config)
    spectrum = environment_spectrum(table)
    rng = np.random.default_rng(seed_state)
    d = spectrum.vectors.conj().T @ gaussian_unit_vector(table.layout.d_e, rng)
    amps = d * np.exp(-0.5 * config.beta
                      * (spectrum.energies - spectrum.energies[0]))
    amps /= np.linalg.norm(amps)
    phi_beta = StateVector(spectrum.vectors @ amps, HilbertLayout(config.n_e, 0))
    dos = conditional_dos(spectrum, phi_beta)
    out.mkdir(parents=True, exist_ok=True)
    dos.to_csv(out / "dos.csv")
    print(f"dos written: {out / 'dos.csv'}  mean_energy={dos.mean_energy:.6g}")
    return 0


def _cmd_perturb(config: RunConfig, out: Path) -> int:
    if config.beta is None or math.isinf(config.beta):
        raise ConfigError("perturb needs a finite beta in the config")
    table, _ = _table_for(config)
    report = perturbation_report(table, config.beta)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "perturb.json", "w") as fh:
        fh.write(report.to_json())
    d = report.distances
    print(f"perturb written: {out / 'perturb.json'}  z1={report.z1:.3e} "
          f"z2={report.z2:.6g} dist(pert,exact)={d['pert_vs_exact']:.3e}")
    return 0


def _cmd_typicality(config: RunConfig, out: Path) -> int:
    beta = 0.0 if config.beta is None or math.isinf(config.beta) else config.beta
    table, seed_state = _table_for(config)
    report = typicality_report(table, Part.ENVIRONMENT, "energy", beta,
                               n_samples=50, seed=seed_state)
    doc = report.to_json_dict()
    doc["scaling"] = energy_scaling_study(
        beta=beta if beta > 0 else 1.0, omega_bound=config.omega_bound,
        seed=config.seed).to_json_dict()
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "typicality.json", "w") as fh:
        json.dump(doc, fh, indent=2)
    print(f"typicality written: {out / 'typicality.json'}  "
          f"mean={report.mean:.6g} exact={report.exact:.6g} "
          f"scaling_slope={doc['scaling']['slope']:.3f}")
    return 0


def _cmd_oracle(config: RunConfig, out: Path) -> int:
    table, _ = _table_for(config)
    checks = oracle_suite(table, seed=config.seed)
    worst = 0
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} {c.name}  err={c.error:.3e} tol={c.tol:.1e}")
        if not c.passed:
            worst = 3
    return worst


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        config, out = _load(args)
        cmd = {
            "run": _cmd_run,
            "dos": _cmd_dos,
            "perturb": _cmd_perturb,
            "typicality": _cmd_typicality,
            "oracle": _cmd_oracle,
        }[args.command]
        return cmd(config, out)
    except (ConfigError, CapacityError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalConsistencyError, PrecisionLossError) as exc:
        print(f"numerical-consistency error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
