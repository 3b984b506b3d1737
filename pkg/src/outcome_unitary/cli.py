"""Batch front-end: ``outcome-unitary <verb> --config run.yaml``.

Verbs: feasibility, baseline, noisy, sweep, demo-vonneumann. Records are
written one per line (JSON lines by default, or CSV) in trial order.

Exit codes: 0 all bounds hold, 1 some bound violated (violating trial seeds are
listed on stderr), 2 usage, configuration or output error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from functools import partial
from typing import Iterable

import numpy as np

from . import __version__
from .bounds import BoundReport
from .config import ScenarioConfig, load_config
from .errors import OutcomeUnitaryError
from .feasibility import check_feasibility, spectra_compatible
from .mechanism import (
    apply_mechanism,
    build_perturbed_mechanism,
    definiteness,
    von_neumann_control,
)
from .qcore import dm, sample_state
from .trials import GroupParams, baseline_trial, noisy_trial, trial_seed

__all__ = [
    "SCHEMA_VERSION",
    "WORKERS_ENV",
    "cmd_feasibility",
    "cmd_baseline",
    "cmd_noisy",
    "cmd_sweep",
    "cmd_demo_vonneumann",
    "main",
]

SCHEMA_VERSION = 1
WORKERS_ENV = "OUTCOME_UNITARY_WORKERS"
EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


def _record(cfg: ScenarioConfig, command: str, **fields) -> dict:
    rec = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config_hash": cfg.digest(),
        "version": __version__,
    }
    rec.update(fields)
    return rec


def _report_fields(report: BoundReport) -> dict:
    return {
        "lhs": report.lhs,
        "rhs": report.rhs,
        "slack": report.slack,
        "delta": report.delta_used,
        "eta": report.eta,
        "gamma": report.gamma,
        "tail_weight": report.tail_weight,
        "extrapolation": report.extrapolation,
        "holds": report.holds,
        "failed_steps": [s.label for s in report.steps if not s.holds],
    }


def _run_trial(cfg: ScenarioConfig, command: str, job: tuple) -> dict:
    group, index, params = job
    seed = trial_seed(cfg.seed, group, index)
    start = time.perf_counter()
    if params.noisy:
        report = noisy_trial(cfg, seed, params.delta, params.eta, params.gamma)
    else:
        report = baseline_trial(cfg, seed, params.delta)
    elapsed = time.perf_counter() - start
    return _record(
        cfg, command, group=group, trial=index, seed=seed,
        target_delta=params.delta, target_eta=params.eta, target_gamma=params.gamma,
        **_report_fields(report), wall_time=elapsed,
    )


def _run_groups(cfg: ScenarioConfig, command: str, groups: list[GroupParams],
                workers: int) -> list[dict]:
    jobs = [(g, i, p) for g, p in enumerate(groups) for i in range(cfg.trials)]
    fn = partial(_run_trial, cfg, command)
    if workers <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves submission order
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def cmd_feasibility(cfg: ScenarioConfig, workers: int = 1) -> list[dict]:
    """Smallest dominant rank for the configured environment and its fit."""
    if cfg.spectrum is not None:
        rho_E = np.diag(np.asarray(cfg.spectrum, dtype=complex))
    else:
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0, 0]))
        rho_E = sample_state(cfg.d_E, cfg.env_rank or cfg.d_E, rng)
    fact = cfg.scenario().fact
    report = check_feasibility(rho_E, fact, cfg.epsilon_max)
    fields = report.as_dict()
    if report.dimension_ok:
        # a unitary evolution must leave the joint spectrum unchanged
        sc = replace(cfg, D=report.D).scenario()
        U = build_perturbed_mechanism(sc, cfg.delta)
        rho_S = np.eye(cfg.d_S, dtype=complex) / cfg.d_S
        out = apply_mechanism(U, rho_S, rho_E, sc)
        fields["spectra_compatible"] = spectra_compatible(
            sc.initial_state(rho_S, rho_E), out.rho_SAE, 1e-9
        )
    return [_record(cfg, "feasibility", seed=cfg.seed, holds=True, **fields, wall_time=0.0)]


def cmd_baseline(cfg: ScenarioConfig, workers: int = 1) -> list[dict]:
    return _run_groups(cfg, "baseline", [GroupParams(cfg.delta)], workers)


def cmd_noisy(cfg: ScenarioConfig, workers: int = 1) -> list[dict]:
    ens = cfg.ensemble
    params = GroupParams(cfg.delta, ens.environment_scale, ens.mechanism_scale, noisy=True)
    return _run_groups(cfg, "noisy", [params], workers)


def cmd_sweep(cfg: ScenarioConfig, workers: int = 1) -> list[dict]:
    """One record group per point of the delta x eta x gamma grid.

    Without eta or gamma grids the groups run the baseline bound; otherwise
    each group runs the noise-included bound.
    """
    sw = cfg.sweep
    noisy = bool(sw.eta or sw.gamma)
    deltas = sw.delta or (cfg.delta,)
    etas = sw.eta or (cfg.ensemble.environment_scale,)
    gammas = sw.gamma or (cfg.ensemble.mechanism_scale,)
    groups = [
        GroupParams(d, e, g, noisy=noisy) if noisy else GroupParams(d)
        for d, e, g in itertools.product(deltas, etas if noisy else (0.0,),
                                         gammas if noisy else (0.0,))
    ]
    return _run_groups(cfg, "sweep", groups, workers)


def cmd_demo_vonneumann(cfg: ScenarioConfig, workers: int = 1) -> list[dict]:
    """Shared coupling versus an outcome-conditioned mechanism on one superposed input."""
    sc = cfg.scenario()
    if cfg.amplitudes is not None:
        amps = np.asarray(cfg.amplitudes, dtype=complex)
    else:
        amps = np.zeros(cfg.d_S, dtype=complex)
        amps[: min(2, cfg.d_S)] = 1.0
    amps = amps / np.linalg.norm(amps)
    psi = sc.observable_basis @ amps
    _, vn_def = von_neumann_control(sc, psi)
    U = build_perturbed_mechanism(sc, cfg.delta)
    out = apply_mechanism(U, dm(psi), dm(sc.e(0)), sc)
    mech_def = definiteness(out.rho_A, sc)
    holds = mech_def >= 1.0 - U.delta_target - 1e-9
    return [
        _record(
            cfg, "demo-vonneumann", seed=cfg.seed,
            von_neumann_definiteness=vn_def,
            mechanism_definiteness=mech_def,
            delta=U.delta_target, holds=bool(holds), wall_time=0.0,
        )
    ]


COMMANDS = {
    "feasibility": cmd_feasibility,
    "baseline": cmd_baseline,
    "noisy": cmd_noisy,
    "sweep": cmd_sweep,
    "demo-vonneumann": cmd_demo_vonneumann,
}


def _csv_value(v):
    if isinstance(v, (list, tuple)):
        return ";".join(str(x) for x in v)
    return v


def write_records(records: Iterable[dict], stream, fmt: str = "json") -> None:
    records = list(records)
    if fmt == "json":
        for rec in records:
            stream.write(json.dumps(rec, sort_keys=True) + "\n")
        return
    fields: list[str] = []
    for rec in records:
        fields.extend(k for k in rec if k not in fields)
    writer = csv.DictWriter(stream, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow({k: _csv_value(v) for k, v in rec.items()})


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise OutcomeUnitaryError(f"{WORKERS_ENV}={raw!r} is not an integer") from None
    return max(1, n)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="outcome-unitary",
        description="Verify the environment-dependence bounds of outcome-conditioned unitaries.",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="YAML scenario file")
    parser.add_argument("--seed", type=int, help="override the configured seed (u64)")
    parser.add_argument("--out", help="output path ('-' for stdout)")
    parser.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise OutcomeUnitaryError("--seed must be an unsigned 64-bit integer")
            cfg = replace(cfg, seed=args.seed)
        workers = args.workers or cfg.workers or _default_workers()
        if workers < 1:
            raise OutcomeUnitaryError("--workers must be at least 1")
        records = COMMANDS[args.command](cfg, workers)
        buf = io.StringIO()
        write_records(records, buf, args.format)
        out = args.out or cfg.output
        if out and out != "-":
            with open(out, "w", newline="") as fh:
                fh.write(buf.getvalue())
        else:
            sys.stdout.write(buf.getvalue())
    except (OutcomeUnitaryError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    bad = [rec for rec in records if not rec.get("holds", True)]
    if bad:
        seeds = ", ".join(str(rec["seed"]) for rec in bad)
        print(f"{len(bad)} of {len(records)} trials violated a bound; seeds: {seeds}",
              file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
