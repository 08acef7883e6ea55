"""Command line runner: ``qmn measure | axioms | hammerstein``.

Exit codes: 0 success, 1 a check or certificate failed, 2 invalid input,
3 numerical failure (no radius bracket, divergence).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import SCHEMA_VERSION, ConfigError, EnsembleFileError, ExperimentConfig, read_ensemble
from .darbo import (ComparisonFunction, DivergenceError, EnsembleIterationError, certify,
                    declared_contraction, ensemble_iterate, picard_solve)
from .hammerstein import (HammersteinError, RadiusError, car4_norm, cone_ball_sampler, estimate_q, find_radius,
                          k1_check, radius_gap)
from .noncompactness import axiom_suite, quasimeasure, shrinking_stub

log = logging.getLogger("qmn")

EXIT_OK, EXIT_FAILED, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2, 3


class _Output:
    """Writes the run's files; every JSON document carries schema and config."""

    def __init__(self, directory: Path, config: ExperimentConfig, command: str, seed: int):
        self.dir = directory
        self.dir.mkdir(parents=True, exist_ok=True)
        self.header = {"schema": SCHEMA_VERSION, "command": command, "seed": seed,
                       "config": config.to_dict()}
        fmt = config.data["output"]["formats"]
        self.csv = fmt in ("csv", "both")
        self.embed = fmt in ("json", "both")
        self.written: list[str] = []

    def json(self, name: str, body: dict):
        doc = dict(self.header, **body)
        text = json.dumps(_plain(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"
        (self.dir / name).write_text(text, encoding="utf-8", newline="\n")
        self.written.append(name)

    def table(self, name: str, header: list[str], rows):
        if not self.csv:
            return
        with open(self.dir / name, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(v) for v in row])
        self.written.append(name)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else v


def _plain(obj):
    """Convert numpy scalars and non-finite floats to JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# --------------------------------------------------------------------------


def cmd_measure(config: ExperimentConfig, ensemble_path: str, out: _Output) -> int:
    params = config.params()
    F = read_ensemble(ensemble_path, params.grid)
    rep = quasimeasure(F, params)
    body = rep.to_dict()
    if not out.embed:
        body.pop("omega_table")
        body.pop("chi_table")
    body["members"] = len(F)
    out.json("report.json", {"result": body})
    out.table("omega_table.csv", ["delta", "omega"], rep.omega_table)
    out.table("chi_table.csv", ["level", "eps", "chi"], rep.chi_table)
    print(f"eta={rep.eta_value!r} omega0={rep.omega0_value!r} chi0={rep.chi0_value!r} "
          f"total={rep.omega_total!r}")
    return EXIT_OK


def cmd_axioms(config: ExperimentConfig, seed: int, out: _Output, adversarial: bool = False) -> int:
    suite = config.data["suite"]
    components = {"eta": shrinking_stub} if adversarial else None
    rep = axiom_suite(config.params(), seed=seed, trials=suite["trials"],
                      components=components, max_size=suite["max_size"])
    body = rep.to_dict()
    body["adversarial"] = adversarial
    out.json("axioms.json", {"result": body})
    out.table("axioms.csv", ["check", "passed", "trials", "failure_count"],
              [(k, c.passed, c.trials, len(c.failures)) for k, c in rep.checks.items()])
    for name, c in rep.checks.items():
        print(f"{'PASS' if c.passed else 'FAIL'}  {name}  trials={c.trials} failures={len(c.failures)}")
    return EXIT_OK if rep.passed else EXIT_FAILED


def cmd_hammerstein(config: ExperimentConfig, seed: int, out: _Output) -> int:
    """Check the hypotheses, solve by Picard iteration and certify an ensemble trace.

    Whatever has been computed is written even when a later stage fails.
    """
    params = config.params()
    problem = config.problem()
    solver, dcfg = config.data["solver"], config.data["darbo"]
    hyp: dict = {}
    cert: dict = {}
    reasons: list[str] = []
    code = EXIT_OK
    try:
        hyp["car4_norm"] = car4_norm(problem.kernel, problem.grid)
        k1 = k1_check(problem)
        hyp["k1"] = k1.to_dict()
        if not k1.passed:
            reasons.append("k1_failed")
        if problem.radius is None:
            sol = find_radius(problem)
            hyp["radius"] = dict(sol.to_dict(), supplied=False)
            problem = problem.with_radius(sol.R)
        else:
            gap = radius_gap(problem, problem.radius)
            hyp["radius"] = {"R": problem.radius, "supplied": True, "gap": gap}
            if gap > 1e-10 * max(1.0, problem.radius):
                reasons.append("supplied_radius_too_small")
        contraction = declared_contraction(problem)
        hyp["declared_contraction"] = contraction
        q = estimate_q(problem, cone_ball_sampler(dcfg["members"]), dcfg["q_trials"], params, seed=seed)
        hyp["q_estimate"] = q.to_dict()
        if q.flagged:
            reasons.append("q_hat_at_least_one")

        f_star, ptrace = picard_solve(problem, tol=solver["tol"], max_iter=solver["max_iter"])
        cert["picard"] = ptrace.to_dict()
        cert["picard"]["peak"] = float(f_star.scalar().max())
        if not ptrace.converged:
            reasons.append("picard_not_converged")
        if out.embed:
            cert["solution"] = [float(v) for v in f_star.scalar()]
        out.table("solution.csv", ["node"] + [f"x{i}" for i in range(problem.grid.dim)] + ["f_star"],
                  [(i, *map(float, x), float(v)) for i, (x, v) in
                   enumerate(zip(problem.grid.nodes, f_star.scalar()))])

        C1 = cone_ball_sampler(dcfg["members"])(np.random.default_rng(seed + 1), problem, params)
        trace = ensemble_iterate(problem, C1, dcfg["iters"], params, config.probes(),
                                 kappa_budget=dcfg["kappa_budget"], seed=seed)
        cols = list(trace.records[0].to_dict())
        out.table("trace.csv", cols, [[getattr(r, c) for c in cols] for r in trace.records])
        if out.embed:
            cert["trace"] = trace.to_dict()
        cert["measured_contraction"] = trace.measured_contraction()
        slope = dcfg["phi_D_slope"]
        if slope is None and contraction is not None and contraction < 1:
            slope = contraction
        if slope is None or slope >= 1:
            cert["darbo"] = {"passed": False, "reason": "no comparison function with slope below 1"}
            reasons.append("darbo_certificate_failed")
        else:
            phi_E = None if dcfg["phi_E_slope"] is None else ComparisonFunction.linear(dcfg["phi_E_slope"])
            c = certify(trace, ComparisonFunction.linear(slope), phi_E, slack=dcfg["slack"])
            cert["darbo"] = c.to_dict()
            if not c.passed:
                reasons.append("darbo_certificate_failed")
        code = EXIT_FAILED if reasons else EXIT_OK
    except (RadiusError, DivergenceError, EnsembleIterationError, HammersteinError) as exc:
        code = EXIT_NUMERICAL
        reasons.append(f"numerical: {exc}")
        if isinstance(exc, EnsembleIterationError):
            cert["partial_trace"] = exc.trace.to_dict()
    finally:
        status = {"exit_code": code, "reasons": reasons}
        out.json("hypotheses.json", {"result": hyp, "status": status})
        out.json("certificates.json", {"result": cert, "status": status})
    print(f"exit={code} " + (", ".join(reasons) if reasons else "all checks passed"))
    if "picard" in cert:
        print(f"picard iterations={cert['picard']['iterations']} peak={cert['picard']['peak']!r}")
    return code


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qmn", description="Quasimeasure experiments and Hammerstein fixed points.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file (defaults apply when omitted)")
        sp.add_argument("--out", help="output directory (overrides output.directory)")
        sp.add_argument("--seed", type=int, help="seed (overrides suite.seed)")
        sp.add_argument("--format", choices=("json", "csv", "both"), help="table format")
        return sp

    m = common(sub.add_parser("measure", help="quasimeasure of an ensemble file"))
    m.add_argument("--ensemble", required=True, help="ensemble CSV")
    a = common(sub.add_parser("axioms", help="run the axiom suite"))
    a.add_argument("--adversarial", action="store_true", help="inject a non-monotone component")
    common(sub.add_parser("hammerstein", help="check hypotheses, solve and certify"))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        config = ExperimentConfig.load(args.config)
        overrides: dict = {}
        if args.out is not None:
            overrides["output"] = {"directory": args.out}
        if args.format is not None:
            overrides.setdefault("output", {})["formats"] = args.format
        if args.seed is not None:
            overrides["suite"] = {"seed": args.seed}
        if overrides:
            config = config.override(**overrides)
        seed = config.data["suite"]["seed"]
        out = _Output(Path(config.data["output"]["directory"]), config, args.command, seed)
        if args.command == "measure":
            return cmd_measure(config, args.ensemble, out)
        if args.command == "axioms":
            return cmd_axioms(config, seed, out, args.adversarial)
        return cmd_hammerstein(config, seed, out)
    except (ConfigError, EnsembleFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (RadiusError, DivergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
