"""Command-line front end: ``entrans plan | run | verify``.

Exit codes: 0 success, 1 validation or I/O error, 2 infeasible
transformation, 3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import deterministic as det
from . import montecarlo as mc
from . import multicopy as mcp
from . import singlecopy as sc
from .errors import InfeasibleError, ValidationError
from .statecore import (
    BipartiteState,
    _frozen,
    diag_matrix,
    overlap,
    schmidt_decompose,
    unitarity_error,
)
from .statefile import complex_matrix, digest, dumps, read_state_file, state_from_dict, state_to_dict
from .verify import run_suites

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_FAILED = 0, 1, 2, 3
KINDS = ("single", "det", "multi")


class _Failed(Exception):
    def __init__(self, report: dict):
        self.report = report


def _me_target(state: BipartiteState, m: int) -> BipartiteState:
    """m-ME state written in the input's own Schmidt bases."""
    f = schmidt_decompose(state)
    sig = np.zeros(f.lambdas.size)
    if not 1 <= m <= sig.size:
        raise ValidationError(f"--ME {m} outside 1..{sig.size}")
    sig[:m] = 1 / math.sqrt(m)
    c = f.left.conj().T @ diag_matrix(sig, *f.shape) @ f.right
    return BipartiteState(_frozen(c))


def _load_inputs(args) -> tuple[BipartiteState, BipartiteState, dict]:
    if getattr(args, "plan", None):
        saved = json.loads(Path(args.plan).read_text())
        inputs = saved["inputs"]
        state = state_from_dict(inputs["input"])
        target = state_from_dict(inputs["target"])
        opts = saved["command"]
        args.kind = args.kind or opts["kind"]
        for key in ("p", "copies", "me"):
            if getattr(args, key, None) is None:
                setattr(args, key, opts.get(key))
    else:
        if args.input is None:
            raise ValidationError("an input state file (or --plan) is required")
        state = read_state_file(args.input, normalize=args.normalize)
        if args.me is not None:
            target = _me_target(state, args.me)
        elif args.target is not None:
            target = read_state_file(args.target, normalize=args.normalize)
        else:
            raise ValidationError("give a target state file or --ME m")
    inputs = {"input": state_to_dict(state), "target": state_to_dict(target)}
    inputs["digest"] = digest(inputs)
    return state, target, inputs


def _echo(args) -> dict:
    keys = ("verb", "kind", "me", "p", "copies", "trials", "seed", "tol", "size_cap", "perturb", "instances")
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def _tol(args, default: float) -> float:
    return default if getattr(args, "tol", None) is None else args.tol


def _plan_single(state, target, args, include: bool) -> tuple[dict, dict, sc.TransformOutcome]:
    out = sc.transform_single_copy(state, target, args.p)
    fin, ftg = out.input_form, out.target_form
    lam = np.asarray(fin.lambdas)
    sig = sc._target_lambdas(ftg, lam.size)
    p_opt = sc.optimal_probability(lam, sig)
    plan = {
        "lambdas_sq": lam**2,
        "sigmas_sq": sig**2,
        "p_opt": p_opt,
        "p": out.success_prob,
        "failure_prob": out.failure_prob,
        "contraction": out.plan.contraction.diag,
        "angles": out.plan.contraction.angles,
        "n_min": mcp.min_copies(lam, sig),
        "classical_bits": 0,
    }
    if include:
        plan["u0"] = complex_matrix(out.plan.u0)
    target_p = p_opt if args.p is None else args.p
    checks = {
        "u0_unitary": unitarity_error(out.plan.u0) <= _tol(args, 1e-10),
        "success_weight_matches_p": abs(out.success_prob - target_p) <= _tol(args, 1e-10),
        "success_state_is_target": overlap(out.success_state, target) >= 1 - _tol(args, 1e-9),
    }
    if args.p is None:
        checks["failure_residual_empty"] = sc.residual_extractability(out.plan.contraction, lam, sig) <= 1e-12
    return plan, checks, out


def _plan_det(state, target, args, include: bool) -> tuple[dict, dict, det.DeterministicPlan]:
    p = det.plan_deterministic(state, target)
    plan = {
        "lambdas_sq": p.lambdas**2,
        "sigmas_sq": p.sigmas**2,
        "bridge": p.bridge,
        "terms": [{"weight": t.weight, "perm": list(t.perm)} for t in p.terms],
        "branch_probs": p.branch_probs,
        "bob_corrections": [list(c) for c in p.bob_corrections],
        "classical_bits": p.classical_bits,
    }
    if include:
        plan["povm"] = [complex_matrix(a) for a in p.povm]
        plan["u1"] = complex_matrix(p.u1)
    d = p.lambdas.size
    checks = {
        "povm_complete": float(np.max(np.abs(sum(a.conj().T @ a for a in p.povm) - np.eye(d)))) <= _tol(args, 1e-10),
        "u1_unitary": unitarity_error(p.u1) <= _tol(args, 1e-10),
        "bridge_maps_spectra": float(np.max(np.abs(p.bridge @ p.sigmas**2 - p.lambdas**2))) <= _tol(args, 1e-10),
        "weights_match_birkhoff": all(
            abs(q - t.weight) <= 1e-10 for q, t in zip(p.branch_probs, p.terms)
        ),
    }
    return plan, checks, p


def _plan_multi(state, target, args, include: bool) -> tuple[dict, dict, mcp.MultiCopyPlan]:
    p = mcp.plan_multicopy(state, target, args.copies)
    plan = {
        "lambdas_sq": p.lambdas**2,
        "sigmas_sq": p.sigmas**2,
        "p_opt": p.p_opt,
        "n_min": p.n_min,
        "copies": p.copies,
        "branch_probs": p.branch_probs,
        "contractions": [c.diag for c in p.contractions],
        "classical_bits": p.classical_bits,
    }
    if include:
        plan["delta"] = complex_matrix(p.delta)
        plan["u2"] = complex_matrix(p.u2)
    dd = p.delta @ p.delta.conj().T
    sd = np.zeros_like(dd)
    k = p.sigmas.size
    sd[np.arange(k), np.arange(k)] = p.sigmas**2
    checks = {
        "u2_unitary": unitarity_error(p.u2) <= _tol(args, 1e-10),
        "delta_gram_is_target": float(np.max(np.abs(dd - sd))) <= _tol(args, 1e-10),
        "omega_normalized": abs(float(np.sum(np.abs(p.omega) ** 2)) - 1) <= 1e-10,
    }
    return plan, checks, p


_PLANNERS = {"single": _plan_single, "det": _plan_det, "multi": _plan_multi}


def cmd_plan(args) -> dict:
    state, target, inputs = _load_inputs(args)
    plan, checks, _ = _PLANNERS[args.kind](state, target, args, args.include_matrices)
    return _report(args, inputs, plan, None, checks)


def _band(stats: mc.TrialStats, label, p: float) -> dict:
    f = stats.frequency(label)
    return {
        "frequency": f,
        "analytic": p,
        "three_sigma": 3 * math.sqrt(p * (1 - p) / stats.trials),
        "pass": mc.within_band(f, p, stats.trials),
    }


def cmd_run(args) -> dict:
    state, target, inputs = _load_inputs(args)
    plan, checks, obj = _PLANNERS[args.kind](state, target, args, False)
    trials: dict = {"trials": args.trials, "seed": args.seed}
    if args.kind == "single":
        out: sc.TransformOutcome = obj
        proto = mc.BornProtocol((out.success_prob, out.failure_prob), ("success", "failure"))
        stats = mc.estimate_success(proto, args.trials, args.seed, workers=args.workers)
        trials["counts"] = stats.counts
        trials["success"] = _band(stats, "success", out.success_prob)
        checks["success_frequency_3sigma"] = trials["success"]["pass"]
    elif args.kind == "det":
        p: det.DeterministicPlan = obj
        branches = det.all_branches(state, target, p)
        uncorrected = det.all_branches(state, target, p, bob_corrects=False)
        plan["branch_overlaps"] = [b.overlap for b in branches]
        plan["uncorrected_overlaps"] = [b.overlap for b in uncorrected]
        trace = det.run_deterministic(state, target, args.seed, p)
        plan["trace"] = {
            "branch": trace.branch,
            "classical_bits": trace.classical_bits,
            "bob_applied": list(trace.bob_applied),
            "final_overlap": trace.final_overlap,
        }
        proto = mc.BornProtocol(tuple(b.probability for b in branches))
        stats = mc.estimate_success(proto, args.trials, args.seed, workers=args.workers)
        ok_branch = [b.overlap >= 1 - _tol(args, 1e-9) for b in branches]
        successes = sum(c for i, c in stats.counts.items() if ok_branch[i])
        trials["counts"] = {str(k): v for k, v in stats.counts.items()}
        trials["branches"] = [_band(stats, i, b.probability) for i, b in enumerate(branches)]
        trials["success_frequency"] = successes / stats.trials
        checks["every_branch_reaches_target"] = all(ok_branch)
        checks["branch_frequencies_3sigma"] = all(b["pass"] for b in trials["branches"])
        checks["success_frequency_is_one"] = successes == stats.trials
    else:
        p: mcp.MultiCopyPlan = obj
        res = mcp.finalize_multicopy(p)
        block_err = float(np.max(np.abs(res.rho_a_out - mcp.target_block(p))))
        plan["rho_out_block_error"] = block_err
        plan["block_weights"] = res.block_weights
        weights = np.clip(res.block_weights, 0.0, None)
        proto = mc.BornProtocol(tuple(weights / weights.sum()))
        stats = mc.estimate_success(proto, args.trials, args.seed, workers=args.workers)
        trials["counts"] = {str(k): v for k, v in stats.counts.items()}
        trials["success_frequency"] = stats.frequency(0)
        ftg = schmidt_decompose(target)
        v = ftg.diagonal().reshape(-1)
        proj = np.outer(v, v.conj())
        checks["rho_out_block_diag"] = block_err <= _tol(args, 1e-10)
        checks["first_block_weight_one"] = abs(res.block_weights[0] - 1) <= 1e-10
        checks["slot1_marginal_is_target"] = float(np.max(np.abs(res.pair_marginals[0] - proj))) <= _tol(args, 1e-10)
        checks["symmetric_marginals_equal"] = all(
            float(np.max(np.abs(m - res.symmetric_pair_marginals[0]))) <= 1e-10 for m in res.symmetric_pair_marginals
        )
        checks["classical_bits_at_most_one"] = p.classical_bits <= 1
        checks["success_frequency_is_one"] = stats.frequency(0) == 1.0
    return _report(args, inputs, plan, trials, checks)


def cmd_verify(args) -> dict:
    checks = run_suites(args.size_cap, args.seed, args.perturb, args.instances)
    plan = {"suites": [{"name": c.name, "pass": c.passed, "worst": c.worst, "detail": c.detail} for c in checks]}
    return _report(args, None, plan, None, {c.name: c.passed for c in checks})


def _report(args, inputs, plan, trials, checks) -> dict:
    report = {
        "command": _echo(args),
        "inputs": inputs,
        "plan": plan,
        "trials": trials,
        "checks": checks,
        "status": "PASS" if all(checks.values()) else "FAIL",
    }
    if report["status"] != "PASS":
        raise _Failed(report)
    return report


def _text(report: dict) -> str:
    lines = [f"status: {report['status']}"]
    plan = report.get("plan") or {}
    for key, val in plan.items():
        if key == "suites":
            for s in val:
                lines.append(f"  {'PASS' if s['pass'] else 'FAIL'}  {s['name']}  (worst {s['worst']:.3g})")
            continue
        if isinstance(val, (list, tuple, np.ndarray)) and len(val) and isinstance(val[0], (list, dict, np.ndarray)):
            continue
        lines.append(f"{key}: {dumps(val, indent=0)}")
    if report.get("trials"):
        for key, val in report["trials"].items():
            lines.append(f"trials.{key}: {dumps(val, indent=0)}")
    if "suites" not in plan:
        for name, ok in report["checks"].items():
            lines.append(f"  {'PASS' if ok else 'FAIL'}  {name}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entrans",
        description="Plan, run and verify one-sided transformations of bipartite pure states.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, with_inputs: bool = True, kind_optional: bool = False):
        if with_inputs:
            p.add_argument("kind", choices=KINDS, nargs="?" if kind_optional else None)
            p.add_argument("input", nargs="?", type=Path, help="input state file")
            p.add_argument("target", nargs="?", type=Path, help="target state file")
            p.add_argument("--ME", dest="me", type=int, help="target the m-dimensional maximally entangled state")
            p.add_argument("--p", type=float, help="single-copy success probability (default: optimal)")
            p.add_argument("--copies", type=int, help="copies for multi (default: n_min)")
            p.add_argument("--normalize", action="store_true", help="rescale unnormalized input matrices")
        p.add_argument("--tol", type=float, help="override check tolerances")
        p.add_argument("--json", action="store_true", help="machine-readable report on stdout")
        p.add_argument("--out", type=Path, help="also write the JSON report here")
        p.add_argument("--seed", type=int, default=0)

    p_plan = sub.add_parser("plan", help="compute a transformation plan")
    common(p_plan)
    p_plan.add_argument("--include-matrices", action="store_true", help="embed U0/U1/U2 and POVM matrices")

    p_run = sub.add_parser("run", help="execute a plan with Monte-Carlo and branch-exhaustive checks")
    common(p_run, kind_optional=True)
    p_run.add_argument("--plan", type=Path, help="plan report written by 'plan --out'")
    p_run.add_argument("--trials", type=int, default=100_000)
    p_run.add_argument("--workers", type=int, default=1, help="threads for trial execution")

    p_ver = sub.add_parser("verify", help="run every invariant suite on random instances")
    common(p_ver, with_inputs=False)
    p_ver.add_argument("--size-cap", type=int, default=5)
    p_ver.add_argument("--perturb", type=float, default=0.0, help="fault injection added to unitaries")
    p_ver.add_argument("--instances", type=int, default=20)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verb == "run" and args.kind is None and args.plan is None:
        parser.error("run needs a kind or --plan")
    handler = {"plan": cmd_plan, "run": cmd_run, "verify": cmd_verify}[args.verb]
    code = EXIT_OK
    try:
        report = handler(args)
    except _Failed as exc:
        report, code = exc.report, EXIT_FAILED
    except InfeasibleError as exc:
        return _fail(args, exc, EXIT_INFEASIBLE)
    except (ValidationError, OSError, KeyError, json.JSONDecodeError) as exc:
        return _fail(args, exc, EXIT_INVALID)
    text = dumps(report)
    if args.out:
        args.out.write_text(text + "\n")
    print(text if args.json else _text(report))
    return code


def _fail(args, exc: Exception, code: int) -> int:
    msg = f"{type(exc).__name__}: {exc}"
    print(f"error: {msg}", file=sys.stderr)
    if getattr(args, "json", False):
        print(dumps({"command": _echo(args), "error": type(exc).__name__, "message": str(exc), "exit_code": code}))
    return code


if __name__ == "__main__":
    sys.exit(main())
