"""Command line entry point: ``dcapep <command> [options]``.

Exit status is 0 on success, 1 when a check fails and 2 on a configuration
error. Every file written goes under ``--out``. The default seed is 42,
overridden by the ``DCAPEP_SEED`` environment variable and then by
``--seed``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bounds, certify, dca, instances, pep
from .classes import FunctionClassParams, ParameterError

DEFAULT_SEED = 42
COMMANDS = ("run", "bound", "pep", "certify", "tightness", "counterexample", "sweep")


class ConfigError(Exception):
    """Bad user input; reported with exit status 2."""


@dataclass
class ExperimentConfig:
    command: str
    out: Path
    seed: int

    def path(self, name: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out / name


def _seed(arg: int | None) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("DCAPEP_SEED")
    if env is None:
        return DEFAULT_SEED
    try:
        return int(env)
    except ValueError as exc:
        raise ConfigError(f"DCAPEP_SEED must be an integer, got {env!r}") from exc


def _fmt(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, float):
        return "%.12g" % v
    return str(v)


def _real(text: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc


def _real_list(text: str) -> list[float]:
    return [_real(t) for t in text.split(",") if t.strip()]


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _write_csv(path: Path, header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    text = buf.getvalue()
    path.write_text(text)
    return text


def _classes(a) -> tuple[FunctionClassParams, FunctionClassParams]:
    return FunctionClassParams(a.mu1, a.L1), FunctionClassParams(a.mu2, a.L2)


def _add_params(p: argparse.ArgumentParser, N: bool = True) -> None:
    p.add_argument("--mu1", type=_real, default=0.0)
    p.add_argument("--L1", type=_real, default=math.inf, help="smoothness of f1 ('inf' allowed)")
    p.add_argument("--mu2", type=_real, default=0.0)
    p.add_argument("--L2", type=_real, default=math.inf, help="smoothness of f2 ('inf' allowed)")
    if N:
        p.add_argument("--N", type=int, default=1)
    p.add_argument("--Delta", type=_real, default=1.0)
    p.add_argument("--eta", type=_real, default=None, help="PL modulus")


# ---------------------------------------------------------------------------
# run


def _builtin_instance(ref: str) -> instances.DCInstance:
    name, _, rest = ref.partition(":")
    kw = {}
    for item in filter(None, rest.split(",")):
        k, _, v = item.partition("=")
        kw[k.strip()] = v.strip()
    if name == "tightness":
        return instances.make_tightness_instance(float(kw.get("L1", 8)), int(kw.get("N", 3)))
    if name == "counterexample":
        return instances.make_nonsmooth_counterexample(int(kw.get("max_terms", 60)))
    if name == "pl":
        return instances.make_pl_quadratic_instance(float(kw.get("L1", 2)), float(kw.get("L2", "inf")),
                                                    int(kw.get("dim", 1)))
    raise ConfigError(f"unknown instance {ref!r}; use a JSON file or tightness:L1=..,N=.. | counterexample | pl:L1=..,L2=..")


def _load_instance(ref: str) -> instances.DCInstance:
    if Path(ref).is_file():
        return instances.load_instance(ref)
    return _builtin_instance(ref)


def cmd_run(a, cfg: ExperimentConfig) -> int:
    inst = _load_instance(a.instance)
    x1 = None if a.x1 is None else np.array(_real_list(a.x1))
    rule = dca.StopRule(a.rule, a.eps, a.max_iter)
    trace = dca.run(inst, x1, rule)
    out = cfg.path("trace.csv")
    trace.to_csv(out)
    print(f"instance     {inst.name}")
    print(f"stop reason  {trace.stop_reason.value}")
    print(f"steps        {trace.N_performed}")
    print(f"min gap      {_fmt(trace.min_gap())}")
    if trace.N_performed:
        print(f"min T        {_fmt(trace.min_T())}")
    print(f"f(x^1)-f*    {_fmt(bounds.delta_from_trace(trace))}")
    print(f"f(last)-f*   {_fmt(trace.iterates[-1].f - trace.f_star)}")
    print(f"trace        {out}")
    return 0


# ---------------------------------------------------------------------------
# bound


def cmd_bound(a, cfg: ExperimentConfig) -> int:
    p1, p2 = _classes(a)
    theorem = a.theorem
    if theorem == "auto":
        theorem = bounds.gradient_case(p1, p2)
    res = bounds.evaluate_bound(bounds.BoundRequest(theorem, p1, p2, a.N, a.Delta, a.eta))
    print(f"theorem  {theorem}")
    print(f"case     {res.case_taken}")
    print(f"value    {res.value!r}")
    for k, v in res.constants.items():
        print(f"{k:<8} {v!r}")
    if theorem.startswith("prop31"):
        print(f"shifted  {bounds.iterate_gap_bound_corrected(p1, p2, a.N, a.Delta)!r}  (dual count N - 1)")
    return 0


# ---------------------------------------------------------------------------
# pep


def _pep_spec(a) -> pep.PepSpec:
    p1, p2 = _classes(a)
    return pep.PepSpec(a.kind, p1, p2, a.N, a.Delta, a.eta)


def closed_form(kind: str, p1, p2, N: int, Delta: float, eta) -> float:
    """The bound the PEP optimum is compared with (squared for norm bounds)."""
    if kind == "gradient_gap":
        return bounds.gradient_gap_bound_auto(p1, p2, N, Delta).value ** 2
    if kind == "model_decrease":
        return bounds.model_decrease_bound(p1, p2, N, Delta)
    return bounds.pl_contraction_factor(p1, p2, eta) * Delta


def cmd_pep(a, cfg: ExperimentConfig) -> int:
    spec = _pep_spec(a)
    problem = pep.build(spec)
    tag = f"{spec.kind}_N{spec.N}"
    if a.action == "build":
        print(f"kind         {spec.kind}")
        print(f"gram size    {problem.gram_dim}")
        print(f"scalars      {len(problem.scalar_names)}")
        print(f"constraints  {len(problem.constraints)}")
        for line in problem.build_log:
            print(f"note         {line}")
        return 0
    if a.action == "export":
        out = cfg.path(f"pep_{tag}.dat-s")
        out.write_text(pep.export_sdpa(problem))
        print(f"wrote {out}")
        return 0
    sol = pep.solve(problem)
    try:
        bound = closed_form(spec.kind, spec.params1, spec.params2, spec.N, spec.Delta, spec.eta)
    except bounds.BoundError as exc:
        bound = None
        print(f"bound        inapplicable ({exc})")
    rows = [["objective", sol.objective_value]] + [[k, v] for k, v in sol.scalars.items()]
    rows += [[f"dual:{k}", v] for k, v in sol.dual_multipliers.items()]
    out = cfg.path(f"pep_{tag}_solution.csv")
    _write_csv(out, ["name", "value"], rows)
    print(f"status       {sol.status}")
    print(f"iterations   {sol.iterations}")
    print(f"objective    {sol.objective_value!r}")
    if bound is not None:
        print(f"closed form  {bound!r}")
    print(f"solution     {out}")
    if sol.status not in ("optimal", "near_optimal"):
        return 1
    if bound is not None and sol.objective_value > bound + 1e-6 * (1 + abs(bound)):
        print("FAIL: solver optimum exceeds the closed-form bound")
        return 1
    return 0


# ---------------------------------------------------------------------------
# certify


def _read_grid(path: str) -> list[dict]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"grid file {path!r} not found")
    text = p.read_text()
    if p.suffix == ".json":
        data = json.loads(text)
        return list(data["points"] if isinstance(data, dict) else data)
    return [dict(r) for r in csv.DictReader(io.StringIO(text))]


def _cert_params(row: dict) -> certify.CertParams:
    def get(k, d):
        v = row.get(k, d)
        return d if v in (None, "") else v

    eta = get("eta", None)
    return certify.CertParams(float(get("mu1", 0)), float(get("L1", "inf")), float(get("mu2", 0)),
                              float(get("L2", "inf")), int(get("N", 1)), float(get("Delta", 1)),
                              None if eta is None else float(eta))


CERT_HEADER = ["case", "variant", "mu1", "L1", "mu2", "L2", "N", "Delta", "eta",
               "max_residual", "sign_violations", "bound", "closed_form", "ok"]


def _certify_rows(case, variant, grid, samples, seed):
    rows, failures = [], 0
    for cp in grid:
        try:
            cert = certify.multipliers_for(case, cp, variant)
        except certify.CertificateError as exc:
            rows.append([case, variant, cp.mu1, cp.L1, cp.mu2, cp.L2, cp.N, cp.Delta, cp.eta,
                         "", f"rejected: {exc}", "", "", False])
            failures += 1
            continue
        rep = certify.verify_identity(cert, samples, seed)
        cf = certify.closed_form_bound(cert)
        ok = rep.ok and abs(cert.bound - cf) <= 1e-12 * max(1.0, abs(cf))
        failures += not ok
        viol = ";".join(f"{n}={v:.3g}" for n, v in rep.sign_grid_violations)
        rows.append([case, variant, cp.mu1, cp.L1, cp.mu2, cp.L2, cp.N, cp.Delta, cp.eta,
                     rep.max_residual, viol, cert.bound, cf, ok])
    return rows, failures


def cmd_certify(a, cfg: ExperimentConfig) -> int:
    cases = certify.CASES if a.theorem == "all" else (a.theorem,)
    all_rows, status = [], 0
    for case in cases:
        grid = [_cert_params(r) for r in _read_grid(a.grid)] if a.grid else certify.default_grid(case)
        if a.variant == "auto":
            variants = ["printed", "repaired"] if case in certify.REPAIRED else ["printed"]
        else:
            variants = [a.variant]
        for variant in variants:
            rows, failures = _certify_rows(case, variant, grid, a.samples, cfg.seed)
            all_rows += rows
            worst = max((r[9] for r in rows if r[9] != ""), default=float("nan"))
            decisive = variant == variants[-1]
            verdict = "PASS" if failures == 0 else ("FAIL" if decisive else "FAIL (repaired variant follows)")
            print(f"{case:<20} {variant:<9} points={len(rows):<4} max_residual={worst:.3g} "
                  f"failures={failures}  {verdict}")
            if failures and decisive:
                status = 1
    name = "certify_all.csv" if a.theorem == "all" else f"certify_{a.theorem}.csv"
    out = cfg.path(name)
    _write_csv(out, CERT_HEADER, all_rows)
    print(f"grid results {out}")
    return status


# ---------------------------------------------------------------------------
# tightness and counterexample


def cmd_tightness(a, cfg: ExperimentConfig) -> int:
    inst = instances.make_tightness_instance(a.L1, a.N)
    trace = dca.run(inst, rule=dca.StopRule("gradient_gap", 1e-12, a.N))
    observed = trace.min_gap(a.N)
    delta = bounds.delta_from_trace(trace)
    p1, p2 = FunctionClassParams(0.0, a.L1), FunctionClassParams(0.0, math.inf)
    bound = bounds.gradient_gap_bound(bounds.BoundRequest("cor31_ii", p1, p2, a.N, delta)).value
    diff = abs(observed - bound)
    print(f"observed min gap  {observed!r}")
    print(f"bound             {bound!r}")
    print(f"difference        {diff:.3e}")
    _write_csv(cfg.path(f"tightness_L1{_fmt(a.L1)}_N{a.N}.csv"), ["L1", "N", "observed", "bound", "diff"],
               [[a.L1, a.N, observed, bound, diff]])
    return 0 if diff <= 1e-9 else 1


def cmd_counterexample(a, cfg: ExperimentConfig) -> int:
    inst = instances.make_nonsmooth_counterexample()
    trace = dca.run(inst, rule=dca.StopRule("gradient_gap", 1e-8, a.iterations))
    delta = bounds.delta_from_trace(trace)
    rows, ok = [], True
    for N in range(1, trace.N_performed + 1):
        minT = trace.min_T(N)
        bound = delta / N
        gap = trace.min_gap(N)
        good = minT <= bound + 1e-12 and abs(gap - 1.0) <= 1e-12
        ok &= good
        rows.append([N, minT, bound, gap, good])
    out = cfg.path("counterexample.csv")
    _write_csv(out, ["N", "min_T", "bound", "min_gap", "ok"], rows)
    print(f"steps         {trace.N_performed} ({trace.stop_reason.value})")
    print(f"min gap       {trace.min_gap()!r}")
    print(f"min T         {trace.min_T()!r}")
    print(f"T bound (1/N) {delta / trace.N_performed!r}")
    print(f"table         {out}")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# sweep

SWEEP_HEADER = ["kind", "mu1", "L1", "mu2", "L2", "N", "Delta", "eta",
                "closed_form_bound", "pep_value", "best_empirical", "certificate_ok", "status"]


def _cap(L: float, lo: float) -> float:
    return max(4.0 * (lo + 1.0), 8.0) if math.isinf(L) else L


def best_empirical(kind, p1, p2, N, Delta, eta, grid: int = 7) -> float | None:
    """Worst measure seen on one-dimensional quadratics from the two classes.

    f1 = a x^2/2 and f2 = b x^2/2 with a in [mu1, L1], b in [mu2, L2] and
    a > b (infinite L is capped). The measure is normalised to ``Delta``.
    """
    best = None
    for a_ in np.linspace(p1.mu, _cap(p1.L, p1.mu), grid):
        for b_ in np.linspace(p2.mu, _cap(p2.L, p2.mu), grid):
            if not (a_ > 0 and a_ > b_ * (1 + 1e-9)):
                continue
            if kind == "pl_onestep" and a_ - b_ < eta:
                continue
            try:
                inst = instances.make_quadratic_instance([[a_]], [0.0], [[b_]], [0.0], 0.0, p1, p2)
            except (instances.InstanceError, ParameterError):
                continue
            steps = 1 if kind == "pl_onestep" else N
            trace = dca.run(inst, np.array([1.0]), dca.StopRule("gradient_gap", 1e-300, steps))
            d0 = bounds.delta_from_trace(trace)
            if kind == "gradient_gap":
                m = trace.min_gap(min(N, trace.N_performed)) ** 2
            elif kind == "model_decrease":
                m = trace.min_T(trace.N_performed) if trace.N_performed else 0.0
            else:
                m = trace[2].f - trace.f_star if trace.N_performed else 0.0
            v = m * Delta / d0
            best = v if best is None else max(best, v)
    return best


def sweep_row(point: dict) -> list:
    kind = point.get("kind", "gradient_gap")
    cp = _cert_params(point)
    head = [kind, cp.mu1, cp.L1, cp.mu2, cp.L2, cp.N, cp.Delta, cp.eta]
    try:
        p1, p2 = cp.p1, cp.p2
        if kind == "gradient_gap" and not (p1.smooth or p2.smooth):
            return head + ["", "", "", "", "inapplicable: L1 and L2 both infinite"]
        spec = pep.PepSpec(kind, p1, p2, cp.N, cp.Delta, cp.eta)
        bound = closed_form(kind, p1, p2, cp.N, cp.Delta, cp.eta)
    except (ValueError, bounds.BoundError, ParameterError) as exc:
        return head + ["", "", "", "", f"inapplicable: {exc}"]
    try:
        sol = pep.solve(pep.build(spec))
        pv = sol.objective_value
        emp = best_empirical(kind, p1, p2, cp.N, cp.Delta, cp.eta)
        sel = certify.select_case(kind, cp)
        cert_ok = ""
        if sel is not None:
            cert = certify.multipliers_for(sel[0], cp, sel[1])
            cert_ok = certify.certified_bound_check(cert, sol, seed=0)
        return head + [bound, pv, emp, cert_ok, sol.status]
    except Exception as exc:  # per-row failure: record and continue
        return head + [bound, "", "", "", f"error: {type(exc).__name__}: {exc}"]


def _sweep_points(a) -> list[dict]:
    if a.grid:
        return _read_grid(a.grid)
    pts = []
    for L1 in a.L1:
        for L2 in a.L2:
            for mu1 in a.mu1:
                for mu2 in a.mu2:
                    for N in a.N:
                        for eta in (a.eta or [None]):
                            pts.append(dict(kind=a.kind, mu1=mu1, L1=L1, mu2=mu2, L2=L2, N=N,
                                            Delta=a.Delta, eta=eta))
    return pts


def cmd_sweep(a, cfg: ExperimentConfig) -> int:
    points = _sweep_points(a)
    for p in points:
        if int(p.get("N", 1)) > 10:
            raise ConfigError("sweep points must have N <= 10")
    rows = [sweep_row(p) for p in points]
    out = cfg.path("sweep.csv")
    text = _write_csv(out, SWEEP_HEADER, rows)
    dat = cfg.path("sweep.dat")
    lines = ["# " + " ".join(SWEEP_HEADER[:-1])]
    for r in rows:
        lines.append(" ".join(_fmt(v) if _fmt(v) != "" else "nan" for v in r[:-1]))
    dat.write_text("\n".join(lines) + "\n")
    sys.stdout.write(text)
    bad = [r for r in rows if isinstance(r[9], float) and r[9] > r[8] + 1e-6 * (1 + abs(r[8]))]
    bad += [r for r in rows if r[11] is False]
    return 1 if bad else 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dcapep", description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="dcapep-out", help="directory for all output files")
    parser.add_argument("--seed", type=int, default=None, help="random seed (default 42 or $DCAPEP_SEED)")
    # the same options are accepted after the subcommand as well
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    p = command("run", help="run DCA on an instance and write its trace")
    p.add_argument("--instance", required=True,
                   help="JSON config file, or tightness:L1=8,N=3 | counterexample | pl:L1=2,L2=inf")
    p.add_argument("--rule", choices=[k.value for k in dca.StopKind], default="gradient_gap")
    p.add_argument("--eps", type=_real, default=1e-8)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--x1", default=None, help="comma-separated start point")

    p = command("bound", help="evaluate a closed-form bound")
    p.add_argument("--theorem", choices=("auto",) + bounds.THEOREMS, default="auto")
    _add_params(p)

    p = command("pep", help="build, solve or export a performance-estimation SDP")
    p.add_argument("action", choices=("build", "solve", "export"))
    p.add_argument("--kind", choices=pep.KINDS, default="gradient_gap")
    _add_params(p)

    p = command("certify", help="check proof certificates on a parameter grid")
    p.add_argument("--theorem", choices=("all",) + certify.CASES, default="all")
    p.add_argument("--variant", choices=("auto",) + certify.VARIANTS, default="auto")
    p.add_argument("--grid", default=None, help="CSV or JSON grid (mu1, L1, mu2, L2, N, Delta, eta)")
    p.add_argument("--samples", type=int, default=200)

    p = command("tightness", help="run the tight one-dimensional example")
    p.add_argument("--L1", type=_real, required=True)
    p.add_argument("--N", type=int, required=True)

    p = command("counterexample", help="run the nonsmooth example that never meets the gap rule")
    p.add_argument("--iterations", type=int, default=30)

    p = command("sweep", help="closed-form bound vs PEP vs empirical over a grid")
    p.add_argument("--grid", default=None, help="CSV or JSON grid; overrides the list options")
    p.add_argument("--kind", choices=pep.KINDS, default="gradient_gap")
    p.add_argument("--mu1", type=_real_list, default=[0.0])
    p.add_argument("--L1", type=_real_list, default=[1.0])
    p.add_argument("--mu2", type=_real_list, default=[0.0])
    p.add_argument("--L2", type=_real_list, default=[1.0])
    p.add_argument("--N", type=_int_list, default=[2])
    p.add_argument("--eta", type=_real_list, default=None)
    p.add_argument("--Delta", type=_real, default=1.0)
    return parser


HANDLERS = {
    "run": cmd_run,
    "bound": cmd_bound,
    "pep": cmd_pep,
    "certify": cmd_certify,
    "tightness": cmd_tightness,
    "counterexample": cmd_counterexample,
    "sweep": cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = ExperimentConfig(a.command, Path(a.out), _seed(a.seed))
        return HANDLERS[a.command](a, cfg)
    except (ConfigError, ParameterError, bounds.BoundError, instances.InstanceError,
            certify.CertificateError, ValueError, KeyError, OSError) as exc:
        print(f"dcapep {a.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
