"""Performance-estimation problems for DCA, lifted to SDPs over a Gram matrix.

Three problems are built:

``gradient_gap``
    max l  s.t. l <= |g1^k - g2^k|^2 (k = 1..N+1), interpolation of f1 and
    f2 on the N+1 iterates, the descent-lemma lower rows and
    f(x^1) - f_star <= Delta.
``model_decrease``
    max l  s.t. l <= T(x^{k+1}) (k = 1..N), the same interpolation rows,
    f(x^k) >= f_star and f(x^1) - f_star <= Delta.
``pl_onestep``
    max f(x^2) - f_star for one step with f(x^1) - f_star = Delta, both
    iterates satisfying the PL inequality with modulus eta.

The lifted vectors are x^1..x^{N+1}, g1^1..g1^{N+1} and g2^{N+1}; every
other f2 subgradient is replaced by g2^k = g1^{k+1}. The optimal value
f_star is translated to 0, so f1 values are understood relative to it.
Each constraint is stored as ``<Q, G> + a . s  (<= or ==)  rhs`` with G the
Gram matrix and s the scalar variables.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import descent_constant
from .classes import FunctionClassParams, check_standing_assumptions
from .sdpsolve import OPTIMAL, SdpOptions, SdpStandardForm, solve_sdp

KINDS = ("gradient_gap", "model_decrease", "pl_onestep")


@dataclass(frozen=True)
class PepSpec:
    kind: str
    params1: FunctionClassParams
    params2: FunctionClassParams
    N: int = 1
    Delta: float = 1.0
    eta: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown PEP kind {self.kind!r}; expected one of {KINDS}")
        check_standing_assumptions(self.params1, self.params2)
        if self.kind == "pl_onestep":
            object.__setattr__(self, "N", 1)
            if self.eta is None or not self.eta > 0:
                raise ValueError("pl_onestep needs eta > 0")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        if not self.Delta > 0:
            raise ValueError("Delta must be positive")
        if self.kind == "gradient_gap" and not (self.params1.smooth or self.params2.smooth):
            raise ValueError("gradient_gap PEP needs L1 or L2 finite")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "N": self.N, "Delta": self.Delta, "eta": self.eta,
            "mu1": self.params1.mu, "L1": self.params1.L, "mu2": self.params2.mu, "L2": self.params2.L,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PepSpec":
        return cls(d["kind"], FunctionClassParams(d["mu1"], d["L1"]), FunctionClassParams(d["mu2"], d["L2"]),
                   d["N"], d["Delta"], d.get("eta"))


@dataclass
class PepConstraint:
    name: str
    Q: np.ndarray  # symmetric Gram coefficients
    a: np.ndarray  # scalar coefficients
    sense: str  # "<=" or "=="
    rhs: float = 0.0

    def evaluate(self, G: np.ndarray, s: np.ndarray) -> float:
        """Signed residual ``<Q, G> + a.s - rhs`` (feasible when <= 0, or == 0)."""
        return float(np.sum(self.Q * G) + self.a @ s - self.rhs)

    def __eq__(self, other) -> bool:
        return (isinstance(other, PepConstraint) and self.name == other.name and self.sense == other.sense
                and self.rhs == other.rhs and np.array_equal(self.Q, other.Q) and np.array_equal(self.a, other.a))


@dataclass
class PepProblem:
    spec: PepSpec
    gram_labels: list
    scalar_names: list
    constraints: list
    objective_Q: np.ndarray
    objective_a: np.ndarray
    build_log: list = field(default_factory=list)

    @property
    def gram_dim(self) -> int:
        return len(self.gram_labels)

    @property
    def scalar_vars(self) -> dict:
        return {name: i for i, name in enumerate(self.scalar_names)}

    def row(self, name: str) -> PepConstraint:
        for c in self.constraints:
            if c.name == name:
                return c
        raise KeyError(name)

    def rows(self, prefix: str) -> list:
        return [c for c in self.constraints if c.name.split("[")[0] == prefix]

    def objective(self, G: np.ndarray, s: np.ndarray) -> float:
        return float(np.sum(self.objective_Q * G) + self.objective_a @ s)

    def __eq__(self, other) -> bool:
        return (isinstance(other, PepProblem) and self.spec == other.spec
                and self.gram_labels == other.gram_labels and self.scalar_names == other.scalar_names
                and self.constraints == other.constraints
                and np.array_equal(self.objective_Q, other.objective_Q)
                and np.array_equal(self.objective_a, other.objective_a))


@dataclass
class PepSolution:
    objective_value: float
    gram: np.ndarray
    scalars: dict
    dual_multipliers: dict
    status: str
    residuals: dict
    iterations: int
    message: str = ""


# ---------------------------------------------------------------------------
# building


class _Builder:
    def __init__(self, spec: PepSpec):
        self.spec = spec
        N = spec.N
        self.N = N
        self.labels = [f"x{k}" for k in range(1, N + 2)] + [f"g1_{k}" for k in range(1, N + 2)] + [f"g2_{N + 1}"]
        self.d = len(self.labels)
        self.snames = [f"f1_{k}" for k in range(1, N + 2)] + [f"f2_{k}" for k in range(1, N + 2)]
        if spec.kind != "pl_onestep":
            self.snames.append("ell")
        self.sidx = {n: i for i, n in enumerate(self.snames)}
        self.rows: list[PepConstraint] = []

    def e(self, label: str) -> np.ndarray:
        v = np.zeros(self.d)
        v[self.labels.index(label)] = 1.0
        return v

    def x(self, k):
        return self.e(f"x{k}")

    def g1(self, k):
        return self.e(f"g1_{k}")

    def g2(self, k):
        # subproblem optimality: g2^k = g1^{k+1} for k <= N
        return self.g1(k + 1) if k <= self.N else self.e(f"g2_{k}")

    def s(self, **coef) -> np.ndarray:
        a = np.zeros(len(self.snames))
        for name, c in coef.items():
            a[self.sidx[name]] += c
        return a

    def add(self, name, Q, a, sense="<=", rhs=0.0):
        self.rows.append(PepConstraint(name, 0.5 * (Q + Q.T), a, sense, float(rhs)))

    def interpolation(self, fn: int, params: FunctionClassParams, i: int, j: int):
        """Row LHS - RHS <= 0 of the (i, j) interpolation inequality for f_fn."""
        g = self.g1 if fn == 1 else self.g2
        dx = self.x(i) - self.x(j)
        dg = g(i) - g(j)
        gj = g(j)
        mu, inv_L, sc = params.mu, params.inv_L, params.interp_scale
        Q = sc * (inv_L * np.outer(dg, dg) + mu * np.outer(dx, dx) - 2 * mu * inv_L * _sym(dg, dx))
        Q = Q + _sym(gj, dx)
        a = self.s(**{f"f{fn}_{i}": -1.0, f"f{fn}_{j}": 1.0})
        self.add(f"interp_f{fn}[{i},{j}]", Q, a)

    def all_interpolation(self, npts):
        for fn, params in ((1, self.spec.params1), (2, self.spec.params2)):
            for i in range(1, npts + 1):
                for j in range(1, npts + 1):
                    if i != j:
                        self.interpolation(fn, params, i, j)


def _sym(u, v):
    return 0.5 * (np.outer(u, v) + np.outer(v, u))


def build(spec: PepSpec) -> PepProblem:
    """Assemble the Gram-matrix SDP for ``spec``."""
    b = _Builder(spec)
    N = spec.N
    log = []
    if spec.kind == "gradient_gap":
        for k in range(1, N + 2):
            d = b.g1(k) - b.g2(k)
            b.add(f"gap[{k}]", -np.outer(d, d), b.s(ell=1.0))
        b.all_interpolation(N + 1)
        S = descent_constant(spec.params1, spec.params2)
        for k in range(1, N + 2):
            d = b.g1(k) - b.g2(k)
            b.add(f"lower[{k}]", np.outer(d, d) / (2 * S), b.s(**{f"f1_{k}": -1.0, f"f2_{k}": 1.0}))
        b.add("delta", np.zeros((b.d, b.d)), b.s(f1_1=1.0, f2_1=-1.0), "<=", spec.Delta)
        obj_a = b.s(ell=1.0)
        log.append(f"descent rows use S = {S!r}")
    elif spec.kind == "model_decrease":
        for k in range(1, N + 1):
            # l <= f1^k - f1^{k+1} - <g2^k, x^k - x^{k+1}>
            Q = _sym(b.g2(k), b.x(k) - b.x(k + 1))
            b.add(f"T[{k}]", Q, b.s(ell=1.0, **{f"f1_{k}": -1.0, f"f1_{k + 1}": 1.0}))
        b.all_interpolation(N + 1)
        for k in range(1, N + 2):
            b.add(f"lower[{k}]", np.zeros((b.d, b.d)), b.s(**{f"f1_{k}": -1.0, f"f2_{k}": 1.0}))
        b.add("delta", np.zeros((b.d, b.d)), b.s(f1_1=1.0, f2_1=-1.0), "<=", spec.Delta)
        obj_a = b.s(ell=1.0)
        log.append("no descent-lemma rows in the model-decrease problem")
        log.append(
            f"f2 rows with g2^{N + 1} use <g2^{N + 1}, x^i - x^{N + 1}>, the pattern of the other "
            "interpolation rows (a printed variant pairs it with x^i - x^j)"
        )
    else:
        b.all_interpolation(2)
        for k in (1, 2):
            b.add(f"lower[{k}]", np.zeros((b.d, b.d)), b.s(**{f"f1_{k}": -1.0, f"f2_{k}": 1.0}))
        for k in (1, 2):
            d = b.g1(k) - b.g2(k)
            b.add(f"pl[{k}]", -np.outer(d, d) / (2 * spec.eta), b.s(**{f"f1_{k}": 1.0, f"f2_{k}": -1.0}))
        b.add("normalize", np.zeros((b.d, b.d)), b.s(f1_1=1.0, f2_1=-1.0), "==", spec.Delta)
        obj_a = b.s(f1_2=1.0, f2_2=-1.0)
        log.append(f"ratio objective linearised by fixing f(x^1) - f_star = {spec.Delta!r}")
    log.append("f_star translated to 0; substitution g2^k = g1^{k+1} applied for k <= N")
    return PepProblem(spec, b.labels, b.snames, b.rows, np.zeros((b.d, b.d)), obj_a, log)


# ---------------------------------------------------------------------------
# solving


def _solve_basis(problem: PepProblem) -> list:
    """Gram indices kept when solving.

    Adding the same linear function to f1 and f2 changes neither the
    classes, the iterates nor f, and shifts every subgradient by one common
    vector. Choosing that vector as -g2^{N+1} shows g2^{N+1} = 0 may be
    assumed, which removes an unbounded direction of the Gram matrix.
    """
    last = f"g2_{problem.spec.N + 1}"
    return [i for i, label in enumerate(problem.gram_labels) if label != last]


def to_standard_form(problem: PepProblem, reduce: bool = True) -> SdpStandardForm:
    keep = _solve_basis(problem) if reduce else list(range(problem.gram_dim))
    ix = np.ix_(keep, keep)
    return SdpStandardForm(
        C=problem.objective_Q[ix],
        A=np.array([c.Q[ix] for c in problem.constraints]),
        b=np.array([c.rhs for c in problem.constraints]),
        senses=[c.sense for c in problem.constraints],
        A_free=np.array([c.a for c in problem.constraints]),
        c_free=problem.objective_a,
    )


def solve(problem: PepProblem, tol: float | None = None, **opts) -> PepSolution:
    """Solve with the bundled interior-point method.

    ``tol`` sets both the feasibility and the relative-gap tolerance;
    otherwise they default to 1e-8 and 1e-7.
    """
    o = SdpOptions(**opts)
    if tol is not None:
        o.feas_tol = o.gap_tol = tol
    keep = _solve_basis(problem)
    res = solve_sdp(to_standard_form(problem), o)
    G = np.zeros((problem.gram_dim, problem.gram_dim))
    G[np.ix_(keep, keep)] = res.X
    scalars = dict(zip(problem.scalar_names, res.x_free.tolist()))
    duals = {c.name: float(y) for c, y in zip(problem.constraints, res.y)}
    residuals = dict(res.residuals, presolve=res.presolve_log, dual_objective=res.dual_objective)
    return PepSolution(res.primal_objective, G, scalars, duals, res.status, residuals, res.iterations, res.message)


# ---------------------------------------------------------------------------
# SDPA export / import


def _gram_vars(d):
    return [(a, c) for a in range(d) for c in range(a, d)]


def _lp_rows(problem):
    """LP-block entries: one per '<=' row, two (<= and >=) per '==' row."""
    out = []
    for r, c in enumerate(problem.constraints):
        out.append((r, 1.0))
        if c.sense == "==":
            out.append((r, -1.0))
    return out


def export_sdpa(problem: PepProblem) -> str:
    """SDPA sparse text for the PEP.

    SDPA primal variables are the upper-triangle Gram entries followed by the
    scalar variables. Block 1 is the Gram matrix; block 2 is a diagonal block
    carrying ``rhs - (<Q, G> + a.s) >= 0`` per row (equality rows appear as a
    pair). The SDPA objective is the negated PEP objective. Metadata needed to
    rebuild the :class:`PepProblem` is stored in leading ``*`` comment lines.
    """
    d = problem.gram_dim
    gv = _gram_vars(d)
    ns = len(problem.scalar_names)
    lp = _lp_rows(problem)
    nvar = len(gv) + ns
    meta = {
        "spec": problem.spec.to_dict(),
        "gram_labels": problem.gram_labels,
        "scalar_names": problem.scalar_names,
        "rows": [[c.name, c.sense] for c in problem.constraints],
        "build_log": problem.build_log,
    }
    fmt = lambda v: "%.17g" % v  # noqa: E731
    lines = [f"* dcapep-pep {json.dumps(meta, sort_keys=True)}"]
    lines.append(f"{nvar} = mDIM")
    lines.append("2 = nBLOCK")
    lines.append(f"{d} {-len(lp)} = bLOCKsTRUCT")

    def coef(Q, a, idx):
        if idx < len(gv):
            i, j = gv[idx]
            return Q[i, i] if i == j else 2.0 * Q[i, j]
        return a[idx - len(gv)]

    cvec = [-coef(problem.objective_Q, problem.objective_a, k) for k in range(nvar)]
    lines.append(" ".join(fmt(v + 0.0) for v in cvec))
    # F0: LP block holds -rhs
    for pos, (r, sgn) in enumerate(lp, start=1):
        v = -sgn * problem.constraints[r].rhs
        if v != 0:
            lines.append(f"0 2 {pos} {pos} {fmt(v)}")
    for k in range(nvar):
        if k < len(gv):
            i, j = gv[k]
            lines.append(f"{k + 1} 1 {i + 1} {j + 1} 1")
        for pos, (r, sgn) in enumerate(lp, start=1):
            c = problem.constraints[r]
            v = -sgn * coef(c.Q, c.a, k)
            if v != 0:
                lines.append(f"{k + 1} 2 {pos} {pos} {fmt(v)}")
    return "\n".join(lines) + "\n"


def import_sdpa(text: str) -> PepProblem:
    """Inverse of :func:`export_sdpa` (requires its metadata comment)."""
    meta = None
    for line in text.splitlines():
        if line.startswith("* dcapep-pep "):
            meta = json.loads(line[len("* dcapep-pep "):])
            break
    if meta is None:
        raise ValueError("not a dcapep PEP export (metadata line missing)")
    spec = PepSpec.from_dict(meta["spec"])
    d = len(meta["gram_labels"])
    ns = len(meta["scalar_names"])
    gv = _gram_vars(d)
    rows_meta = meta["rows"]
    lp_pos = {}
    pos = 1
    for r, (_, sense) in enumerate(rows_meta):
        lp_pos[pos] = r
        pos += 2 if sense == "==" else 1

    body = [ln for ln in text.splitlines() if ln.strip() and ln.strip()[0] not in '*"']
    nvar = int(body[0].split()[0])
    cvec = [float(t) for t in body[3].split()]
    Qs = [np.zeros((d, d)) for _ in rows_meta]
    As = [np.zeros(ns) for _ in rows_meta]
    rhs = [0.0] * len(rows_meta)
    for ln in body[4:]:
        k, blk, i, j, v = ln.split()
        k, blk, i, v = int(k), int(blk), int(i), float(v)
        if blk != 2 or i not in lp_pos:
            continue  # Gram identity entries and the second half of equality pairs
        r = lp_pos[i]
        if k == 0:
            rhs[r] = -v
        elif k - 1 < len(gv):
            a, c = gv[k - 1]
            if a == c:
                Qs[r][a, a] = -v
            else:
                Qs[r][a, c] = Qs[r][c, a] = -v / 2.0
        else:
            As[r][k - 1 - len(gv)] = -v
    obj_Q = np.zeros((d, d))
    obj_a = np.zeros(ns)
    for k in range(nvar):
        v = -cvec[k] + 0.0
        if k < len(gv):
            a, c = gv[k]
            if a == c:
                obj_Q[a, a] = v
            else:
                obj_Q[a, c] = obj_Q[c, a] = v / 2.0
        else:
            obj_a[k - len(gv)] = v
    cons = [PepConstraint(name, Q + 0.0, a + 0.0, sense, r + 0.0)
            for (name, sense), Q, a, r in zip(rows_meta, Qs, As, rhs)]
    return PepProblem(spec, meta["gram_labels"], meta["scalar_names"], cons, obj_Q, obj_a, meta["build_log"])


# ---------------------------------------------------------------------------
# feasible points from DCA runs


@dataclass
class FeasiblePoint:
    gram: np.ndarray
    scalars: np.ndarray
    objective_value: float
    violations: list  # (row name, residual)
    scale: float

    @property
    def ok(self) -> bool:
        return not self.violations


def feasible_point_from_trace(trace, spec: PepSpec, problem: PepProblem | None = None,
                              tol: float = 1e-8) -> FeasiblePoint:
    """Map the first N+1 iterates of a DCA run to a point of the PEP.

    Vectors are scaled by sqrt(c) and function values (relative to f_star)
    by c, with c = Delta / (f(x^1) - f_star), so the Delta row is active.
    Every row is evaluated; violated rows are listed in the result.
    """
    N = spec.N
    if trace.N_performed < N:
        raise ValueError(f"trace has {trace.N_performed} steps, the PEP needs {N}")
    problem = problem or build(spec)
    f_star = trace.f_star
    gap0 = trace[1].f - f_star
    c = spec.Delta / gap0 if gap0 > 0 else 1.0
    if spec.kind == "pl_onestep" and not gap0 > 0:
        raise ValueError("pl_onestep needs f(x^1) > f_star")
    its = [trace[k] for k in range(1, N + 2)]
    cols = {}
    for k, it in enumerate(its, start=1):
        cols[f"x{k}"] = it.x
        cols[f"g1_{k}"] = it.g1
    cols[f"g2_{N + 1}"] = its[-1].g2
    P = np.array([cols[l] for l in problem.gram_labels]) * math.sqrt(c)
    G = P @ P.T
    vals = {}
    for k, it in enumerate(its, start=1):
        vals[f"f1_{k}"] = c * (it.f1 - f_star)
        vals[f"f2_{k}"] = c * it.f2
    if "ell" in problem.scalar_names:
        ell_rows = problem.rows("gap") or problem.rows("T")
        s0 = np.array([vals.get(n, 0.0) for n in problem.scalar_names])
        # each objective row reads l - q_k <= 0, so l = min_k q_k
        vals["ell"] = min(-r.evaluate(G, s0) for r in ell_rows)
    s = np.array([vals[n] for n in problem.scalar_names])
    violations = []
    scale = 1.0 + float(np.abs(G).max()) + float(np.abs(s).max())
    for row in problem.constraints:
        r = row.evaluate(G, s)
        bad = abs(r) > tol * scale if row.sense == "==" else r > tol * scale
        if bad:
            violations.append((row.name, r))
    return FeasiblePoint(G, s, problem.objective(G, s), violations, c)


def is_optimal(sol: PepSolution) -> bool:
    return sol.status == OPTIMAL
