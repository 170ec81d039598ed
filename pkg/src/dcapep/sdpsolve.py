"""Dense primal-dual interior-point solver for small SDPs.

Problem form (maximisation)::

    max  <C, X> + c_lin' x_lin + c_free' x_free
    s.t. A_k . X + A_lin[k] x_lin + A_free[k] x_free  (<= or ==)  b_k
         X PSD,  x_lin >= 0,  x_free free

Inequality rows receive a nonnegative slack. The dual is::

    min  b'y   s.t.  Z = sum_k y_k A_k - C PSD,  A_lin' y >= c_lin,  A_free' y = c_free

so multipliers of ``<=`` rows are nonnegative. Steps use the HKM direction
with a Mehrotra predictor-corrector and a dense Cholesky factorisation of
the Schur complement; free variables are eliminated through a second,
small Schur system instead of being split.

A presolve removes (1) directions common to the nullspaces of all data
matrices, (2) directions of the free variables that touch neither the
constraints nor the objective, and (3) linearly dependent equality rows.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
NEAR_OPTIMAL = "near_optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class SdpStandardForm:
    """Data of the max-form SDP described in the module docstring."""

    C: np.ndarray  # (n, n)
    A: np.ndarray  # (m, n, n)
    b: np.ndarray  # (m,)
    senses: list  # "<=" or "==" per row
    A_lin: np.ndarray | None = None  # (m, q)
    c_lin: np.ndarray | None = None  # (q,)
    A_free: np.ndarray | None = None  # (m, p)
    c_free: np.ndarray | None = None  # (p,)

    def __post_init__(self) -> None:
        self.C = np.asarray(self.C, dtype=float)
        n = self.C.shape[0]
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        m = self.b.size
        self.A = np.asarray(self.A, dtype=float).reshape(m, n, n)
        self.A_lin = _mat(self.A_lin, m)
        self.c_lin = _vec(self.c_lin, self.A_lin.shape[1])
        self.A_free = _mat(self.A_free, m)
        self.c_free = _vec(self.c_free, self.A_free.shape[1])
        self.senses = list(self.senses)
        if len(self.senses) != m or any(s not in ("<=", "==") for s in self.senses):
            raise ValueError("senses must list '<=' or '==' for every row")
        for M, name in [(self.C, "C")] + [(a, f"A[{k}]") for k, a in enumerate(self.A)]:
            if not np.array_equal(M, M.T):
                raise ValueError(f"{name} is not symmetric")

    @property
    def psd_block_size(self) -> int:
        return self.C.shape[0]

    @property
    def num_free_vars(self) -> int:
        return self.A_free.shape[1]

    @property
    def num_lin_vars(self) -> int:
        return self.A_lin.shape[1]

    @property
    def num_constraints(self) -> int:
        return self.b.size


def _mat(M, m):
    if M is None:
        return np.zeros((m, 0))
    return np.asarray(M, dtype=float).reshape(m, -1)


def _vec(v, q):
    if v is None:
        return np.zeros(q)
    return np.asarray(v, dtype=float).reshape(q)


@dataclass
class SdpOptions:
    max_iter: int = 100
    feas_tol: float = 1e-8
    gap_tol: float = 1e-7
    step_frac: float = 0.95


@dataclass
class SdpResult:
    status: str
    primal_objective: float
    dual_objective: float
    X: np.ndarray
    x_lin: np.ndarray
    x_free: np.ndarray
    y: np.ndarray
    Z: np.ndarray
    iterations: int
    residuals: dict
    history: list = field(default_factory=list)
    presolve_log: list = field(default_factory=list)
    message: str = ""

    @property
    def objective_value(self) -> float:
        return self.primal_objective


# ---------------------------------------------------------------------------
# presolve


@dataclass
class _Reduced:
    C: np.ndarray
    A: np.ndarray
    Al: np.ndarray
    cl: np.ndarray
    Af: np.ndarray
    cf: np.ndarray
    b: np.ndarray
    V: np.ndarray  # X = V Xr V'
    W: np.ndarray  # x_free = W xr_free
    rows: np.ndarray  # kept row indices
    q_user: int  # number of user linear variables (slacks follow)
    slack_rows: np.ndarray  # row index of each slack column


def _range_basis(M: np.ndarray, width: int, rtol: float = 1e-12) -> np.ndarray:
    if width == 0:
        return np.zeros((0, 0))
    if M.size == 0:
        return np.zeros((width, 0))
    _, s, vt = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((width, 0))
    r = int(np.sum(s > rtol * s[0]))
    if r == width:
        return np.eye(width)
    return vt[:r].T


def _presolve(form: SdpStandardForm, plog: list) -> _Reduced:
    m, n = form.num_constraints, form.psd_block_size
    ineq = np.array([s == "<=" for s in form.senses], dtype=bool)
    slack_rows = np.flatnonzero(ineq)
    S = np.zeros((m, slack_rows.size))
    S[slack_rows, np.arange(slack_rows.size)] = 1.0
    Al = np.hstack([form.A_lin, S])
    cl = np.concatenate([form.c_lin, np.zeros(slack_rows.size)])

    V = _range_basis(np.vstack([form.A.reshape(m * n, n), form.C]) if n else np.zeros((0, 0)), n)
    if V.shape[1] < n:
        plog.append(f"PSD block reduced from {n} to {V.shape[1]} (common nullspace of the data)")
    A = np.einsum("ai,kab,bj->kij", V, form.A, V) if n else form.A
    C = V.T @ form.C @ V
    A = 0.5 * (A + np.swapaxes(A, 1, 2))
    C = 0.5 * (C + C.T)

    p = form.num_free_vars
    W = _range_basis(np.vstack([form.A_free, form.c_free[None, :]]), p)
    if W.shape[1] < p:
        plog.append(f"free variables reduced from {p} to {W.shape[1]} (directions without effect)")
    Af = form.A_free @ W
    cf = W.T @ form.c_free

    rows = np.arange(m)
    R = np.hstack([A.reshape(m, -1), Al, Af])
    if m:
        _, rdiag, piv = linalg.qr(R.T, mode="economic", pivoting=True)
        d = np.abs(np.diag(rdiag)) if rdiag.size else np.zeros(0)
        r = int(np.sum(d > 1e-10 * max(d[0], 1.0))) if d.size else 0
        if r < m:
            keep = np.sort(piv[:r])
            drop = np.setdiff1d(rows, keep)
            coef, *_ = np.linalg.lstsq(R[keep].T, R[drop].T, rcond=None)
            mismatch = np.abs(coef.T @ form.b[keep] - form.b[drop])
            if mismatch.max() > 1e-8 * (1 + np.abs(form.b).max()):
                raise _Infeasible("dependent equality rows have inconsistent right-hand sides")
            plog.append(f"removed {drop.size} dependent rows: {drop.tolist()}")
            rows = keep
    return _Reduced(C, A[rows], Al[rows], cl, Af[rows], cf, form.b[rows], V, W, rows,
                    form.num_lin_vars, slack_rows)


class _Infeasible(Exception):
    pass


# ---------------------------------------------------------------------------
# interior point


def _max_step_psd(X: np.ndarray, dX: np.ndarray) -> float:
    if X.size == 0:
        return math.inf
    try:
        L = np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return 0.0
    T = linalg.solve_triangular(L, dX, lower=True)
    T = linalg.solve_triangular(L, T.T, lower=True)
    lam = np.linalg.eigvalsh(0.5 * (T + T.T))[0]
    return math.inf if lam >= 0 else -1.0 / lam


def _max_step_lin(x: np.ndarray, dx: np.ndarray) -> float:
    neg = dx < 0
    if not np.any(neg):
        return math.inf
    return float(np.min(-x[neg] / dx[neg]))


def solve_sdp(form: SdpStandardForm, opts: SdpOptions | None = None, **kw) -> SdpResult:
    """Solve ``form``; keyword arguments override fields of :class:`SdpOptions`."""
    opts = opts or SdpOptions()
    for k, v in kw.items():
        setattr(opts, k, v)
    plog: list = []
    try:
        red = _presolve(form, plog)
    except _Infeasible as exc:
        return _empty_result(form, INFEASIBLE, str(exc), plog)
    return _ipm(form, red, opts, plog)


def _empty_result(form, status, message, plog):
    n, m = form.psd_block_size, form.num_constraints
    nan = float("nan")
    return SdpResult(status, nan, nan, np.zeros((n, n)), np.zeros(form.num_lin_vars),
                     np.zeros(form.num_free_vars), np.zeros(m), np.zeros((n, n)), 0, {}, [], plog, message)


def _chol(M: np.ndarray) -> np.ndarray:
    return np.linalg.cholesky(0.5 * (M + M.T))


class _KKT:
    """Factorised Newton system [[M, Af], [Af', 0]] with iterative refinement."""

    def __init__(self, M: np.ndarray, Af: np.ndarray):
        m, p = Af.shape
        K = np.zeros((m + p, m + p))
        K[:m, :m] = M
        K[:m, m:] = Af
        K[m:, :m] = Af.T
        self.K, self.m = K, m
        self.lu = linalg.lu_factor(K, check_finite=False)

    def solve(self, r1: np.ndarray, r2: np.ndarray, refine: int = 2):
        rhs = np.concatenate([r1, r2])
        sol = linalg.lu_solve(self.lu, rhs)
        for _ in range(refine):
            sol = sol + linalg.lu_solve(self.lu, rhs - self.K @ sol)
        return sol[: self.m], sol[self.m:]


def _ipm(form: SdpStandardForm, red: _Reduced, opts: SdpOptions, plog: list) -> SdpResult:
    A, Al, Af, b, C, cl, cf = red.A, red.Al, red.Af, red.b, red.C, red.cl, red.cf
    m, n = A.shape[0], C.shape[0]
    q, p = Al.shape[1], Af.shape[1]
    nu = n + q

    normA = max((np.linalg.norm(a) for a in A), default=0.0)
    normb = np.linalg.norm(b)
    normc = math.sqrt(np.linalg.norm(C) ** 2 + np.linalg.norm(cl) ** 2 + np.linalg.norm(cf) ** 2)
    xi = max(10.0, math.sqrt(max(n, 1)), max(n, 1) * max(
        ((1 + abs(b[k])) / (1 + np.linalg.norm(A[k]) + np.linalg.norm(Al[k]) + np.linalg.norm(Af[k]))
         for k in range(m)), default=1.0))
    eta = max(10.0, math.sqrt(max(n, 1)), normA, normc)
    X = xi * np.eye(n)
    Z = eta * np.eye(n)
    xl = np.full(q, xi)
    zl = np.full(q, eta)
    xf = np.zeros(p)
    y = np.zeros(m)

    def Aop(M):
        return np.einsum("kij,ij->k", A, M)

    def ATop(v):
        return np.einsum("k,kij->ij", v, A)

    def merit(r):
        return max(r["primal"] / opts.feas_tol, r["dual"] / opts.feas_tol, r["gap"] / opts.gap_tol)

    history = []
    status, message = NUMERICAL_FAILURE, "iteration limit"
    best = None
    it = 0
    for it in range(1, opts.max_iter + 1):
        rp = b - Aop(X) - Al @ xl - Af @ xf
        Rd = ATop(y) - C - Z
        rdl = Al.T @ y - cl - zl
        rdf = cf - Af.T @ y
        mu = (np.sum(X * Z) + xl @ zl) / max(nu, 1)
        pobj = np.sum(C * X) + cl @ xl + cf @ xf
        dobj = b @ y
        pinf = np.linalg.norm(rp) / (1 + normb)
        dinf = math.sqrt(np.linalg.norm(Rd) ** 2 + np.linalg.norm(rdl) ** 2 + np.linalg.norm(rdf) ** 2) / (1 + normc)
        rgap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        res = {"primal": pinf, "dual": dinf, "gap": rgap, "mu": mu}
        history.append({"iter": it - 1, "pobj": pobj, "dobj": dobj, **res})
        if best is None or merit(res) < merit(best[0]):
            best = (res, X.copy(), xl.copy(), xf.copy(), y.copy(), it - 1)

        if pinf < opts.feas_tol and dinf < opts.feas_tol and rgap < opts.gap_tol:
            status, message = OPTIMAL, "converged"
            break
        verdict = _infeasibility_check(A, Al, Af, b, C, cl, cf, X, xl, xf, y, Z, zl, history)
        if verdict:
            status, message = verdict
            break
        if it - 1 - best[5] >= 5:
            message = "no progress for 5 iterations"
            break

        try:
            Lx = _chol(X)
            Lz = _chol(Z)
            Zinv = linalg.cho_solve((Lz, True), np.eye(n))
            Zinv = 0.5 * (Zinv + Zinv.T)
            # M_ij = tr(A_i X A_j Z^-1) = <Lx' A_i Lz^-T, Lx' A_j Lz^-T>
            LzinvT = linalg.solve_triangular(Lz, np.eye(n), lower=True).T
            Bm = np.matmul(np.matmul(Lx.T, A), LzinvT).reshape(m, -1)
            D = xl / zl
            M = Bm @ Bm.T + (Al * D) @ Al.T
            kkt = _KKT(0.5 * (M + M.T), Af)
        except (np.linalg.LinAlgError, linalg.LinAlgError, ValueError) as exc:
            message = f"factorisation failed: {exc}"
            break
        XRdZ = X @ Rd @ Zinv

        def direction(sigma, corr_psd, corr_lin):
            Rc = sigma * mu * Zinv - X - corr_psd
            rl = (sigma * mu - corr_lin) / zl - xl - D * rdl
            h = rp - Aop(Rc - XRdZ) - Al @ rl
            # -M dy + Af dxf = h,  Af' dy = rdf
            dy, mdxf = kkt.solve(-h, rdf)
            dxf = -mdxf
            dZ = ATop(dy) + Rd
            dX = Rc - X @ dZ @ Zinv
            dX = 0.5 * (dX + dX.T)
            dzl = Al.T @ dy + rdl
            dxl = rl - D * (Al.T @ dy)
            # iterative refinement against the primal equations, which lose
            # accuracy once X or Z is ill-conditioned
            for _ in range(2):
                r = rp - Aop(dX) - Al @ dxl - Af @ dxf
                if np.linalg.norm(r) <= 1e-3 * opts.feas_tol * (1 + normb):
                    break
                cy, cxf = kkt.solve(-r, np.zeros_like(rdf))
                cZ = ATop(cy)
                cX = -X @ cZ @ Zinv
                dX = dX + 0.5 * (cX + cX.T)
                dxf = dxf - cxf
                dy = dy + cy
                dZ = dZ + cZ
                dzl = dzl + Al.T @ cy
                dxl = dxl - D * (Al.T @ cy)
            return dX, dxl, dxf, dy, dZ, dzl

        # predictor
        dXa, dxla, _, _, dZa, dzla = direction(0.0, 0.0, 0.0)
        ap = min(1.0, _max_step_psd(X, dXa), _max_step_lin(xl, dxla))
        ad = min(1.0, _max_step_psd(Z, dZa), _max_step_lin(zl, dzla))
        mu_aff = (np.sum((X + ap * dXa) * (Z + ad * dZa)) + (xl + ap * dxla) @ (zl + ad * dzla)) / max(nu, 1)
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3 if mu > 0 else 0.0
        # corrector
        dX, dxl, dxf, dy, dZ, dzl = direction(sigma, dXa @ dZa @ Zinv, dxla * dzla)
        if not (np.all(np.isfinite(dX)) and np.all(np.isfinite(dy))):
            message = "non-finite search direction"
            break
        ap = min(1.0, opts.step_frac * _max_step_psd(X, dX), opts.step_frac * _max_step_lin(xl, dxl))
        ad = min(1.0, opts.step_frac * _max_step_psd(Z, dZ), opts.step_frac * _max_step_lin(zl, dzl))
        X = X + ap * dX
        X = 0.5 * (X + X.T)
        xl = xl + ap * dxl
        xf = xf + ap * dxf
        y = y + ad * dy
        Z = Z + ad * dZ
        Z = 0.5 * (Z + Z.T)
        zl = zl + ad * dzl
        if max(ap, ad) < 1e-12:
            message = "step length collapsed"
            break
    else:
        it = opts.max_iter

    if status == NUMERICAL_FAILURE and best is not None:
        res, X, xl, xf, y, _ = best
        if res["primal"] < 1e3 * opts.feas_tol and res["dual"] < 1e3 * opts.feas_tol \
                and res["gap"] < 1e3 * opts.gap_tol:
            status = NEAR_OPTIMAL
            message = f"{message}; best iterate within 1000x tolerance"

    # lift back to the user's variables
    Xfull = red.V @ X @ red.V.T
    xfree = red.W @ xf
    yfull = np.zeros(form.num_constraints)
    yfull[red.rows] = y
    Zfull = np.einsum("k,kij->ij", yfull, form.A) - form.C
    pobj = float(np.sum(form.C * Xfull) + form.c_lin @ xl[: red.q_user] + form.c_free @ xfree)
    dobj = float(form.b @ yfull)
    res = dict(res)
    res["slacks"] = xl[red.q_user:].copy()
    log.debug("sdp finished (%s) after %d iterations: %.12g", status, it, pobj)
    return SdpResult(status, pobj, dobj, Xfull, xl[: red.q_user].copy(), xfree, yfull, Zfull,
                     it, res, history, plog, message)


def _infeasibility_check(A, Al, Af, b, C, cl, cf, X, xl, xf, y, Z, zl, history):
    """Farkas-type certificates read off the current iterate, plus a stall rule."""
    by = b @ y
    if by < -1e6 * (1 + np.linalg.norm(b)):
        t = -by
        yy = y / t
        S = np.einsum("k,kij->ij", yy, A)
        lam = np.linalg.eigvalsh(S)[0] if S.size else 0.0
        lin = (Al.T @ yy).min() if Al.shape[1] else 0.0
        free = np.linalg.norm(Af.T @ yy) if Af.shape[1] else 0.0
        if lam > -1e-6 and lin > -1e-6 and free < 1e-6:
            return INFEASIBLE, "primal infeasible: dual ray found"
    cx = np.sum(C * X) + cl @ xl + cf @ xf
    if cx > 1e6 * (1 + np.linalg.norm(C) + np.linalg.norm(cl) + np.linalg.norm(cf)):
        r = np.einsum("kij,ij->k", A, X) + Al @ xl + Af @ xf
        if np.linalg.norm(r) / cx < 1e-6:
            return UNBOUNDED, "dual infeasible: primal ray found"
    if len(history) > 10:
        last = history[-10:]
        grows = all(h1["primal"] >= h0["primal"] * 0.999 for h0, h1 in zip(last, last[1:]))
        stalls = abs(last[-1]["gap"] - last[0]["gap"]) < 1e-3 * (1 + last[0]["gap"])
        never_close = min(h["primal"] for h in history) > 1e-6
        if grows and stalls and never_close:
            return INFEASIBLE, "primal residual grew while the gap stalled for 10 iterations"
    return None


# ---------------------------------------------------------------------------
# SDPA sparse format


def parse_sdpa(text: str) -> SdpStandardForm:
    """Read an SDPA sparse file into the max form.

    The SDPA dual ``max F0.Y s.t. Fi.Y = ci, Y PSD`` maps to ``X`` = the
    (single) non-diagonal block, ``x_lin`` = the diagonal (LP) block entries,
    and one equality row per primal variable. Comment lines start with
    ``"`` or ``*``.
    """
    tokens: list[str] = []
    for line in text.splitlines():
        s = line.strip()
        if not s or s[0] in '"*':
            continue
        for tok in s.replace(",", " ").replace("{", " ").replace("}", " ").replace("(", " ").replace(")", " ").split():
            try:
                float(tok)
            except ValueError:
                continue  # labels such as "= mDIM"
            tokens.append(tok)
    pos = 0

    def take():
        nonlocal pos
        pos += 1
        return tokens[pos - 1]

    mdim = int(take())
    nblock = int(take())
    struct = [int(float(take())) for _ in range(nblock)]
    c = np.array([float(take()) for _ in range(mdim)])
    psd_blocks = [i for i, s in enumerate(struct) if s > 0]
    lp_blocks = [i for i, s in enumerate(struct) if s < 0]
    if len(psd_blocks) > 1:
        raise ValueError("only one PSD block is supported")
    n = struct[psd_blocks[0]] if psd_blocks else 0
    lp_offset = {}
    q = 0
    for i in lp_blocks:
        lp_offset[i] = q
        q += -struct[i]
    F = np.zeros((mdim + 1, n, n))
    Flin = np.zeros((mdim + 1, q))
    while pos < len(tokens):
        k, blk, i, j = (int(take()) for _ in range(4))
        v = float(take())
        blk -= 1
        if struct[blk] > 0:
            F[k, i - 1, j - 1] = v
            F[k, j - 1, i - 1] = v
        else:
            if i != j:
                raise ValueError("off-diagonal entry in a diagonal block")
            Flin[k, lp_offset[blk] + i - 1] = v
    return SdpStandardForm(C=F[0], A=F[1:], b=c, senses=["=="] * mdim, A_lin=Flin[1:], c_lin=Flin[0])
