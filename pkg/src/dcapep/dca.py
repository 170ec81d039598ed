"""The DC algorithm (linearize f2, minimize the convex model) and its trace."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .instances import DCInstance


class StopKind(str, Enum):
    GRADIENT_GAP = "gradient_gap"
    MODEL_DECREASE = "model_decrease"


class StopReason(str, Enum):
    GAP_TOL = "gap_tol"
    T_TOL = "T_tol"
    MAX_ITER = "max_iter"


class OracleError(RuntimeError):
    """An oracle left the domain; ``point`` is the offending input."""

    def __init__(self, message: str, point: np.ndarray, k: int):
        super().__init__(f"{message} at k={k}, x={point.tolist()}")
        self.point = point
        self.k = k


@dataclass(frozen=True)
class StopRule:
    kind: StopKind = StopKind.GRADIENT_GAP
    epsilon: float = 1e-8
    max_iter: int = 100

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", StopKind(self.kind))
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass(frozen=True)
class Iterate:
    k: int
    x: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    f1: float
    f2: float
    T: float | None = None  # T(x^k) = model decrease of the step k-1 -> k

    @property
    def f(self) -> float:
        return self.f1 - self.f2

    @property
    def gap(self) -> float:
        return float(np.linalg.norm(self.g1 - self.g2))


@dataclass
class Trace:
    """History of a run; ``iterates[0]`` is x^1.

    ``N_performed`` counts subproblem solves, so the trace holds
    ``N_performed + 1`` iterates.
    """

    iterates: list[Iterate] = field(default_factory=list)
    stop_reason: StopReason | None = None
    f_star: float = 0.0

    @property
    def N_performed(self) -> int:
        return len(self.iterates) - 1

    def __getitem__(self, k: int) -> Iterate:
        """1-based access: ``trace[k]`` is x^k."""
        if not 1 <= k <= len(self.iterates):
            raise IndexError(f"iterate {k} out of range 1..{len(self.iterates)}")
        return self.iterates[k - 1]

    @property
    def gaps(self) -> np.ndarray:
        return np.array([it.gap for it in self.iterates])

    @property
    def T_values(self) -> np.ndarray:
        """T(x^{k+1}) for k = 1..N_performed."""
        return np.array([it.T for it in self.iterates[1:]], dtype=float)

    @property
    def f_values(self) -> np.ndarray:
        return np.array([it.f for it in self.iterates])

    def min_gap(self, N: int | None = None) -> float:
        """min over k = 1..N+1 of |g1^k - g2^k|."""
        N = self.N_performed if N is None else N
        self._need(N)
        return float(self.gaps[: N + 1].min())

    def min_T(self, N: int | None = None) -> float:
        """min over k = 1..N of T(x^{k+1})."""
        N = self.N_performed if N is None else N
        if N < 1:
            raise ValueError("min_T needs N >= 1")
        self._need(N)
        return float(self.T_values[:N].min())

    def min_step(self, N: int | None = None) -> float:
        """min over k = 1..N of |x^{k+1} - x^k|."""
        N = self.N_performed if N is None else N
        if N < 1:
            raise ValueError("min_step needs N >= 1")
        self._need(N)
        xs = np.array([it.x for it in self.iterates[: N + 1]])
        return float(np.linalg.norm(np.diff(xs, axis=0), axis=1).min())

    def _need(self, N: int) -> None:
        if N > self.N_performed:
            raise ValueError(f"trace has only {self.N_performed} steps, need {N}")

    def to_csv(self, path: str | Path | None = None) -> str:
        """CSV with columns k, x_1..x_n, gap, T, f1, f2, f at 17 significant digits."""
        n = self.iterates[0].x.size if self.iterates else 0
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k"] + [f"x_{i + 1}" for i in range(n)] + ["gap", "T", "f1", "f2", "f"])
        fmt = lambda v: "" if v is None else "%.17g" % v  # noqa: E731
        for it in self.iterates:
            w.writerow([it.k] + [fmt(v) for v in it.x] + [fmt(it.gap), fmt(it.T), fmt(it.f1), fmt(it.f2), fmt(it.f)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _query(oracle, x, name, k):
    value, g = oracle(x)
    if g is None or not math.isfinite(value) or not np.all(np.isfinite(g)):
        raise OracleError(f"{name} oracle failed (value {value})", np.array(x, dtype=float), k)
    return float(value), np.atleast_1d(np.asarray(g, dtype=float))


def run(instance: DCInstance, x1=None, rule: StopRule | None = None) -> Trace:
    """Run DCA from ``x1`` (default: the instance's start point).

    The gradient-gap rule stops at the first k with |g1^k - g2^k| <= eps,
    the model-decrease rule at the first step with T(x^{k+1}) < eps, and
    either stops after ``rule.max_iter`` subproblem solves.
    """
    rule = rule or StopRule()
    if x1 is None:
        if instance.start_point is None:
            raise ValueError("no start point given and the instance has none")
        x1 = instance.start_point
    x = np.atleast_1d(np.asarray(x1, dtype=float)).copy()
    if x.shape != (instance.dimension,):
        raise ValueError(f"start point must have shape ({instance.dimension},)")

    f1, g1 = _query(instance.f1_oracle, x, "f1", 1)
    f2, g2 = _query(instance.f2_oracle, x, "f2", 1)
    trace = Trace([Iterate(1, x, g1, g2, f1, f2)], f_star=instance.f_star)

    k = 1
    while True:
        cur = trace.iterates[-1]
        if rule.kind is StopKind.GRADIENT_GAP and cur.gap <= rule.epsilon:
            trace.stop_reason = StopReason.GAP_TOL
            break
        if trace.N_performed >= rule.max_iter:
            trace.stop_reason = StopReason.MAX_ITER
            break
        x_new, g1_new = instance.argmin_oracle(cur.x, cur.g2)
        x_new = np.atleast_1d(np.asarray(x_new, dtype=float))
        g1_new = np.atleast_1d(np.asarray(g1_new, dtype=float))
        if not np.all(np.isfinite(x_new)):
            raise OracleError("argmin oracle returned a non-finite point", cur.x, k)
        f1_new, _ = _query(instance.f1_oracle, x_new, "f1", k + 1)
        f2_new, g2_new = _query(instance.f2_oracle, x_new, "f2", k + 1)
        T = _model_decrease(cur.f1, f1_new, cur.g2, cur.x, x_new)
        k += 1
        trace.iterates.append(Iterate(k, x_new, g1_new, g2_new, f1_new, f2_new, T))
        if rule.kind is StopKind.MODEL_DECREASE and T < rule.epsilon:
            trace.stop_reason = StopReason.T_TOL
            break
    return trace


def _model_decrease(f1_k, f1_next, g2_k, x_k, x_next) -> float:
    return float(f1_k - f1_next - g2_k @ (x_k - x_next))


def termination_measure(trace: Trace, k: int) -> float:
    """T(x^{k+1}) = f1(x^k) - f1(x^{k+1}) - <g2^k, x^k - x^{k+1}>, for 1 <= k <= N_performed."""
    if not 1 <= k <= trace.N_performed:
        raise IndexError(f"k={k} outside 1..{trace.N_performed}")
    a, b = trace[k], trace[k + 1]
    return _model_decrease(a.f1, b.f1, a.g2, a.x, b.x)
