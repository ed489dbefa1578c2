"""Smooth approximations of the three supported losses, with incremental state.

Variants
--------
linf      max-residual smoothing: mu * log of the mean exponential of the
          residuals of the doubled system [A; -A], b -> (b; -b).
l1        per-row Huber smoothing of |r_j| with threshold mu * v_j**2,
          where v_j is the squared Euclidean norm of row j.
adaboost  log of the mean exponential of label-scaled rows; this loss is
          already the mu = 1 smoothing of max_j b_j (Ax)_j, so mu is fixed.

A SmoothState carries x, the residual r = Ax - b of the working system,
and for the exponential variants a normalization accumulator that lets
single-coordinate updates run in O(column nnz) without touching the
other rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import ProblemData, stack_linf

KINDS = ("linf", "l1", "adaboost")

# accumulator band outside which incremental exponentials lose accuracy
LSE_ACC_LO = 1e-6
LSE_ACC_HI = 1e6


@dataclass(frozen=True)
class SmoothedLoss:
    """A smoothing variant bound to its working matrix.

    pd is the prepared system (doubled rows for linf, label-folded rows
    for adaboost), not the raw dataset; build it with prepare_problem.
    huber_a holds the per-row thresholds and is set for l1 only.
    """

    kind: str
    pd: ProblemData
    mu: float
    huber_a: np.ndarray | None = None

    @property
    def denom(self) -> int:
        """Row count normalizing the mean exponential."""
        return self.pd.m


def prepare_problem(pd: ProblemData, app: str) -> ProblemData:
    """Map the raw dataset onto the system the loss actually evaluates.

    linf doubles the rows to [A; -A]; adaboost scales each row by its
    label and zeroes the right-hand side; l1 passes through.
    """
    if app == "linf":
        return stack_linf(pd)
    if app == "l1":
        return pd
    if app == "adaboost":
        rows, cols, vals = pd.triplets()
        return ProblemData.from_coo(
            pd.m, pd.n, rows, cols, vals * pd.b[rows], np.zeros(pd.m)
        )
    raise ValueError(f"unknown app {app!r}")


def make_loss(working: ProblemData, app: str, mu: float) -> SmoothedLoss:
    """Bind a smoothing variant to an already prepared matrix.

    mu must be positive; adaboost only accepts mu = 1 (its objective is
    by definition the unit smoothing).  For l1 every row must be
    nonempty, since the thresholds scale with the squared row norms.
    """
    if app not in KINDS:
        raise ValueError(f"unknown app {app!r}")
    if mu <= 0:
        raise ValueError("mu must be positive")
    if app == "adaboost" and mu != 1.0:
        raise ValueError("adaboost fixes mu = 1")
    huber_a = None
    if app == "l1":
        v = np.zeros(working.m)
        for j in range(working.m):
            _, vals = working.row(j)
            v[j] = np.dot(vals, vals)
        if np.any(v == 0.0):
            j = int(np.flatnonzero(v == 0.0)[0])
            raise ValueError(f"l1 smoothing undefined: row {j} has no nonzeros")
        huber_a = mu * v * v
    return SmoothedLoss(kind=app, pd=working, mu=mu, huber_a=huber_a)


def loss_constants(app: str, working: ProblemData) -> tuple[float, float]:
    """(sigma, D): strong-convexity modulus of the prox center and the
    diameter-type constant bounding f - f_mu <= mu * D.

    Computed on the working matrix: linf/adaboost give (1, log of row
    count); l1 gives (1, half the sum of squared row weights v_j**2).
    """
    if app in ("linf", "adaboost"):
        if working.m < 1:
            raise ValueError("need at least one row")
        return 1.0, float(np.log(working.m))
    if app == "l1":
        total = 0.0
        for j in range(working.m):
            _, vals = working.row(j)
            vj = float(np.dot(vals, vals))
            total += vj * vj
        return 1.0, 0.5 * total
    raise ValueError(f"unknown app {app!r}")


def _residual(pd: ProblemData, x: np.ndarray) -> np.ndarray:
    r = -pd.b.copy()
    for i in np.flatnonzero(x):
        rows, vals = pd.col(int(i))
        r[rows] += vals * x[i]
    return r


def value_from_residual(loss: SmoothedLoss, r: np.ndarray) -> float:
    """f_mu evaluated directly from a residual vector (max-shifted)."""
    # overflow to inf is the caller's divergence signal, not an error here
    with np.errstate(over="ignore"):
        if loss.kind == "l1":
            a = loss.huber_a
            ar = np.abs(r)
            # q = min(|r|, a) gives q^2/(2a) + (|r| - q) in both regimes
            # without squaring huge residuals
            q = np.minimum(ar, a)
            return float((q * q / (2 * a) + (ar - q)).sum())
        rbar = float(r.max())
        s = float(np.exp((r - rbar) / loss.mu).sum()) / loss.denom
        return rbar + loss.mu * float(np.log(s))


def evaluate(loss: SmoothedLoss, x: np.ndarray) -> float:
    """f_mu(x) from scratch; the reference the incremental state drifts from."""
    return value_from_residual(loss, _residual(loss.pd, np.asarray(x, dtype=np.float64)))


def nonsmooth_value(loss: SmoothedLoss, x: np.ndarray) -> float:
    """The unsmoothed objective f(x) the variant approximates."""
    r = _residual(loss.pd, np.asarray(x, dtype=np.float64))
    if loss.kind == "l1":
        return float(np.abs(r).sum())
    return float(r.max())


@dataclass
class SmoothState:
    """Mutable iterate state: x, residual, and normalization bookkeeping.

    fmu caches f_mu(x) as of the last recompute.  For the exponential
    variants, lse_acc tracks the mean of exp((r_j - fmu)/mu), which is
    exactly 1 right after a recompute and drifts multiplicatively as
    updates land; the current value is fmu + mu*log(lse_acc).
    """

    loss: SmoothedLoss
    x: np.ndarray
    r: np.ndarray
    fmu: float
    lse_acc: float
    staleness: int

    def value(self) -> float:
        if self.loss.kind == "l1":
            return value_from_residual(self.loss, self.r)
        return self.fmu + self.loss.mu * float(np.log(self.lse_acc))

    def _col_z(self, rows: np.ndarray) -> np.ndarray:
        loss = self.loss
        if loss.kind == "l1":
            return np.clip(self.r[rows] / loss.huber_a[rows], -1.0, 1.0)
        scale = loss.denom * self.lse_acc
        return np.exp((self.r[rows] - self.fmu) / loss.mu) / scale

    def partial_gradient(self, i: int) -> float:
        """Derivative of f_mu along coordinate i, from maintained state."""
        rows, vals = self.loss.pd.col(i)
        if rows.size == 0:
            return 0.0
        return float(np.dot(vals, self._col_z(rows)))

    def full_gradient(self) -> np.ndarray:
        """All partial derivatives; same normalization path as partial_gradient."""
        pd = self.loss.pd
        g = np.empty(pd.n)
        for i in range(pd.n):
            rows, vals = pd.col(i)
            g[i] = np.dot(vals, self._col_z(rows)) if rows.size else 0.0
        return g

    def apply_update(self, i: int, h: float) -> None:
        """x_i += h in O(nnz of column i), keeping r and lse_acc in sync."""
        if h == 0.0:
            return
        loss = self.loss
        rows, vals = loss.pd.col(i)
        self.x[i] += h
        old = self.r[rows]
        new = old + vals * h
        if loss.kind != "l1":
            shift = (new - self.fmu) / loss.mu
            shift_old = (old - self.fmu) / loss.mu
            # overflow to inf is fine: it trips needs_recompute
            with np.errstate(over="ignore"):
                self.lse_acc += float(np.exp(shift).sum() - np.exp(shift_old).sum()) / loss.denom
        self.r[rows] = new
        self.staleness += 1

    def needs_recompute(self) -> bool:
        """Staleness policy: refresh every n updates, or as soon as the
        accumulator leaves [1e-6, 1e6] (or stops being finite)."""
        if self.staleness >= self.loss.pd.n:
            return True
        if self.loss.kind == "l1":
            return False
        return not (LSE_ACC_LO <= self.lse_acc <= LSE_ACC_HI)

    def recompute(self) -> None:
        """Rebuild r from x and reset the normalization; idempotent."""
        self.r = _residual(self.loss.pd, self.x)
        self.fmu = value_from_residual(self.loss, self.r)
        self.lse_acc = 1.0
        self.staleness = 0


def init_state(loss: SmoothedLoss, x0: np.ndarray | None = None) -> SmoothState:
    """Fresh state at x0 (default 0, where r = -b)."""
    x = np.zeros(loss.pd.n) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    if x.shape != (loss.pd.n,):
        raise ValueError(f"x0 must have shape ({loss.pd.n},)")
    st = SmoothState(loss=loss, x=x, r=np.empty(0), fmu=0.0, lse_acc=1.0, staleness=0)
    st.recompute()
    return st
