"""One-vs-rest soft-margin SVM trained by sequential minimal optimization,
with Platt sigmoid calibration of the decision values.

The dual problem is solved pairwise: the outer loop alternates between full
sweeps and sweeps over non-bound multipliers, the inner step picks the
partner maximizing the error gap, with seeded-rotation fallbacks over the
remaining candidates. Training stops when a full sweep changes nothing and
every multiplier satisfies the KKT conditions within tolerance; exceeding
the iteration cap raises a convergence error carrying diagnostics.

Calibration fits P(y=1 | f) = 1 / (1 + exp(A f + B)) on the training
decision values by regularized maximum likelihood (Newton steps with
backtracking), using the standard smoothed targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceError, DegenerateTrainingError, InvalidArgumentError, SchemaMismatchError


@dataclass(frozen=True)
class SvmParams:
    kernel: str = "rbf"  # "linear" | "rbf"
    c: float = 1.0
    gamma: float | None = None  # None -> 1 / n_features
    tol: float = 1e-3  # KKT violation tolerance
    max_sweeps: int = 1000  # cap on outer-loop sweeps

    def __post_init__(self):
        if self.kernel not in ("linear", "rbf"):
            raise InvalidArgumentError(f"unknown kernel {self.kernel!r}")
        if self.c <= 0:
            raise InvalidArgumentError(f"C must be positive, got {self.c}")


def _kernel_matrix(a: np.ndarray, b: np.ndarray, kernel: str, gamma: float) -> np.ndarray:
    if kernel == "linear":
        return a @ b.T
    a2 = (a * a).sum(axis=1)[:, None]
    b2 = (b * b).sum(axis=1)[None, :]
    return np.exp(-gamma * (a2 + b2 - 2.0 * (a @ b.T)))


class _Smo:
    """Dual solver state for one binary problem."""

    def __init__(self, k: np.ndarray, y: np.ndarray, c: float, tol: float, rng):
        self.k = k
        self.y = y.astype(np.float64)
        self.c = c
        self.tol = tol
        self.rng = rng
        self.n = len(y)
        self.alpha = np.zeros(self.n)
        self.b = 0.0
        # with alpha = 0 the decision value is 0 everywhere, so E_i = -y_i
        self.errors = -self.y.copy()
        self.eps = 1e-12

    def decision(self, i: int) -> float:
        return float((self.alpha * self.y) @ self.k[:, i] - self.b)

    def _take_step(self, i1: int, i2: int) -> bool:
        if i1 == i2:
            return False
        a1, a2 = self.alpha[i1], self.alpha[i2]
        y1, y2 = self.y[i1], self.y[i2]
        e1, e2 = self.errors[i1], self.errors[i2]
        s = y1 * y2

        if s > 0:
            lo, hi = max(0.0, a1 + a2 - self.c), min(self.c, a1 + a2)
        else:
            lo, hi = max(0.0, a2 - a1), min(self.c, self.c + a2 - a1)
        if lo >= hi:
            return False

        k11, k12, k22 = self.k[i1, i1], self.k[i1, i2], self.k[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > 0:
            a2_new = a2 + y2 * (e1 - e2) / eta
            a2_new = min(max(a2_new, lo), hi)
        else:
            # flat or concave direction: evaluate the objective at both ends
            f1 = y1 * (e1 + self.b) - a1 * k11 - s * a2 * k12
            f2 = y2 * (e2 + self.b) - s * a1 * k12 - a2 * k22
            l1 = a1 + s * (a2 - lo)
            h1 = a1 + s * (a2 - hi)
            obj_lo = (
                l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 + 0.5 * lo * lo * k22 + s * lo * l1 * k12
            )
            obj_hi = (
                h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 + 0.5 * hi * hi * k22 + s * hi * h1 * k12
            )
            if obj_lo < obj_hi - self.eps:
                a2_new = lo
            elif obj_lo > obj_hi + self.eps:
                a2_new = hi
            else:
                a2_new = a2
        if abs(a2_new - a2) < self.eps * (a2_new + a2 + self.eps):
            return False

        a1_new = a1 + s * (a2 - a2_new)
        # keep a1 inside the box against accumulated rounding
        a1_new = min(max(a1_new, 0.0), self.c)

        b1 = e1 + y1 * (a1_new - a1) * k11 + y2 * (a2_new - a2) * k12 + self.b
        b2 = e2 + y1 * (a1_new - a1) * k12 + y2 * (a2_new - a2) * k22 + self.b
        if 0.0 < a1_new < self.c:
            b_new = b1
        elif 0.0 < a2_new < self.c:
            b_new = b2
        else:
            b_new = (b1 + b2) / 2.0

        da1, da2, db = a1_new - a1, a2_new - a2, b_new - self.b
        self.errors += y1 * da1 * self.k[:, i1] + y2 * da2 * self.k[:, i2] - db
        self.alpha[i1], self.alpha[i2] = a1_new, a2_new
        self.b = b_new
        return True

    def _examine(self, i2: int) -> bool:
        y2, a2, e2 = self.y[i2], self.alpha[i2], self.errors[i2]
        r2 = e2 * y2
        if not ((r2 < -self.tol and a2 < self.c) or (r2 > self.tol and a2 > 0)):
            return False

        non_bound = np.flatnonzero((self.alpha > 0) & (self.alpha < self.c))
        if len(non_bound) > 1:
            i1 = int(non_bound[np.argmax(np.abs(self.errors[non_bound] - e2))])
            if self._take_step(i1, i2):
                return True
        if len(non_bound):
            start = int(self.rng.integers(len(non_bound)))
            for offset in range(len(non_bound)):
                if self._take_step(int(non_bound[(start + offset) % len(non_bound)]), i2):
                    return True
        start = int(self.rng.integers(self.n))
        for offset in range(self.n):
            if self._take_step((start + offset) % self.n, i2):
                return True
        return False

    def max_kkt_violation(self) -> float:
        worst = 0.0
        for i in range(self.n):
            yu = self.y[i] * (self.errors[i] + self.y[i])  # y_i * u_i
            if self.alpha[i] < self.eps:
                worst = max(worst, 1.0 - yu)
            elif self.alpha[i] > self.c - self.eps:
                worst = max(worst, yu - 1.0)
            else:
                worst = max(worst, abs(yu - 1.0))
        return worst

    def solve(self, max_sweeps: int):
        examine_all = True
        changed = 0
        for sweep in range(max_sweeps):
            changed = 0
            candidates = (
                range(self.n)
                if examine_all
                else np.flatnonzero((self.alpha > 0) & (self.alpha < self.c))
            )
            for i in candidates:
                changed += self._examine(int(i))
            if examine_all:
                if changed == 0:
                    return sweep + 1
                examine_all = False
            elif changed == 0:
                examine_all = True
        raise ConvergenceError(
            f"SMO did not converge in {max_sweeps} sweeps "
            f"(last sweep changed {changed} pairs, max KKT violation "
            f"{self.max_kkt_violation():.3e})"
        )


def _fit_platt(decision: np.ndarray, positive: np.ndarray) -> tuple[float, float]:
    """Sigmoid parameters (A, B) by regularized maximum likelihood."""
    n_pos = int(positive.sum())
    n_neg = len(positive) - n_pos
    hi = (n_pos + 1.0) / (n_pos + 2.0)
    lo = 1.0 / (n_neg + 2.0)
    t = np.where(positive, hi, lo)

    def nll(a: float, b: float) -> float:
        fapb = decision * a + b
        return float(
            np.sum(np.where(fapb >= 0, t * fapb + np.log1p(np.exp(-fapb)),
                            (t - 1.0) * fapb + np.log1p(np.exp(fapb))))
        )

    a, b = 0.0, math.log((n_neg + 1.0) / (n_pos + 1.0))
    fval = nll(a, b)
    sigma = 1e-12
    for _ in range(100):
        fapb = decision * a + b
        p = np.where(fapb >= 0, np.exp(-fapb) / (1.0 + np.exp(-fapb)),
                     1.0 / (1.0 + np.exp(fapb)))
        d1 = t - p
        d2 = p * (1.0 - p)
        g1 = float(np.sum(decision * d1))
        g2 = float(np.sum(d1))
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            break
        h11 = float(np.sum(decision * decision * d2)) + sigma
        h22 = float(np.sum(d2)) + sigma
        h21 = float(np.sum(decision * d2))
        det = h11 * h22 - h21 * h21
        da = -(h22 * g1 - h21 * g2) / det
        db = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * da + g2 * db

        step = 1.0
        while step >= 1e-10:
            a_new, b_new = a + step * da, b + step * db
            f_new = nll(a_new, b_new)
            if f_new < fval + 1e-4 * step * gd:
                a, b, fval = a_new, b_new, f_new
                break
            step /= 2.0
        else:
            break
    return a, b


@dataclass(frozen=True)
class BinarySvm:
    support_vectors: np.ndarray  # (m, d)
    coef: np.ndarray  # (m,) alpha_i * y_i
    bias: float
    platt_a: float
    platt_b: float

    def decision(self, x: np.ndarray, kernel: str, gamma: float) -> np.ndarray:
        k = _kernel_matrix(np.atleast_2d(x), self.support_vectors, kernel, gamma)
        return k @ self.coef - self.bias

    def probability(self, x: np.ndarray, kernel: str, gamma: float) -> np.ndarray:
        f = self.decision(x, kernel, gamma)
        fapb = f * self.platt_a + self.platt_b
        return np.where(fapb >= 0, np.exp(-fapb) / (1.0 + np.exp(-fapb)),
                        1.0 / (1.0 + np.exp(fapb)))


@dataclass(frozen=True)
class SvmModel:
    models: tuple[BinarySvm, ...]  # one per class code, ascending
    classes: tuple[int, ...]
    n_features: int
    params: SvmParams
    gamma: float

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "n_features": self.n_features,
            "gamma": self.gamma,
            "params": {
                "kernel": self.params.kernel,
                "c": self.params.c,
                "gamma": self.params.gamma,
                "tol": self.params.tol,
                "max_sweeps": self.params.max_sweeps,
            },
            "models": [
                {
                    "support_vectors": m.support_vectors.tolist(),
                    "coef": m.coef.tolist(),
                    "bias": m.bias,
                    "platt_a": m.platt_a,
                    "platt_b": m.platt_b,
                }
                for m in self.models
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvmModel":
        return cls(
            models=tuple(
                BinarySvm(
                    support_vectors=np.asarray(m["support_vectors"], dtype=np.float64),
                    coef=np.asarray(m["coef"], dtype=np.float64),
                    bias=float(m["bias"]),
                    platt_a=float(m["platt_a"]),
                    platt_b=float(m["platt_b"]),
                )
                for m in d["models"]
            ),
            classes=tuple(int(c) for c in d["classes"]),
            n_features=int(d["n_features"]),
            params=SvmParams(**d["params"]),
            gamma=float(d["gamma"]),
        )


def train_svm_ovr(X, y, params: SvmParams, seed) -> SvmModel:
    """One calibrated binary margin classifier per class present in ``y``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise InvalidArgumentError(f"bad training shapes {X.shape} / {y.shape}")
    classes = tuple(int(c) for c in np.unique(y))
    if len(classes) < 2:
        raise DegenerateTrainingError(f"need >= 2 classes, got {classes}")
    gamma = params.gamma if params.gamma is not None else 1.0 / X.shape[1]

    k = _kernel_matrix(X, X, params.kernel, gamma)
    models = []
    seeds = np.random.SeedSequence(seed).spawn(len(classes))
    for cls_code, child in zip(classes, seeds):
        target = np.where(y == cls_code, 1.0, -1.0)
        smo = _Smo(k, target, params.c, params.tol, np.random.default_rng(child))
        smo.solve(params.max_sweeps)
        decision = (smo.alpha * target) @ k - smo.b
        a, b = _fit_platt(decision, target > 0)
        keep = smo.alpha > 1e-12
        models.append(
            BinarySvm(
                support_vectors=X[keep].copy(),
                coef=(smo.alpha * target)[keep],
                bias=smo.b,
                platt_a=a,
                platt_b=b,
            )
        )
    return SvmModel(
        models=tuple(models),
        classes=classes,
        n_features=X.shape[1],
        params=params,
        gamma=gamma,
    )


def svm_decision_values(model: SvmModel, X) -> np.ndarray:
    """Raw per-class decision values, shape (n, n_classes_present)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise SchemaMismatchError(f"expected {model.n_features} features, got shape {X.shape}")
    return np.stack(
        [m.decision(X, model.params.kernel, model.gamma) for m in model.models], axis=1
    )


def svm_predict_proba(model: SvmModel, X, n_classes: int | None = None) -> np.ndarray:
    """Calibrated per-class probabilities, renormalized to a simplex.

    ``n_classes`` widens the output to a fixed class count (absent classes
    get probability 0), so callers can align outputs across learners.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise SchemaMismatchError(f"expected {model.n_features} features, got shape {X.shape}")
    raw = np.stack(
        [m.probability(X, model.params.kernel, model.gamma) for m in model.models], axis=1
    )
    raw = np.maximum(raw, 1e-300)  # saturated sigmoids must not zero a whole row
    width = n_classes if n_classes is not None else max(model.classes) + 1
    out = np.zeros((len(X), width))
    for j, cls_code in enumerate(model.classes):
        out[:, cls_code] = raw[:, j]
    return out / out.sum(axis=1, keepdims=True)
