"""Closed-form gradients for the binary, batch-of-two mixing analysis.

Sample 1 carries label y1 = 1 (major class), sample 2 carries y2 = 0
(minor class).  The loss is the sum of the two binary cross-entropies
on the mixed intermediate features

    zt1 = (1 - lam1) g1 + lam1 g2
    zt2 = (1 - lam2) g2 + lam2 g1,

with class probability sigmoid(w . f).  With an optional linear head V
the feature is f = V^T z; without it f = z (identity h).  These forms
are the ground truth the autodiff path is checked against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["BinaryCase", "erm_grads", "mfw_grads", "linear_head_grads",
           "check_reduction", "binary_loss"]


def _sigmoid(a):
    return 1.0 / (1.0 + np.exp(-a))


@dataclass
class BinaryCase:
    w: np.ndarray          # linear boundary in feature space
    g1: np.ndarray         # intermediate feature of the major sample (y=1)
    g2: np.ndarray         # intermediate feature of the minor sample (y=0)
    lambda1: float = 0.0
    lambda2: float = 0.0
    V: np.ndarray | None = None   # optional linear head, feature = V^T z

    y1: int = 1
    y2: int = 0

    def mixed(self) -> tuple[np.ndarray, np.ndarray]:
        zt1 = (1.0 - self.lambda1) * self.g1 + self.lambda1 * self.g2
        zt2 = (1.0 - self.lambda2) * self.g2 + self.lambda2 * self.g1
        return zt1, zt2

    def feature(self, z: np.ndarray) -> np.ndarray:
        return z if self.V is None else self.V.T @ z


def binary_loss(case: BinaryCase) -> float:
    """Sum of the two binary cross-entropies on the mixed features."""
    zt1, zt2 = case.mixed()
    p1 = _sigmoid(case.w @ case.feature(zt1))
    p2 = _sigmoid(case.w @ case.feature(zt2))
    return float(-np.log(p1) - np.log(1.0 - p2))


def erm_grads(case: BinaryCase) -> tuple[np.ndarray, np.ndarray]:
    """Unmixed feature gradients (sigma(w.g_i) - y_i) w."""
    e1 = _sigmoid(case.w @ case.g1) - case.y1
    e2 = _sigmoid(case.w @ case.g2) - case.y2
    return e1 * case.w, e2 * case.w


def mfw_grads(case: BinaryCase) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Feature and classifier gradients with mixing, identity h.

    The adjoint of each mixed feature, (sigma(w.zt_i) - y_i) w, is
    split back onto g1 and g2 by the mixing coefficients; the lambda2
    cross-term onto g1 is included so the general two-sided mix is
    covered.
    """
    zt1, zt2 = case.mixed()
    e1 = _sigmoid(case.w @ zt1) - case.y1
    e2 = _sigmoid(case.w @ zt2) - case.y2
    grad_g1 = (1.0 - case.lambda1) * e1 * case.w + case.lambda2 * e2 * case.w
    grad_g2 = case.lambda1 * e1 * case.w + (1.0 - case.lambda2) * e2 * case.w
    grad_w = e1 * zt1 + e2 * zt2
    return grad_g1, grad_g2, grad_w


def linear_head_grads(case: BinaryCase) -> tuple[np.ndarray, np.ndarray]:
    """Feature gradients when h is the linear map V: f = V^T z."""
    if case.V is None:
        raise ValueError("case has no linear head V")
    zt1, zt2 = case.mixed()
    Vw = case.V @ case.w
    e1 = _sigmoid(case.w @ (case.V.T @ zt1)) - case.y1
    e2 = _sigmoid(case.w @ (case.V.T @ zt2)) - case.y2
    grad_g1 = (1.0 - case.lambda1) * e1 * Vw + case.lambda2 * e2 * Vw
    grad_g2 = case.lambda1 * e1 * Vw + (1.0 - case.lambda2) * e2 * Vw
    return grad_g1, grad_g2


def check_reduction(case: BinaryCase) -> tuple[bool | None, float, float]:
    """Compare ||grad_g2|| with and without mixing for a misclassified
    minor sample (lambda2 = 0 required).

    Returns (reduced, mfw_norm, erm_norm); reduced is None when the
    preconditions do not hold (not applicable rather than a failure).
    """
    _, erm_g2 = erm_grads(case)
    _, mfw_g2, _ = mfw_grads(case)
    erm_norm = float(np.linalg.norm(erm_g2))
    mfw_norm = float(np.linalg.norm(mfw_g2))
    misclassified = _sigmoid(case.w @ case.g2) > 0.5
    if case.lambda2 != 0.0 or not misclassified:
        return None, mfw_norm, erm_norm
    return mfw_norm <= erm_norm, mfw_norm, erm_norm
