"""Reverse-mode autodiff over a small tape of the ops the MLP needs.

The tape records affine maps, ReLU, constant-coefficient convex mixes
and softmax cross-entropy.  Values are float64 ndarrays; a tape is
rebuilt per batch, so no graph reuse or higher-order support.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

__all__ = ["Tape", "Var", "finite_diff_grad"]


class Var:
    """Handle to a node on a tape."""

    __slots__ = ("tape", "idx")

    def __init__(self, tape: "Tape", idx: int):
        self.tape = tape
        self.idx = idx

    @property
    def value(self) -> np.ndarray:
        return self.tape.values[self.idx]

    @property
    def shape(self) -> tuple:
        return self.tape.values[self.idx].shape


class Tape:
    """Topologically ordered record of primitive operations.

    ``values[i]`` is node i's forward value; after :meth:`backward`,
    ``adjoints[i]`` holds d(loss)/d(node i).
    """

    def __init__(self):
        self.values: list[np.ndarray] = []
        # each entry: (input indices, backward closure) or None for leaves
        self._backs: list[tuple[tuple[int, ...], Callable] | None] = []

    # -- node construction -------------------------------------------------

    def _push(self, value: np.ndarray, back=None) -> Var:
        value = np.asarray(value, dtype=np.float64)
        if not np.all(np.isfinite(value)):
            raise FloatingPointError("non-finite value recorded on tape")
        self.values.append(value)
        self._backs.append(back)
        return Var(self, len(self.values) - 1)

    def leaf(self, value: np.ndarray) -> Var:
        """Record an input/parameter node."""
        return self._push(value)

    def affine(self, x: Var, W: Var, b: Var | None = None) -> Var:
        """y = x @ W (+ b), with x [B,d_in], W [d_in,d_out], b [d_out]."""
        xv, Wv = x.value, W.value
        if xv.ndim != 2 or Wv.ndim != 2 or xv.shape[1] != Wv.shape[0]:
            raise ValueError(f"affine shape mismatch: x {xv.shape} vs W {Wv.shape}")
        y = xv @ Wv
        if b is not None:
            bv = b.value
            if bv.shape != (Wv.shape[1],):
                raise ValueError(f"affine bias shape {bv.shape} vs W {Wv.shape}")
            y = y + bv

        def back(adj, acc):
            acc[x.idx] += adj @ Wv.T
            acc[W.idx] += xv.T @ adj
            if b is not None:
                acc[b.idx] += adj.sum(axis=0)

        inputs = (x.idx, W.idx) if b is None else (x.idx, W.idx, b.idx)
        return self._push(y, (inputs, back))

    def relu(self, x: Var) -> Var:
        """Elementwise max(0, x); subgradient at 0 is 0."""
        xv = x.value
        mask = xv > 0

        def back(adj, acc):
            acc[x.idx] += adj * mask

        return self._push(np.maximum(xv, 0.0), ((x.idx,), back))

    def convex_mix(self, z1: Var, z2: Var, lam: np.ndarray | float) -> Var:
        """Per-row convex combination (1-lam)*z1 + lam*z2.

        ``lam`` is a constant (scalar or length-B vector); no gradient
        flows into it.
        """
        z1v, z2v = z1.value, z2.value
        if z1v.shape != z2v.shape:
            raise ValueError(f"convex_mix shape mismatch: {z1v.shape} vs {z2v.shape}")
        lam = np.asarray(lam, dtype=np.float64)
        if lam.ndim == 1:
            lam = lam[:, None]
        y = (1.0 - lam) * z1v + lam * z2v

        def back(adj, acc):
            acc[z1.idx] += (1.0 - lam) * adj
            acc[z2.idx] += lam * adj

        return self._push(y, ((z1.idx, z2.idx), back))

    def gather_rows(self, x: Var, perm: np.ndarray) -> Var:
        """Row permutation x[perm]; adjoint scatters back."""
        perm = np.asarray(perm)

        def back(adj, acc):
            np.add.at(acc[x.idx], perm, adj)

        return self._push(x.value[perm], ((x.idx,), back))

    def softmax_xent(self, logits: Var, labels: np.ndarray, sample_weights: np.ndarray) -> Var:
        """Weighted mean cross-entropy, normalized by the weight sum.

        loss = sum_n w_n * (-log softmax(logits_n)[y_n]) / sum_n w_n
        """
        lv = logits.value
        labels = np.asarray(labels)
        w = np.asarray(sample_weights, dtype=np.float64)
        B, C = lv.shape
        if labels.shape != (B,) or w.shape != (B,):
            raise ValueError(f"labels/weights must have length {B}")
        if labels.min() < 0 or labels.max() >= C:
            raise ValueError(f"label out of range [0, {C})")
        if np.any(w < 0):
            raise ValueError("sample_weights must be nonnegative")
        wsum = w.sum()
        if wsum == 0:
            raise ValueError("sample_weights sum to zero")

        shifted = lv - lv.max(axis=1, keepdims=True)
        logz = np.log(np.exp(shifted).sum(axis=1))
        logp = shifted[np.arange(B), labels] - logz
        loss = -(w * logp).sum() / wsum
        probs = np.exp(shifted - logz[:, None])

        def back(adj, acc):
            g = probs.copy()
            g[np.arange(B), labels] -= 1.0
            acc[logits.idx] += adj * g * (w / wsum)[:, None]

        return self._push(np.array(loss), ((logits.idx,), back))

    def scale(self, x: Var, c: float) -> Var:
        """c * x for a constant c."""

        def back(adj, acc):
            acc[x.idx] += c * adj

        return self._push(c * x.value, ((x.idx,), back))

    def add(self, a: Var, b: Var) -> Var:
        if a.value.shape != b.value.shape:
            raise ValueError(f"add shape mismatch: {a.value.shape} vs {b.value.shape}")

        def back(adj, acc):
            acc[a.idx] += adj
            acc[b.idx] += adj

        return self._push(a.value + b.value, ((a.idx, b.idx), back))

    # -- reverse pass ------------------------------------------------------

    def backward(self, loss: Var) -> list[np.ndarray]:
        """Populate and return adjoints for every node; loss must be scalar."""
        if loss.value.ndim != 0 and loss.value.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.value.shape}")
        adjoints = [np.zeros_like(v) for v in self.values]
        adjoints[loss.idx] = np.ones_like(self.values[loss.idx])
        for i in range(loss.idx, -1, -1):
            rec = self._backs[i]
            if rec is None:
                continue
            _, back = rec
            back(adjoints[i], adjoints)
        self.adjoints = adjoints
        return adjoints

    def grad(self, loss: Var, wrt: Var) -> np.ndarray:
        return self.backward(loss)[wrt.idx]


def finite_diff_grad(f: Callable[[np.ndarray], float], theta: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function, component-wise."""
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.zeros_like(theta)
    flat = theta.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = f(theta)
        flat[i] = orig - step
        fm = f(theta)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * step)
    return grad
