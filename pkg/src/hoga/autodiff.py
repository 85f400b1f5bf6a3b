"""A small reverse-mode automatic differentiation engine over float64 arrays.

Operations executed inside an active :class:`Tape` are recorded together with
a closure that maps the output gradient to input gradients. The op set is
closed and deliberately small: dense/sparse matmul, a handful of elementwise
maps, gathers, segment softmax and the sparse weighted scatter used by the
attention layers.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
import scipy.sparse as sp


class NonFiniteError(FloatingPointError):
    """An operation produced NaN or Inf."""


class Tensor:
    __slots__ = ("value", "requires_grad", "name", "__weakref__")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        if sp.issparse(value):
            value = sp.csr_matrix(value, dtype=np.float64)
        else:
            value = np.asarray(value, dtype=np.float64)
        self.value = value
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def numpy(self) -> np.ndarray:
        return self.value.toarray() if sp.issparse(self.value) else self.value

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"


def parameter(value, name: str | None = None) -> Tensor:
    return Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)


class Tape:
    """Records differentiable operations while active (``with Tape() as t:``)."""

    _stack: list["Tape"] = []

    def __init__(self):
        self.records: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []

    def __enter__(self):
        Tape._stack.append(self)
        return self

    def __exit__(self, *exc):
        Tape._stack.pop()
        return False

    @classmethod
    def active(cls) -> "Tape | None":
        return cls._stack[-1] if cls._stack else None

    def gradients(self, loss: Tensor) -> dict[Tensor, np.ndarray]:
        """Gradients of a scalar ``loss`` w.r.t. every tensor on the tape
        that requires grad (intermediates included)."""
        if loss.value.size != 1:
            raise ValueError(f"loss must be scalar, got shape {loss.shape}")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
        keep: dict[int, Tensor] = {id(loss): loss}
        for out, inputs, backward in reversed(self.records):
            g = grads.get(id(out))
            if g is None:
                continue
            for inp, gi in zip(inputs, backward(g)):
                if gi is None or not inp.requires_grad:
                    continue
                _check(gi, f"backward of {out.name}")
                if id(inp) in grads:
                    grads[id(inp)] = grads[id(inp)] + gi
                else:
                    grads[id(inp)] = gi
                    keep[id(inp)] = inp
        return {keep[i]: g for i, g in grads.items()}


def backward(tape: Tape, loss: Tensor, params) -> list[np.ndarray]:
    """Gradient of ``loss`` for each tensor in ``params`` (zeros if unused)."""
    grads = tape.gradients(loss)
    return [grads.get(p, np.zeros_like(p.value)) for p in params]


def _check(value: np.ndarray, op: str) -> None:
    data = value.data if sp.issparse(value) else value
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"{op} produced non-finite values")


def _emit(op: str, value, inputs: tuple[Tensor, ...], backward: Callable) -> Tensor:
    _check(value, op)
    tape = Tape.active()
    needs = any(t.requires_grad for t in inputs)
    out = Tensor(value, requires_grad=needs and tape is not None, name=op)
    if out.requires_grad:
        tape.records.append((out, inputs, backward))
    return out


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _segment_sum(values: np.ndarray, index: np.ndarray, n: int) -> np.ndarray:
    """Sum rows of ``values`` into ``n`` buckets given by ``index`` (deterministic)."""
    if values.ndim == 1:
        return np.bincount(index, weights=values, minlength=n)
    m = len(index)
    s = sp.csr_matrix((np.ones(m), (index, np.arange(m))), shape=(n, m))
    return np.asarray(s @ values)


# -- linear algebra ---------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape[-1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    av, bv = a.value, b.value
    out = np.asarray(av @ bv)

    def grad(g):
        ga = g @ bv.T if a.requires_grad else None
        gb = np.asarray(av.T @ g) if b.requires_grad else None
        return ga, gb
    return _emit("matmul", out, (a, b), grad)


def add(a, b) -> Tensor:
    """Elementwise sum; ``b`` may be a bias vector broadcast over rows of ``a``."""
    a, b = _as_tensor(a), _as_tensor(b)
    bias = b.value.ndim == 1 and a.value.ndim == 2
    if a.shape != b.shape and not (bias and b.shape[0] == a.shape[1]):
        raise ValueError(f"add shape mismatch: {a.shape} + {b.shape}")

    def grad(g):
        return g, (g.sum(axis=0) if bias else g)
    return _emit("add", a.value + b.value, (a, b), grad)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"sub shape mismatch: {a.shape} - {b.shape}")
    return _emit("sub", a.value - b.value, (a, b), lambda g: (g, -g))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"mul shape mismatch: {a.shape} * {b.shape}")
    av, bv = a.value, b.value
    return _emit("mul", av * bv, (a, b), lambda g: (g * bv, g * av))


def scale(x, c: float) -> Tensor:
    x = _as_tensor(x)
    return _emit("scale", c * x.value, (x,), lambda g: (c * g,))


def total(x) -> Tensor:
    x = _as_tensor(x)
    shape = x.shape
    return _emit("sum", np.asarray(x.value.sum()), (x,), lambda g: (np.full(shape, float(g)),))


# -- elementwise maps -------------------------------------------------------

def leaky_relu(x, slope: float = 0.2) -> Tensor:
    x = _as_tensor(x)
    d = np.where(x.value > 0, 1.0, slope)
    return _emit("leaky_relu", x.value * d, (x,), lambda g: (g * d,))


def elu(x) -> Tensor:
    x = _as_tensor(x)
    v = x.value
    neg = np.expm1(np.minimum(v, 0.0))
    out = np.where(v > 0, v, neg)
    d = np.where(v > 0, 1.0, neg + 1.0)
    return _emit("elu", out, (x,), lambda g: (g * d,))


def dropout(x, p: float, rng: np.random.Generator | None, training: bool = True) -> Tensor:
    """Inverted dropout; identity in eval mode. Sparse inputs drop stored entries only."""
    if not 0.0 <= p < 1.0:
        raise ValueError("dropout probability must lie in [0, 1)")
    x = _as_tensor(x)
    if not training or p == 0.0:
        return x
    if sp.issparse(x.value):
        keep = (rng.random(x.value.nnz) >= p) / (1.0 - p)
        out = x.value.copy()
        out.data = out.data * keep
        out.eliminate_zeros()
        return Tensor(out)
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return _emit("dropout", x.value * mask, (x,), lambda g: (g * mask,))


# -- graph primitives -------------------------------------------------------

def edge_scores(h, attn, dst: np.ndarray, src: np.ndarray) -> Tensor:
    """Raw pairwise scores ``attn[:d]·h[dst] + attn[d:]·h[src]`` per edge.

    This is ``aᵀ[h_dst ‖ h_src]`` evaluated without materialising the
    concatenation.
    """
    h, attn = _as_tensor(h), _as_tensor(attn)
    n, d = h.shape
    if attn.shape != (2 * d,):
        raise ValueError(f"attention vector must have shape ({2 * d},), got {attn.shape}")
    hv, av = h.value, attn.value
    left, right = hv @ av[:d], hv @ av[d:]

    def grad(g):
        gl = np.bincount(dst, weights=g, minlength=n)
        gr = np.bincount(src, weights=g, minlength=n)
        gh = np.outer(gl, av[:d]) + np.outer(gr, av[d:]) if h.requires_grad else None
        ga = np.concatenate([hv.T @ gl, hv.T @ gr]) if attn.requires_grad else None
        return gh, ga
    return _emit("edge_scores", left[dst] + right[src], (h, attn), grad)


def segment_softmax(scores, segments: np.ndarray, num_segments: int | None = None) -> Tensor:
    """Softmax within groups of entries sharing a segment id."""
    scores = _as_tensor(scores)
    segments = np.asarray(segments, dtype=np.int64)
    if segments.size == 0:
        raise ValueError("segment_softmax needs at least one entry")
    n = int(segments.max()) + 1 if num_segments is None else num_segments
    v = scores.value
    peak = np.full(n, -np.inf)
    np.maximum.at(peak, segments, v)
    ex = np.exp(v - peak[segments])
    out = ex / np.bincount(segments, weights=ex, minlength=n)[segments]

    def grad(g):
        dot = np.bincount(segments, weights=g * out, minlength=n)
        return (out * (g - dot[segments]),)
    return _emit("segment_softmax", out, (scores,), grad)


def weighted_scatter(alpha, dst: np.ndarray, src: np.ndarray, x, indptr: np.ndarray | None = None) -> Tensor:
    """``out[i] = sum over edges e with dst[e] == i of alpha[e] * x[src[e]]``.

    ``indptr`` may be passed when ``dst`` is sorted, skipping the COO sort.
    """
    alpha, x = _as_tensor(alpha), _as_tensor(x)
    n = x.shape[0]
    if len(dst) and (max(dst.max(), src.max()) >= n or min(dst.min(), src.min()) < 0):
        raise IndexError("edge index out of range")
    if indptr is None:
        mat = sp.csr_matrix((alpha.value, (dst, src)), shape=(n, n))
    else:
        mat = sp.csr_matrix((alpha.value, src, indptr), shape=(n, n))
    xv = x.value

    def grad(g):
        ga = np.einsum("ij,ij->i", g[dst], xv[src]) if alpha.requires_grad else None
        gx = np.asarray(mat.T @ g) if x.requires_grad else None
        return ga, gx
    return _emit("weighted_scatter", np.asarray(mat @ xv), (alpha, x), grad)


def nll_from_log_softmax(logits, labels: np.ndarray, mask: np.ndarray) -> Tensor:
    """Mean cross-entropy over the masked rows."""
    logits = _as_tensor(logits)
    rows = np.flatnonzero(mask)
    if rows.size == 0:
        raise ValueError("empty mask")
    z = logits.value[rows]
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    y = np.asarray(labels)[rows]
    loss = -logp[np.arange(rows.size), y].mean()

    def grad(g):
        d = np.exp(logp)
        d[np.arange(rows.size), y] -= 1.0
        full = np.zeros_like(logits.value)
        full[rows] = d * (float(g) / rows.size)
        return (full,)
    return _emit("nll", np.asarray(loss), (logits,), grad)


# -- verification -----------------------------------------------------------

def grad_check(f: Callable[[], Tensor], params, eps: float = 1e-5, max_coords: int = 200,
               seed: int = 0, floor: float = 1e-6) -> float:
    """Worst relative error between tape gradients and central differences.

    ``f`` must rebuild the scalar loss from the current parameter values.
    Parameters with more than ``max_coords`` entries are checked on a seeded
    subsample. Relative error is ``|a - n| / max(|a|, |n|, floor)``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    with Tape() as tape:
        loss = f()
    analytic = backward(tape, loss, params)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.value.reshape(-1)
        coords = np.arange(flat.size)
        if flat.size > max_coords:
            coords = rng.choice(flat.size, size=max_coords, replace=False)
        for c in coords:
            orig = flat[c]
            flat[c] = orig + eps
            up = float(f().value)
            flat[c] = orig - eps
            down = float(f().value)
            flat[c] = orig
            num = (up - down) / (2 * eps)
            a = ga.reshape(-1)[c]
            worst = max(worst, abs(a - num) / max(abs(a), abs(num), floor))
    return worst
