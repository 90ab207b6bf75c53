"""Minimal reverse-mode automatic differentiation over dense float64 tensors.

A :class:`Tape` records a define-by-run graph; every recorded tensor gets a
gradient after :func:`backward`. Tapes are single-threaded and rebuilt per
training iteration. Broadcasting is limited to scalar-against-tensor; layer
shapes are made explicit by the callers instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

UNARY_KINDS = ("sin", "cos", "exp", "neg", "square", "relu")
BINARY_KINDS = ("add", "sub", "mul")

# Ops whose output is finite whenever inputs are finite (|out| <= max(1, |in|))
# skip the explicit finiteness scan on the hot path.
_ALWAYS_FINITE = {"sin", "cos", "neg", "relu", "reshape"}


@dataclass
class Tensor:
    """Dense row-major value array plus an optional handle into the tape."""

    shape: tuple[int, ...]
    values: np.ndarray
    node_id: int | None = None
    tape: "Tape | None" = None

    @property
    def grad(self) -> np.ndarray:
        if self.tape is None or self.node_id is None:
            raise ValueError("tensor is not recorded on a tape")
        return self.tape.grad_of(self.node_id)

    def item(self) -> float:
        if self.values.size != 1:
            raise ValueError(f"item() needs a scalar tensor, got shape {self.shape}")
        return float(self.values.reshape(-1)[0])


class _Node:
    __slots__ = ("kind", "inputs", "value", "aux")

    def __init__(self, kind: str, inputs: tuple[int, ...], value: np.ndarray, aux=None):
        self.kind = kind
        self.inputs = inputs
        self.value = value
        self.aux = aux


class ArrayPool:
    """Shape-keyed recycling of owned arrays across tape rebuilds.

    Training rebuilds an identically-shaped graph every iteration; reusing
    warm buffers avoids large-allocation page faults that otherwise dominate
    the per-op cost. Only the training loop opts in; reclaimed arrays must no
    longer be referenced by the caller.
    """

    def __init__(self):
        self._free: dict[tuple[int, ...], list[np.ndarray]] = {}

    def empty(self, shape: tuple[int, ...]) -> np.ndarray:
        stack = self._free.get(shape)
        if stack:
            return stack.pop()
        return np.empty(shape)

    def reclaim(self, tape: "Tape") -> None:
        """Take back every owned array of a finished tape.

        Leaf values are excluded (they may view caller-owned data); views and
        aliased gradients are detected and pooled at most once.
        """
        seen: set[int] = set()
        grads = tape.grads if tape.grads else [None] * len(tape.nodes)
        for node, grad in zip(tape.nodes, grads):
            candidates = (grad,) if node.kind == "leaf" else (node.value, grad)
            for arr in candidates:
                if arr is None or arr.base is not None or id(arr) in seen:
                    continue
                seen.add(id(arr))
                self._free.setdefault(arr.shape, []).append(arr)
        tape.nodes = []
        tape.grads = []


class Tape:
    """Ordered op records plus, after backward, one gradient per node."""

    def __init__(self, pool: ArrayPool | None = None):
        self.nodes: list[_Node] = []
        self.grads: list[np.ndarray | None] = []
        self.pool = pool

    def _empty(self, shape: tuple[int, ...]) -> np.ndarray:
        return self.pool.empty(shape) if self.pool is not None else np.empty(shape)

    def _record(self, kind: str, inputs: tuple[int, ...], value: np.ndarray, aux=None) -> Tensor:
        if kind not in _ALWAYS_FINITE and not np.isfinite(value).all():
            raise FloatingPointError(f"non-finite values produced by op {kind!r}")
        self.nodes.append(_Node(kind, inputs, value, aux))
        self.grads.append(None)
        return Tensor(tuple(value.shape), value, node_id=len(self.nodes) - 1, tape=self)

    def grad_of(self, node_id: int) -> np.ndarray:
        g = self.grads[node_id]
        if g is None:
            raise ValueError("no gradient: call backward first (node may be unreachable)")
        return g

    def backward(self, root: Tensor) -> None:
        """Reverse accumulation of d(root)/d(node) for every reachable node."""
        if root.tape is not self or root.node_id is None:
            raise ValueError("root tensor is not on this tape")
        if root.values.size != 1:
            raise ValueError(f"backward root must be scalar, got shape {root.shape}")
        self.grads = [None] * len(self.nodes)
        self.grads[root.node_id] = np.ones_like(root.values)
        for nid in range(root.node_id, -1, -1):
            g = self.grads[nid]
            if g is None:
                continue
            node = self.nodes[nid]
            if node.kind == "leaf":
                continue
            # Accumulation is functional (replace, never mutate): pass-through
            # vjps alias the upstream gradient array, and in-place += would
            # corrupt gradients already finalized for later nodes.
            for iid, contrib in _vjp(node, g, self):
                prev = self.grads[iid]
                self.grads[iid] = contrib if prev is None else prev + contrib
        # Unreachable nodes still expose a zero gradient of matching shape.
        for nid in range(len(self.nodes)):
            if self.grads[nid] is None:
                self.grads[nid] = np.zeros_like(self.nodes[nid].value)


def _vjp(node: _Node, g: np.ndarray, tape: Tape):
    """Yield (input_id, gradient contribution) pairs for one node."""
    kind = node.kind
    nodes = tape.nodes
    if kind == "matmul":
        ia, ib = node.inputs
        a, b = nodes[ia].value, nodes[ib].value
        da = tape._empty(a.shape)
        np.matmul(g, b.T, out=da)
        db = tape._empty(b.shape)
        np.matmul(a.T, g, out=db)
        yield ia, da
        yield ib, db
    elif kind in UNARY_KINDS:
        (ix,) = node.inputs
        x = nodes[ix].value
        buf = tape._empty(x.shape)
        if kind == "sin":
            np.cos(x, out=buf)
            buf *= g
        elif kind == "cos":
            np.sin(x, out=buf)
            buf *= g
            np.negative(buf, out=buf)
        elif kind == "exp":
            np.multiply(g, node.value, out=buf)
        elif kind == "neg":
            np.negative(g, out=buf)
        elif kind == "square":
            np.multiply(g, x, out=buf)
            buf *= 2.0
        else:  # relu; subgradient 0 at 0
            np.multiply(g, x > 0, out=buf)
        yield ix, buf
    elif kind in BINARY_KINDS:
        ia, ib = node.inputs
        a, b = nodes[ia].value, nodes[ib].value
        scalar_b = b.size == 1 and a.size != 1
        if kind == "add":
            yield ia, g
            yield ib, g.sum().reshape(b.shape) if scalar_b else g
        elif kind == "sub":
            yield ia, g
            if scalar_b:
                yield ib, -g.sum().reshape(b.shape)
            else:
                neg = tape._empty(b.shape)
                np.negative(g, out=neg)
                yield ib, neg
        else:  # mul
            da = tape._empty(a.shape)
            np.multiply(g, b.reshape(-1)[0] if scalar_b else b, out=da)
            yield ia, da
            if scalar_b:
                yield ib, (g * a).sum().reshape(b.shape)
            else:
                db = tape._empty(b.shape)
                np.multiply(g, a, out=db)
                yield ib, db
    elif kind == "scale":
        (ix,) = node.inputs
        buf = tape._empty(g.shape)
        np.multiply(g, node.aux, out=buf)
        yield ix, buf
    elif kind == "mean_all":
        (ix,) = node.inputs
        x = nodes[ix].value
        buf = tape._empty(x.shape)
        buf.fill(float(g.reshape(-1)[0]) / x.size)
        yield ix, buf
    elif kind == "reshape":
        (ix,) = node.inputs
        yield ix, g.reshape(nodes[ix].value.shape)
    else:  # pragma: no cover - guarded by op constructors
        raise ValueError(f"unknown op kind {kind!r}")


def tensor_of(shape: Sequence[int], values, tape: Tape) -> Tensor:
    """Record a leaf tensor with the given row-major values."""
    shape = tuple(int(d) for d in shape)
    if len(shape) == 0 or any(d < 1 for d in shape):
        raise ValueError(f"shape must be non-empty with positive dims, got {shape}")
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    expect = int(np.prod(shape))
    if arr.size != expect:
        raise ValueError(f"shape {shape} needs {expect} values, got {arr.size}")
    if not np.isfinite(arr).all():
        raise ValueError("leaf tensor contains non-finite values")
    return tape._record("leaf", (), arr.reshape(shape))


def _on_tape(t: Tensor, name: str) -> Tape:
    if t.tape is None or t.node_id is None:
        raise ValueError(f"{name} must be recorded on a tape")
    return t.tape


def matmul(a: Tensor, b: Tensor) -> Tensor:
    tape = _on_tape(a, "matmul input")
    if b.tape is not tape:
        raise ValueError("matmul inputs must share a tape")
    if len(a.shape) != 2 or len(b.shape) != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
    out = tape._empty((a.shape[0], b.shape[1]))
    np.matmul(a.values, b.values, out=out)
    return tape._record("matmul", (a.node_id, b.node_id), out)


def map_unary(kind: str, t: Tensor) -> Tensor:
    tape = _on_tape(t, "map_unary input")
    x = t.values
    if kind not in UNARY_KINDS:
        raise ValueError(f"unsupported unary kind {kind!r}; choose from {UNARY_KINDS}")
    out = tape._empty(x.shape)
    if kind == "sin":
        np.sin(x, out=out)
    elif kind == "cos":
        np.cos(x, out=out)
    elif kind == "exp":
        with np.errstate(over="ignore"):  # overflow surfaces as FloatingPointError
            np.exp(x, out=out)
    elif kind == "neg":
        np.negative(x, out=out)
    elif kind == "square":
        np.multiply(x, x, out=out)
    else:
        np.maximum(x, 0.0, out=out)
    return tape._record(kind, (t.node_id,), out)


def zip_binary(kind: str, a: Tensor, b: Tensor) -> Tensor:
    if kind not in BINARY_KINDS:
        raise ValueError(f"unsupported binary kind {kind!r}; choose from {BINARY_KINDS}")
    tape = _on_tape(a, "zip_binary input")
    if b.tape is not tape:
        raise ValueError("zip_binary inputs must share a tape")
    if a.shape != b.shape and b.values.size != 1:
        raise ValueError(f"incompatible shapes {a.shape} vs {b.shape} "
                         "(only scalar-against-tensor broadcast is supported)")
    bv = b.values if a.shape == b.shape else b.values.reshape(-1)[0]
    out = tape._empty(a.values.shape)
    if kind == "add":
        np.add(a.values, bv, out=out)
    elif kind == "sub":
        np.subtract(a.values, bv, out=out)
    else:
        np.multiply(a.values, bv, out=out)
    return tape._record(kind, (a.node_id, b.node_id), out)


def scale(t: Tensor, c: float) -> Tensor:
    if not np.isfinite(c):
        raise ValueError(f"scale constant must be finite, got {c}")
    tape = _on_tape(t, "scale input")
    out = tape._empty(t.values.shape)
    np.multiply(t.values, c, out=out)
    return tape._record("scale", (t.node_id,), out, aux=float(c))


def mean_all(t: Tensor) -> Tensor:
    tape = _on_tape(t, "mean_all input")
    if t.values.size == 0:
        raise ValueError("mean_all needs a non-empty tensor")
    return tape._record("mean_all", (t.node_id,), np.array([t.values.mean()]))


def reshape(t: Tensor, shape: Sequence[int]) -> Tensor:
    """View with a new shape; identity on the flat row-major data."""
    tape = _on_tape(t, "reshape input")
    shape = tuple(int(d) for d in shape)
    if int(np.prod(shape)) != t.values.size:
        raise ValueError(f"cannot reshape {t.shape} to {shape}")
    return tape._record("reshape", (t.node_id,), t.values.reshape(shape))


def backward(tape: Tape, root: Tensor) -> None:
    tape.backward(root)


def finite_diff_check(f: Callable[[Tape, list[Tensor]], Tensor],
                      params: list[np.ndarray], h: float = 1e-5) -> float:
    """Max relative error between tape gradients and central finite differences.

    ``f`` builds a scalar loss from leaf tensors recorded on the given tape;
    it must be deterministic. Relative error uses max(|analytic|, 1e-8) as
    the denominator, per parameter entry.
    """
    if h <= 0:
        raise ValueError(f"step h must be positive, got {h}")
    params = [np.asarray(p, dtype=np.float64) for p in params]

    def eval_loss(values: list[np.ndarray]) -> float:
        tape = Tape()
        leaves = [tensor_of(v.shape, v, tape) for v in values]
        return f(tape, leaves).item()

    tape = Tape()
    leaves = [tensor_of(p.shape, p, tape) for p in params]
    root = f(tape, leaves)
    tape.backward(root)
    analytic = [leaf.grad for leaf in leaves]

    worst = 0.0
    for pi, p in enumerate(params):
        flat = p.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            up = eval_loss(params)
            flat[j] = orig - h
            down = eval_loss(params)
            flat[j] = orig
            numeric = (up - down) / (2.0 * h)
            ana = float(analytic[pi].reshape(-1)[j])
            rel = abs(ana - numeric) / max(abs(ana), 1e-8)
            worst = max(worst, rel)
    return worst
