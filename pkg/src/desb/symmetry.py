"""Point and permutation symmetries of tanh networks and their breaking.

Layers and neurons use 1-based numbering: hidden layers are ``2..L-1`` and
neurons ``1..N_l``, matching :class:`desb.network.Topology`.

Every operator moves whole symmetry blocks (a neuron's own weights and
shift plus its outgoing weights), so it only reorders or negates entries of
``theta``. Network output and ``||theta||`` are therefore unchanged.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .network import Topology

__all__ = [
    "SymmetryOp",
    "MgodDraw",
    "apply_point",
    "apply_permutation",
    "apply_op",
    "apply_chain",
    "count_symmetric_equivalents",
    "draw_mgod",
    "mgod_apply",
    "mgod_step",
    "ideal_separation_bruteforce",
]

MAX_BRUTEFORCE_STATES = 10**6


@dataclass(frozen=True)
class SymmetryOp:
    kind: str  # "point" or "permutation"
    layer: int
    neurons: tuple[int, ...]

    def __post_init__(self):
        expected = {"point": 1, "permutation": 2}.get(self.kind)
        if expected is None:
            raise ValueError(f"unknown symmetry kind {self.kind!r}")
        if len(self.neurons) != expected:
            raise ValueError(f"{self.kind} operator takes {expected} neuron(s), got {self.neurons}")
        if self.kind == "permutation":
            # P(j, k) == P(k, j)
            object.__setattr__(self, "neurons", tuple(sorted(self.neurons)))


class MgodDraw(NamedTuple):
    mu: int
    layer: int
    n: int
    m: int


def _check_theta(topology, theta):
    theta = np.array(theta, dtype=float)
    if theta.shape != (topology.dim,):
        raise ValueError(f"parameter vector has shape {theta.shape}, expected ({topology.dim},)")
    return theta


def apply_point(topology: Topology, theta, l: int, n: int) -> np.ndarray:
    """Negate the block of neuron ``(l, n)``; returns a new vector."""
    theta = _check_theta(topology, theta)
    idx = topology.block_indices(l, n)
    theta[idx] = -theta[idx]
    return theta


def apply_permutation(topology: Topology, theta, l: int, j: int, k: int) -> np.ndarray:
    """Swap the blocks of neurons ``j`` and ``k`` in layer ``l``; returns a new vector."""
    theta = _check_theta(topology, theta)
    a, b = topology.block_indices(l, j), topology.block_indices(l, k)
    theta[a], theta[b] = theta[b], theta[a]
    return theta


def apply_op(topology: Topology, theta, op: SymmetryOp) -> np.ndarray:
    if op.kind == "point":
        return apply_point(topology, theta, op.layer, *op.neurons)
    return apply_permutation(topology, theta, op.layer, *op.neurons)


def apply_chain(topology: Topology, theta, ops) -> np.ndarray:
    """Apply ``ops`` left to right."""
    theta = _check_theta(topology, theta)
    for op in ops:
        theta = apply_op(topology, theta, op)
    return theta


def count_symmetric_equivalents(topology: Topology) -> int:
    """Number of symmetric equivalents, ``prod_l 2^{N_l} N_l!``."""
    return math.prod(2 ** topology.size(l) * math.factorial(topology.size(l))
                     for l in topology.hidden_layers)


def draw_mgod(rng: np.random.Generator, topology: Topology, size: int) -> list[MgodDraw]:
    """Sample ``size`` heuristic draws ``(mu, l, n, m)`` from ``rng``.

    ``m`` is always drawn so the stream consumption does not depend on
    ``mu``; it is only used by the permutation branch. ``m == n`` is allowed
    and makes the swap a no-op.
    """
    mu = rng.integers(0, 2, size=size)
    layer = rng.integers(2, topology.L, size=size)
    widths = np.array([topology.size(l) for l in layer])
    n = (rng.random(size) * widths).astype(int) + 1
    m = (rng.random(size) * widths).astype(int) + 1
    return [MgodDraw(int(a), int(b), int(c), int(e)) for a, b, c, e in zip(mu, layer, n, m)]


def mgod_apply(topology: Topology, theta: np.ndarray, best: np.ndarray, draw: MgodDraw) -> bool:
    """Apply one heuristic step in place for a fixed draw; returns whether it moved.

    The operator is applied only if it strictly shortens the distance to
    ``best``, which is decided on the affected blocks alone.
    """
    mu, l, n, m = draw
    bn = topology.block_indices(l, n)
    if mu == 0:
        d_keep = np.sum((theta[bn] - best[bn]) ** 2)
        d_flip = np.sum((-theta[bn] - best[bn]) ** 2)
        if d_keep > d_flip:
            theta[bn] = -theta[bn]
            return True
        return False
    bm = topology.block_indices(l, m)
    d_keep = np.sum((theta[bn] - best[bn]) ** 2) + np.sum((theta[bm] - best[bm]) ** 2)
    d_swap = np.sum((theta[bn] - best[bm]) ** 2) + np.sum((theta[bm] - best[bn]) ** 2)
    if d_keep > d_swap:
        theta[bn], theta[bm] = theta[bm], theta[bn]
        return True
    return False


def mgod_step(topology: Topology, theta, best, rng: np.random.Generator, draw: MgodDraw | None = None):
    """One randomized symmetry-breaking step towards ``best``.

    Draws an operator (point or permutation), a hidden layer and neuron(s)
    uniformly and applies the operator to a copy of ``theta`` only if that
    brings it strictly closer to ``best``. Pass ``draw`` to bypass sampling.

    Returns the possibly modified copy.
    """
    theta = _check_theta(topology, theta)
    best = _check_theta(topology, best)
    if draw is None:
        draw = draw_mgod(rng, topology, 1)[0]
    mgod_apply(topology, theta, best, draw)
    return theta


def _layer_transforms(topology, l):
    """All signed permutations of layer ``l`` as (gather, sign, ops) triples.

    A transform maps ``theta`` to ``sign * theta[gather]``: block ``n`` of the
    result is ``s_n`` times block ``perm[n]`` of the input.
    """
    N = topology.size(l)
    blocks = [topology.block_indices(l, n) for n in range(1, N + 1)]
    for perm in itertools.permutations(range(N)):
        swaps, arr = [], list(range(N))
        for p in range(N):
            if arr[p] != perm[p]:
                q = arr.index(perm[p])
                arr[p], arr[q] = arr[q], arr[p]
                swaps.append(SymmetryOp("permutation", l, (p + 1, q + 1)))
        for signs in itertools.product((1.0, -1.0), repeat=N):
            gather = np.arange(topology.dim)
            sign = np.ones(topology.dim)
            for n in range(N):
                gather[blocks[n]] = blocks[perm[n]]
                sign[blocks[n]] = signs[n]
            flips = [SymmetryOp("point", l, (n + 1,)) for n in range(N) if signs[n] < 0]
            yield gather, sign, swaps + flips


def ideal_separation_bruteforce(topology: Topology, theta, reference):
    """Exhaustive search for the symmetry closest to ``reference``.

    Enumerates every composition of per-layer sign patterns and neuron
    permutations. Symmetries of different layers commute, so the full group
    factorizes into independent per-layer choices and each composition is
    applied layer by layer. Ties keep the first composition in enumeration
    order (identity first). Exponential cost; meant as a test oracle.

    Returns ``(ops, theta_hat)`` where ``apply_chain(theta, ops) == theta_hat``.
    """
    theta = _check_theta(topology, theta)
    reference = _check_theta(topology, reference)
    total = count_symmetric_equivalents(topology)
    if total > MAX_BRUTEFORCE_STATES:
        raise ValueError(f"{total} symmetric equivalents exceed the brute-force limit "
                         f"of {MAX_BRUTEFORCE_STATES}")
    per_layer = [list(_layer_transforms(topology, l)) for l in topology.hidden_layers]
    best_dist, best_ops, best_theta = math.inf, [], theta
    for combo in itertools.product(*per_layer):
        vec, ops = theta, []
        for gather, sign, layer_ops in combo:
            vec = sign * vec[gather]
            ops.extend(layer_ops)
        dist = np.sum((vec - reference) ** 2)
        if dist < best_dist:
            best_dist, best_ops, best_theta = dist, ops, vec
    return best_ops, best_theta.copy()
