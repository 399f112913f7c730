"""Fixed-topology feedforward networks with a least-squares output layer.

Hidden neurons are ``tanh`` units, the output layer is linear without bias.
Only the hidden-layer weights and shifts form the search vector ``theta``;
output weights are re-solved by ridge-damped least squares on every cost
evaluation.

Layout of ``theta``: for every hidden layer ``l = 2..L-1`` and every neuron
``n = 1..N_l`` the block ``(w[1..N_{l-1}], tau)`` in that order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "RIDGE",
    "PENALTY_SLOPE",
    "Topology",
    "CostValue",
    "NetworkCost",
    "parse_topology",
    "param_dim",
    "param_norm",
    "forward_hidden",
    "hidden_outputs",
    "least_squares_weights",
    "solve_output_weights",
    "network_output",
    "mse_cost",
    "penalized_cost",
    "effective_params",
]

RIDGE = 1e-10
REFINE_STEPS = 2
PENALTY_SLOPE = 50.0
PENALTY_MODES = ("literal", "boundary")


@dataclass(frozen=True)
class Topology:
    """Layer sizes ``(d, N_2, ..., N_{L-1}, q)`` of a network."""

    layer_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 3:
            raise ValueError(f"need at least one hidden layer, got {len(sizes)} layers")
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer sizes must be positive, got {sizes}")
        object.__setattr__(self, "layer_sizes", sizes)

    def __str__(self):
        return "-".join(str(s) for s in self.layer_sizes)

    @property
    def L(self) -> int:
        return len(self.layer_sizes)

    @property
    def d(self) -> int:
        return self.layer_sizes[0]

    @property
    def q(self) -> int:
        return self.layer_sizes[-1]

    @property
    def hidden_layers(self) -> range:
        """1-based layer numbers of the hidden layers, ``2..L-1``."""
        return range(2, self.L)

    def size(self, l: int) -> int:
        """Neuron count ``N_l`` of layer ``l`` (1-based numbering)."""
        return self.layer_sizes[l - 1]

    @cached_property
    def layer_offsets(self) -> dict[int, int]:
        offsets, pos = {}, 0
        for l in self.hidden_layers:
            offsets[l] = pos
            pos += self.size(l) * (self.size(l - 1) + 1)
        return offsets

    @cached_property
    def dim(self) -> int:
        return sum(self.size(l) * (self.size(l - 1) + 1) for l in self.hidden_layers)

    def neuron_slice(self, l: int, n: int) -> slice:
        """Slice of ``eta^l_n = (w^l_n, tau^l_n)`` inside ``theta``."""
        self._check_neuron(l, n)
        width = self.size(l - 1) + 1
        start = self.layer_offsets[l] + (n - 1) * width
        return slice(start, start + width)

    def block_indices(self, l: int, n: int) -> np.ndarray:
        """Indices of the symmetry-relevant block of neuron ``(l, n)``.

        The block is the neuron's own parameters followed by its outgoing
        weights ``w^{l+1}_{i,n}``. For the last hidden layer the outgoing
        weights are solved by least squares and are not part of ``theta``.
        """
        self._check_neuron(l, n)
        return self._blocks[(l, n)]

    @cached_property
    def _blocks(self) -> dict[tuple[int, int], np.ndarray]:
        blocks = {}
        for l in self.hidden_layers:
            for n in range(1, self.size(l) + 1):
                own = self.neuron_slice(l, n)
                idx = list(range(own.start, own.stop))
                if l < self.L - 1:
                    for i in range(1, self.size(l + 1) + 1):
                        idx.append(self.neuron_slice(l + 1, i).start + n - 1)
                blocks[(l, n)] = np.array(idx, dtype=np.intp)
        return blocks

    def _check_neuron(self, l, n):
        if l not in self.hidden_layers:
            raise IndexError(f"layer {l} is not a hidden layer of {self}")
        if not 1 <= n <= self.size(l):
            raise IndexError(f"neuron {n} out of range 1..{self.size(l)} in layer {l}")


@dataclass(frozen=True)
class CostValue:
    mse: float
    penalty: float = 0.0
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total", self.mse + self.penalty)


def parse_topology(text: str) -> Topology:
    """Parse a dash-separated topology such as ``"2-3-1-3-1"``."""
    parts = str(text).strip().split("-")
    try:
        sizes = [int(p) for p in parts]
    except ValueError:
        raise ValueError(f"malformed topology {text!r}") from None
    return Topology(tuple(sizes))


def param_dim(topology: Topology) -> int:
    return topology.dim


def param_norm(theta) -> np.ndarray | float:
    """Euclidean norm along the last axis, exactly invariant under reordering.

    Squares are summed in sorted order so that permuting coordinates can
    never change the result, not even in the last bit.
    """
    theta = np.asarray(theta, dtype=float)
    sq = np.sort(np.atleast_2d(theta) ** 2, axis=-1)
    norms = np.sqrt(np.sum(sq, axis=-1))
    return float(norms[0]) if theta.ndim == 1 else norms


def _as_batch(topology, thetas):
    thetas = np.asarray(thetas, dtype=float)
    single = thetas.ndim == 1
    thetas = np.atleast_2d(thetas)
    if thetas.shape[-1] != topology.dim:
        raise ValueError(f"parameter vector has length {thetas.shape[-1]}, expected {topology.dim}")
    return thetas, single


def _as_inputs(topology, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[-1] != topology.d:
        raise ValueError(f"input has dimension {x.shape[-1]}, expected {topology.d}")
    return x, single


def hidden_outputs(topology: Topology, thetas, x) -> np.ndarray:
    """Last-hidden-layer outputs for a batch of parameter vectors.

    Parameters
    ----------
    thetas : ndarray, shape (P, D)
    x : ndarray, shape (K, d)

    Returns
    -------
    ndarray, shape (P, K, N_{L-1})
    """
    thetas, _ = _as_batch(topology, thetas)
    x, _ = _as_inputs(topology, x)
    P = thetas.shape[0]
    h = np.broadcast_to(x, (P,) + x.shape)
    for l in topology.hidden_layers:
        n_in, n_out = topology.size(l - 1), topology.size(l)
        start = topology.layer_offsets[l]
        block = thetas[:, start:start + n_out * (n_in + 1)].reshape(P, n_out, n_in + 1)
        h = np.tanh(h @ block[:, :, :-1].transpose(0, 2, 1) + block[:, None, :, -1])
    return h


def forward_hidden(topology: Topology, theta, x) -> np.ndarray:
    """Output vector of the last hidden layer for one ``theta``.

    ``x`` may be one input vector (returns shape ``(N_{L-1},)``) or a
    ``(K, d)`` matrix (returns ``(K, N_{L-1})``).
    """
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1:
        raise ValueError("forward_hidden takes a single parameter vector")
    _, single_x = _as_inputs(topology, x)
    h = hidden_outputs(topology, theta, x)[0]
    return h[0] if single_x else h


def least_squares_weights(h, y, ridge: float = RIDGE) -> np.ndarray:
    """Ridge-damped normal-equation solve of ``min ||y - h @ W.T||``.

    Works on single designs ``h (K, N)`` / ``y (K, q)`` or stacks thereof
    ``(P, K, N)`` / ``(K, q)``. Returns ``W`` with shape ``(..., q, N)``.

    Saturated neurons make the Gram matrix badly conditioned, so a few
    steps of iterative refinement follow the direct solve. The
    normal-equation residual is formed from ``h`` itself, not from the
    Gram matrix, which keeps it accurate.
    """
    h = np.asarray(h, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if h.shape[-2] == 0:
        raise ValueError("empty training set")
    if h.shape[-2] != y.shape[0]:
        raise ValueError(f"{h.shape[-2]} hidden rows but {y.shape[0]} targets")
    ht = np.swapaxes(h, -1, -2)
    gram = ht @ h
    gram += ridge * np.eye(h.shape[-1])
    w = np.linalg.solve(gram, ht @ y)  # (..., N, q)
    for _ in range(REFINE_STEPS):
        r = ht @ (y - h @ w) - ridge * w
        w = w + np.linalg.solve(gram, r)
    return np.swapaxes(w, -1, -2)


def solve_output_weights(topology: Topology, theta, x, y, ridge: float = RIDGE) -> np.ndarray:
    """Least-squares output weights, shape ``(q, N_{L-1})``, on samples ``(x, y)``."""
    x, _ = _as_inputs(topology, x)
    y = _targets(topology, y, len(x))
    h = hidden_outputs(topology, theta, x)
    w = least_squares_weights(h, y, ridge)
    return w[0] if np.ndim(theta) == 1 else w


def network_output(topology: Topology, theta, w, x) -> np.ndarray:
    """Linear network output ``y_hat = W x^{L-1}`` (no output bias)."""
    w = np.asarray(w, dtype=float)
    if w.shape != (topology.q, topology.size(topology.L - 1)):
        raise ValueError(f"output weights have shape {w.shape}, expected "
                         f"{(topology.q, topology.size(topology.L - 1))}")
    return forward_hidden(topology, theta, x) @ w.T


def _targets(topology, y, k):
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None] if topology.q == 1 and y.shape[0] == k else y[None, :]
    if y.shape != (k, topology.q):
        raise ValueError(f"targets have shape {y.shape}, expected {(k, topology.q)}")
    return y


def _mse_batch(topology, thetas, x, y):
    if len(x) == 0:
        raise ValueError("empty sample set")
    h = hidden_outputs(topology, thetas, x)
    w = least_squares_weights(h, y)
    resid = y - h @ np.swapaxes(w, -1, -2)
    return np.sum(resid.reshape(len(thetas), -1) ** 2, axis=-1) / (len(x) * topology.q)


def mse_cost(topology: Topology, theta, x, y) -> float:
    """Mean squared error ``1/(K q) sum_k ||y_k - Omega(theta; x_k)||^2``.

    Output weights are solved on the same samples first.
    """
    theta, _ = _as_batch(topology, theta)
    x, _ = _as_inputs(topology, x)
    y = _targets(topology, y, len(x))
    return float(_mse_batch(topology, theta, x, y)[0])


def effective_params(topology: Topology, thetas, mode: str = "literal"):
    """Rescale vectors outside the feasible ball ``||theta|| <= sqrt(D)``.

    Returns ``(scaled, norms, outside)``. In ``literal`` mode outside vectors
    are scaled to unit norm, in ``boundary`` mode onto the ball surface.
    """
    if mode not in PENALTY_MODES:
        raise ValueError(f"unknown penalty mode {mode!r}")
    thetas, single = _as_batch(topology, thetas)
    norms = param_norm(thetas)
    outside = norms > math.sqrt(topology.dim)
    scaled = thetas.copy()
    if np.any(outside):
        target = 1.0 if mode == "literal" else math.sqrt(topology.dim)
        scaled[outside] *= (target / norms[outside])[:, None]
    if single:
        return scaled[0], float(norms[0]), bool(outside[0])
    return scaled, norms, outside


def penalized_costs(topology: Topology, thetas, x, y, mode: str = "literal"):
    """Batched penalized cost; returns ``(mse, penalty)`` arrays of shape (P,)."""
    thetas, _ = _as_batch(topology, thetas)
    scaled, norms, outside = effective_params(topology, thetas, mode)
    mse = _mse_batch(topology, scaled, x, y)
    penalty = np.where(outside, PENALTY_SLOPE * (norms - math.sqrt(topology.dim)), 0.0)
    return mse, penalty


def penalized_cost(topology: Topology, theta, x, y, mode: str = "literal") -> CostValue:
    """MSE inside the feasible ball, rescaled MSE plus linear penalty outside."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1:
        raise ValueError("penalized_cost takes a single parameter vector")
    x, _ = _as_inputs(topology, x)
    y = _targets(topology, y, len(x))
    mse, penalty = penalized_costs(topology, theta, x, y, mode)
    return CostValue(float(mse[0]), float(penalty[0]))


class NetworkCost:
    """Penalized training cost of a topology on fixed samples.

    Instances are the problem objects consumed by :func:`desb.de.run_de`:
    ``batch`` evaluates a stack of parameter vectors, calling the instance
    evaluates one.
    """

    def __init__(self, topology: Topology, x, y, penalty_mode: str = "literal"):
        if penalty_mode not in PENALTY_MODES:
            raise ValueError(f"unknown penalty mode {penalty_mode!r}")
        self.topology = topology
        self.x, _ = _as_inputs(topology, x)
        self.y = _targets(topology, y, len(self.x))
        if len(self.x) == 0:
            raise ValueError("empty sample set")
        self.penalty_mode = penalty_mode

    @property
    def dim(self) -> int:
        return self.topology.dim

    def evaluate(self, theta) -> CostValue:
        return penalized_cost(self.topology, theta, self.x, self.y, self.penalty_mode)

    def batch(self, thetas) -> np.ndarray:
        mse, penalty = penalized_costs(self.topology, thetas, self.x, self.y, self.penalty_mode)
        return mse + penalty

    def __call__(self, theta) -> float:
        return self.evaluate(theta).total

    def output_weights(self, theta) -> np.ndarray:
        """Output weights for the parameters the cost is actually evaluated at."""
        scaled, _, _ = effective_params(self.topology, theta, self.penalty_mode)
        return solve_output_weights(self.topology, scaled, self.x, self.y)
