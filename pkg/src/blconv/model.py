"""Network data model, forward dynamics and the learning error.

Neurons and synapses carry 1-based ids that must equal their position in
the network's lists (neuron ``n`` is ``network.neurons[n - 1]``).  Array
views (``network.w``, ``network.pre`` ...) use 0-based indices.

Membrane potential of neuron n::

    p_n = sum_{s in D_n} eps_s * eta_s * w_s * r_{pre_s} - theta_n

and its firing rate ``r_n = rho_n * sigmoid(lambda_n * p_n)`` with the
logistic sigmoid.  Input neurons have no dendritic synapses and their rate
is clamped to an externally supplied value.
"""

from __future__ import annotations

import graphlib
import json
import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DivergenceError, UsageError

logger = logging.getLogger(__name__)

# damped fixed-point iteration for recurrent networks
DAMPING = 0.5
FIXED_POINT_TOL = 1e-10
FIXED_POINT_MAX_ITER = 10_000
STATE_RESIDUAL_TOL = 1e-8


def sigmoid(x):
    """Logistic function, overflow-safe for arrays and scalars."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def sigmoid_prime(x):
    s = sigmoid(x)
    return s * (1.0 - s)


@dataclass(frozen=True)
class Neuron:
    id: int
    rho: float = 1.0
    lam: float = 1.0
    theta: float = 0.0
    is_input: bool = False
    is_output: bool = False

    def __post_init__(self):
        if not self.rho > 0:
            raise UsageError(f"neuron {self.id}: rho must be > 0, got {self.rho}")
        if not self.lam > 0:
            raise UsageError(f"neuron {self.id}: lambda must be > 0, got {self.lam}")
        if not np.isfinite(self.theta):
            raise UsageError(f"neuron {self.id}: theta must be finite")


@dataclass(frozen=True)
class Synapse:
    id: int
    pre: int
    post: int
    epsilon: int = 1
    w: float = 1.0
    eta: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        if self.epsilon not in (1, -1):
            raise UsageError(f"synapse {self.id}: epsilon must be +1 or -1, got {self.epsilon}")
        if not self.eta > 0:
            raise UsageError(f"synapse {self.id}: eta must be > 0")
        if not self.alpha > 0:
            raise UsageError(f"synapse {self.id}: alpha must be > 0")
        if not (self.w >= 0 and np.isfinite(self.w)):
            raise UsageError(f"synapse {self.id}: w must be finite and >= 0, got {self.w}")


@dataclass(frozen=True)
class Network:
    """Immutable network topology plus per-neuron and per-synapse parameters."""

    neurons: tuple[Neuron, ...]
    synapses: tuple[Synapse, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "neurons", tuple(self.neurons))
        object.__setattr__(self, "synapses", tuple(self.synapses))
        for k, nrn in enumerate(self.neurons, start=1):
            if nrn.id != k:
                raise UsageError(f"neuron ids must be 1..N in order; position {k} has id {nrn.id}")
        n = len(self.neurons)
        for k, syn in enumerate(self.synapses, start=1):
            if syn.id != k:
                raise UsageError(f"synapse ids must be 1..S in order; position {k} has id {syn.id}")
            if not (1 <= syn.pre <= n and 1 <= syn.post <= n):
                raise UsageError(f"synapse {syn.id} references a missing neuron")
            if self.neurons[syn.post - 1].is_input:
                raise UsageError(f"synapse {syn.id} ends on input neuron {syn.post}")

    @property
    def n_neurons(self) -> int:
        return len(self.neurons)

    @property
    def n_synapses(self) -> int:
        return len(self.synapses)

    @cached_property
    def dendritic(self) -> dict[int, tuple[int, ...]]:
        """D_n: ids of synapses ending on each neuron."""
        d: dict[int, list[int]] = {nrn.id: [] for nrn in self.neurons}
        for syn in self.synapses:
            d[syn.post].append(syn.id)
        return {k: tuple(v) for k, v in d.items()}

    @cached_property
    def axonic(self) -> dict[int, tuple[int, ...]]:
        """A_n: ids of synapses leaving each neuron."""
        a: dict[int, list[int]] = {nrn.id: [] for nrn in self.neurons}
        for syn in self.synapses:
            a[syn.pre].append(syn.id)
        return {k: tuple(v) for k, v in a.items()}

    # 0-based array views
    @cached_property
    def pre(self) -> np.ndarray:
        return np.array([s.pre - 1 for s in self.synapses], dtype=np.intp)

    @cached_property
    def post(self) -> np.ndarray:
        return np.array([s.post - 1 for s in self.synapses], dtype=np.intp)

    @cached_property
    def epsilon(self) -> np.ndarray:
        return np.array([s.epsilon for s in self.synapses], dtype=float)

    @cached_property
    def w(self) -> np.ndarray:
        return np.array([s.w for s in self.synapses], dtype=float)

    @cached_property
    def eta(self) -> np.ndarray:
        return np.array([s.eta for s in self.synapses], dtype=float)

    @cached_property
    def alpha(self) -> np.ndarray:
        return np.array([s.alpha for s in self.synapses], dtype=float)

    @cached_property
    def rho(self) -> np.ndarray:
        return np.array([n.rho for n in self.neurons], dtype=float)

    @cached_property
    def lam(self) -> np.ndarray:
        return np.array([n.lam for n in self.neurons], dtype=float)

    @cached_property
    def theta(self) -> np.ndarray:
        return np.array([n.theta for n in self.neurons], dtype=float)

    @cached_property
    def input_ids(self) -> tuple[int, ...]:
        return tuple(n.id for n in self.neurons if n.is_input)

    @cached_property
    def output_ids(self) -> tuple[int, ...]:
        return tuple(n.id for n in self.neurons if n.is_output)

    @cached_property
    def topological_order(self) -> tuple[int, ...] | None:
        """Neuron ids in an order with every synapse pointing forward, or None if cyclic."""
        try:
            return tuple(graphlib.TopologicalSorter(self._predecessors()).static_order())
        except graphlib.CycleError:
            return None

    def find_cycle(self) -> list[int] | None:
        """A directed neuron cycle ``[n1, n2, ..., nk]`` (edges n1->n2->...->nk->n1), or None."""
        try:
            graphlib.TopologicalSorter(self._predecessors()).prepare()
        except graphlib.CycleError as exc:
            cyc = list(exc.args[1])[:-1]
            edges = {(s.pre, s.post) for s in self.synapses}
            closed = cyc + cyc[:1]
            if not all((a, b) in edges for a, b in zip(closed, closed[1:])):
                cyc.reverse()
            return cyc
        return None

    def _predecessors(self) -> dict[int, set[int]]:
        preds: dict[int, set[int]] = {n.id: set() for n in self.neurons}
        for s in self.synapses:
            preds[s.post].add(s.pre)
        return preds

    def with_weights(self, w: Sequence[float]) -> "Network":
        """Copy of the network with synapse strengths replaced (same order as ``synapses``)."""
        w = np.asarray(w, dtype=float)
        if w.shape != (self.n_synapses,):
            raise UsageError(f"expected {self.n_synapses} weights, got shape {w.shape}")
        syns = tuple(replace(s, w=float(v)) for s, v in zip(self.synapses, w))
        return Network(self.neurons, syns)


@dataclass(frozen=True)
class NetworkState:
    """Membrane potentials ``p`` and firing rates ``r`` (index n-1 for neuron n)."""

    p: np.ndarray
    r: np.ndarray

    def rate(self, n: int) -> float:
        return float(self.r[n - 1])

    def potential(self, n: int) -> float:
        return float(self.p[n - 1])


def potentials(network: Network, rates: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    """Membrane potentials of every neuron at once."""
    w = network.w if weights is None else weights
    rates = np.asarray(rates, dtype=float)
    drive = network.epsilon * network.eta * w * rates[network.pre]
    return np.bincount(network.post, weights=drive, minlength=network.n_neurons) - network.theta


def membrane_potential(network: Network, rates: Sequence[float], n: int) -> float:
    """Potential of neuron ``n`` given every neuron's firing rate."""
    if not 1 <= n <= network.n_neurons:
        raise UsageError(f"invalid neuron id {n}")
    rates = np.asarray(rates, dtype=float)
    if rates.shape != (network.n_neurons,) or not np.all(np.isfinite(rates)):
        raise UsageError("rates must hold one finite value per neuron")
    total = 0.0
    for sid in network.dendritic[n]:
        s = network.synapses[sid - 1]
        total += s.epsilon * s.eta * s.w * rates[s.pre - 1]
    return total - network.neurons[n - 1].theta


def firing_rate(neuron: Neuron, p: float) -> float:
    return neuron.rho * sigmoid(neuron.lam * p)


def _clamped_rates(network: Network, input_rates: Mapping[int, float]) -> np.ndarray:
    r = np.zeros(network.n_neurons)
    for n in network.input_ids:
        if n not in input_rates:
            raise UsageError(f"missing rate for input neuron {n}")
        r[n - 1] = float(input_rates[n])
    for n in input_rates:
        if not (1 <= n <= network.n_neurons and network.neurons[n - 1].is_input):
            raise UsageError(f"neuron {n} is not an input neuron")
    if not np.all(np.isfinite(r)):
        raise UsageError("input rates must be finite")
    return r


def forward(
    network: Network,
    input_rates: Mapping[int, float],
    weights: np.ndarray | None = None,
) -> NetworkState:
    """Solve the potential and rate equations for the steady state.

    Hierarchical networks are evaluated exactly in one topological pass.
    Recurrent ones use the damped iteration ``r <- (1-mu) r + mu F(r)``.
    ``weights`` optionally overrides the synapse strengths without building
    a new :class:`Network` (used by finite differences).
    """
    r = _clamped_rates(network, input_rates)
    is_input = np.array([nrn.is_input for nrn in network.neurons], dtype=bool)
    w = network.w if weights is None else np.asarray(weights, dtype=float)

    order = network.topological_order
    if order is not None:
        p = np.zeros(network.n_neurons)
        for n in order:
            nrn = network.neurons[n - 1]
            total = 0.0
            for sid in network.dendritic[n]:
                s = network.synapses[sid - 1]
                total += s.epsilon * s.eta * w[sid - 1] * r[s.pre - 1]
            p[n - 1] = total - nrn.theta
            if not nrn.is_input:
                r[n - 1] = nrn.rho * sigmoid(nrn.lam * p[n - 1])
        return NetworkState(p=p, r=r)

    rho, lam = network.rho, network.lam
    change = np.inf
    for it in range(FIXED_POINT_MAX_ITER):
        p = potentials(network, r, w)
        target = np.where(is_input, r, rho * sigmoid(lam * p))
        new_r = (1.0 - DAMPING) * r + DAMPING * target
        change = float(np.max(np.abs(new_r - r))) if r.size else 0.0
        r = new_r
        if not np.isfinite(change):
            break
        if change <= FIXED_POINT_TOL:
            break
    p = potentials(network, r, w)
    residual = float(np.max(np.abs(np.where(is_input, 0.0, r - rho * sigmoid(lam * p))), initial=0.0))
    if not residual <= STATE_RESIDUAL_TOL:
        raise DivergenceError(
            f"recurrent forward pass did not settle (residual {residual:.3g})", residual=residual
        )
    logger.debug("recurrent forward settled after %d iterations, residual %.3g", it + 1, residual)
    return NetworkState(p=p, r=r)


def state_residual(network: Network, state: NetworkState) -> float:
    """Largest violation of the potential and rate equations (input rates are free)."""
    p = potentials(network, state.r)
    is_input = np.array([nrn.is_input for nrn in network.neurons], dtype=bool)
    eq1 = np.abs(p - state.p)
    eq2 = np.where(is_input, 0.0, np.abs(state.r - network.rho * sigmoid(network.lam * state.p)))
    return float(max(eq1.max(initial=0.0), eq2.max(initial=0.0)))


def _check_targets(network: Network, targets: Mapping[int, float]) -> None:
    outputs = set(network.output_ids)
    extra = set(targets) - outputs
    if extra:
        raise UsageError(f"targets given for non-output neurons {sorted(extra)}")
    missing = outputs - set(targets)
    if missing:
        raise UsageError(f"missing targets for output neurons {sorted(missing)}")


def network_error(network: Network, state: NetworkState, targets: Mapping[int, float]) -> float:
    """Least-square error ``0.5 * sum_{n in O} (r_n - target_n)^2``."""
    _check_targets(network, targets)
    return 0.5 * sum((state.r[n - 1] - targets[n]) ** 2 for n in network.output_ids)


# serialization ------------------------------------------------------------


def network_to_dict(network: Network) -> dict:
    return {
        "neurons": [
            {
                "id": n.id,
                "rho": n.rho,
                "lambda": n.lam,
                "theta": n.theta,
                "is_input": n.is_input,
                "is_output": n.is_output,
            }
            for n in network.neurons
        ],
        "synapses": [
            {
                "id": s.id,
                "pre": s.pre,
                "post": s.post,
                "epsilon": s.epsilon,
                "w": s.w,
                "eta": s.eta,
                "alpha": s.alpha,
            }
            for s in network.synapses
        ],
    }


def network_from_dict(doc: Mapping) -> Network:
    try:
        neurons = [
            Neuron(
                id=int(d["id"]),
                rho=float(d.get("rho", 1.0)),
                lam=float(d.get("lambda", 1.0)),
                theta=float(d.get("theta", 0.0)),
                is_input=bool(d.get("is_input", False)),
                is_output=bool(d.get("is_output", False)),
            )
            for d in doc["neurons"]
        ]
        synapses = [
            Synapse(
                id=int(d["id"]),
                pre=int(d["pre"]),
                post=int(d["post"]),
                epsilon=int(d.get("epsilon", 1)),
                w=float(d.get("w", 1.0)),
                eta=float(d.get("eta", 1.0)),
                alpha=float(d.get("alpha", 1.0)),
            )
            for d in doc.get("synapses", [])
        ]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(f"malformed network document: {exc}") from exc
    return Network(tuple(neurons), tuple(synapses))


def save_network(network: Network, path: str | Path, **extra) -> None:
    """Write the network as JSON. ``extra`` keys (e.g. inputs, targets) are stored alongside."""
    doc = network_to_dict(network)
    for key, value in extra.items():
        doc[key] = {str(k): v for k, v in value.items()} if isinstance(value, Mapping) else value
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_network(path: str | Path) -> Network:
    return network_from_dict(json.loads(Path(path).read_text()))
