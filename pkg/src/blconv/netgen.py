"""Random networks for the convergence-measure simulations.

Neuron ``n`` may project to any ``n'`` with ``|n - n'| <= B`` (no self-loops
unless ``self_loops`` is set); each candidate pair is connected with
probability ``C`` and excitatory with probability ``D``.  All neurons use
``rho = lambda = 1, theta = 0`` and all synapses ``eta = alpha = 1``, so the
normalized potential ``p_hat`` and strength ``w_hat`` enter directly:
``p_n = p_hat * (1 + u_n)``, ``w_s = w_hat * (1 + u_s)`` with
``u ~ Uniform[0, perturb_max]`` and ``r_n = sigmoid(p_n)``.

Draws are tied to pair identity rather than to enumeration position, so
that a grid over any one parameter compares nested networks (common random
numbers).  A trial takes one block of ``N*N x 4`` uniforms from its stream;
row ``k`` belongs to the ordered pair with shell index ``k`` (see
:func:`pair_index`) and holds its connect, sign and strength-perturbation
draws, while column 3 of row ``n - 1`` perturbs neuron ``n``.  Because the
shell order lists every pair inside ``1..N`` before any pair touching
``N + 1``, growing ``N`` or ``B`` only adds synapses.  Trial ``k`` of a run
seeded with ``seed`` uses the stream ``seed + k``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .bl_core import assemble_system, system_convergence_measure
from .errors import BLError, UsageError
from .model import Network, NetworkState, Neuron, Synapse, sigmoid
from .numerics import RandomStream


@dataclass(frozen=True)
class GenParams:
    N: int = 30
    B: int = 20
    C: float = 0.5
    D: float = 0.5
    p_hat: float = 5.0
    w_hat: float = 25.0
    perturb_max: float = 0.10
    R: int = 20
    seed: int = 0
    self_loops: bool = False

    def __post_init__(self):
        checks = [
            (self.N >= 1, "N must be >= 1"),
            (self.B >= 1, "B must be >= 1"),
            (0.0 <= self.C <= 1.0, "C must lie in [0, 1]"),
            (0.0 <= self.D <= 1.0, "D must lie in [0, 1]"),
            (self.p_hat > 0, "p_hat must be > 0"),
            (self.w_hat >= 0, "w_hat must be >= 0"),
            (0.0 <= self.perturb_max < 1.0, "perturb_max must lie in [0, 1)"),
            (self.R >= 1, "R must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise UsageError(msg)

    def with_value(self, name: str, value) -> "GenParams":
        if name in ("N", "B", "R", "seed"):
            value = int(value)
        else:
            value = float(value)
        return replace(self, **{name: value})


class TrialDraws(NamedTuple):
    """Every random quantity of one trial, before parameters are applied."""

    pairs: np.ndarray  # (P, 2) candidate (pre, post), 1-based
    connect_u: np.ndarray
    sign_u: np.ndarray
    synapse_u: np.ndarray  # in [0, perturb_max], one per candidate pair
    neuron_u: np.ndarray  # in [0, perturb_max]


class CMResult(NamedTuple):
    cm_max: float
    per_trial: list[float]


def candidate_pairs(N: int, B: int, self_loops: bool = False) -> np.ndarray:
    """Ordered pairs ``(n, n')`` with ``|n - n'| <= B``, row-major in ``n`` then ``n'``."""
    pairs = [
        (n, m)
        for n in range(1, N + 1)
        for m in range(max(1, n - B), min(N, n + B) + 1)
        if self_loops or m != n
    ]
    return np.array(pairs, dtype=np.intp).reshape(-1, 2)


def pair_index(n, m):
    """0-based shell index of the ordered pair ``(n, m)``.

    Shell ``L = max(n, m)`` holds ``(L, 1) .. (L, L)`` then ``(1, L) .. (L-1, L)``
    and starts at ``(L - 1)**2``.
    """
    n = np.asarray(n)
    m = np.asarray(m)
    L = np.maximum(n, m)
    return (L - 1) ** 2 + np.where(n == L, m - 1, L + n - 1)


def draw_trial(params: GenParams, stream: RandomStream) -> TrialDraws:
    block = stream.uniform_01((params.N * params.N, 4))
    pairs = candidate_pairs(params.N, params.B, params.self_loops)
    rows = block[pair_index(pairs[:, 0], pairs[:, 1])] if len(pairs) else np.zeros((0, 4))
    scale = params.perturb_max
    return TrialDraws(
        pairs=pairs,
        connect_u=rows[:, 0],
        sign_u=rows[:, 1],
        synapse_u=scale * rows[:, 2],
        neuron_u=scale * block[: params.N, 3],
    )


def build_network(params: GenParams, draws: TrialDraws) -> tuple[Network, NetworkState]:
    """Apply ``C, D, p_hat, w_hat`` to a trial's draws."""
    keep = draws.connect_u < params.C
    pairs = draws.pairs[keep]
    eps = np.where(draws.sign_u[keep] < params.D, 1, -1)
    w = params.w_hat * (1.0 + draws.synapse_u[keep])
    neurons = tuple(Neuron(n) for n in range(1, params.N + 1))
    synapses = tuple(
        Synapse(k + 1, int(a), int(b), epsilon=int(e), w=float(ws))
        for k, ((a, b), e, ws) in enumerate(zip(pairs, eps, w))
    )
    p = params.p_hat * (1.0 + draws.neuron_u)
    return Network(neurons, synapses), NetworkState(p=p, r=sigmoid(p))


def generate_network(params: GenParams, stream: RandomStream) -> tuple[Network, NetworkState]:
    """One random network with its imposed state (potentials are not solved)."""
    return build_network(params, draw_trial(params, stream))


def trial_cm(network: Network, state: NetworkState) -> float:
    sys = assemble_system(network, state, None, gamma=0.0)
    return system_convergence_measure(sys)


def cm_over_trials(params: GenParams) -> CMResult:
    """CM of ``R`` independent random networks and their maximum."""
    per_trial = []
    for k in range(params.R):
        net, state = generate_network(params, RandomStream(params.seed + k))
        try:
            per_trial.append(trial_cm(net, state))
        except BLError as exc:
            raise type(exc)(f"trial {k}: {exc}") from exc
    return CMResult(max(per_trial), per_trial)
