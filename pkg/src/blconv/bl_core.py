"""The linear system for weight derivatives and its analysis.

For synapse ``i`` with pre-neuron ``a`` and post-neuron ``b`` let::

    K_i = alpha_i * eps_i * r_a * rho_b * lambda_b * sigmoid'(lambda_b * p_b)

Then the rule for the weight derivatives reads ``wdot = G wdot + h`` with::

    G[i, j] = K_i / r_b * eta_j * w_j / alpha_j     if pre_j == b, else 0
    h[i]    = -K_i * gamma * (r_b - target_b)        if b is an output, else 0

``G`` factors as ``diag(row_gain) @ P_post @ P_pre.T @ diag(col_gain)``, so its
nonzero eigenvalues coincide with those of the N x N neuron coupling matrix
``M[n, m] = sum_{j: n -> m} row_gain_j * col_gain_j``.  The sweeps use that
reduction; the full S x S route is kept for cross-checks and small systems.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np

from . import numerics
from .errors import DegenerateStateError, DivergenceError, NoSolutionError, SingularMatrixError, UsageError
from .model import Network, NetworkState, _check_targets, sigmoid_prime

SINGULAR_DET_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class BLSystem:
    """``wdot = G wdot + h`` in a fixed synapse enumeration.

    ``synapse_order[i]`` is the id of the synapse on row/column ``i``.
    ``row_gain``, ``col_gain``, ``pre`` and ``post`` (0-based neuron indices)
    are kept in matrix order so the system can be permuted or reduced.
    """

    G: np.ndarray
    h: np.ndarray
    synapse_order: tuple[int, ...]
    row_gain: np.ndarray
    col_gain: np.ndarray
    pre: np.ndarray
    post: np.ndarray
    n_neurons: int

    @property
    def size(self) -> int:
        return len(self.synapse_order)


class Solution(NamedTuple):
    det_IG: float
    wdot_star: np.ndarray


class Trajectory(NamedTuple):
    wdot: np.ndarray  # (k_max + 1, S)
    norms: np.ndarray  # sup-norm per step


@dataclass(frozen=True)
class HierarchyReport:
    is_hierarchical: bool
    neuron_order: tuple[int, ...] | None = None
    cycle_witness: tuple[int, ...] | None = None
    synapse_order: tuple[int, ...] | None = None


def assemble_system(
    network: Network,
    state: NetworkState,
    targets: Mapping[int, float] | None,
    gamma: float,
    synapse_order: Sequence[int] | None = None,
) -> BLSystem:
    """Build ``G`` and ``h`` from a network state.

    ``targets=None`` drops the error drive (``h = 0``); this is what the
    convergence sweeps use, since CM depends on ``G`` alone.
    """
    if not gamma >= 0:
        raise UsageError(f"gamma must be non-negative, got {gamma}")
    S = network.n_synapses
    if synapse_order is None:
        idx = np.arange(S)
    else:
        idx = np.asarray(synapse_order, dtype=np.intp) - 1
        if sorted(idx.tolist()) != list(range(S)):
            raise UsageError("synapse_order must be a permutation of the synapse ids")

    pre = network.pre[idx]
    post = network.post[idx]
    r, p = state.r, state.p
    r_post = r[post]
    if np.any(r_post == 0.0) or not np.all(np.isfinite(r_post)):
        bad = sorted({int(n) + 1 for n in post[(r_post == 0.0) | ~np.isfinite(r_post)]})
        raise DegenerateStateError(f"post-synaptic neurons {bad} have zero or non-finite rate")

    rho, lam = network.rho[post], network.lam[post]
    alpha, eps = network.alpha[idx], network.epsilon[idx]
    K = alpha * eps * r[pre] * rho * lam * sigmoid_prime(lam * p[post])
    row_gain = K / r_post
    col_gain = network.eta[idx] * network.w[idx] / alpha
    G = np.where(pre[None, :] == post[:, None], np.outer(row_gain, col_gain), 0.0)

    h = np.zeros(S)
    if targets is not None:
        _check_targets(network, targets)
        tgt = np.full(network.n_neurons, np.nan)
        for n, v in targets.items():
            tgt[n - 1] = v
        is_out = np.zeros(network.n_neurons, dtype=bool)
        is_out[[n - 1 for n in network.output_ids]] = True
        drive = np.where(is_out[post], r_post - np.nan_to_num(tgt[post]), 0.0)
        h = -K * gamma * drive
        h[h == 0.0] = 0.0  # avoid -0.0

    return BLSystem(
        G=G,
        h=h,
        synapse_order=tuple(int(i) + 1 for i in idx),
        row_gain=row_gain,
        col_gain=col_gain,
        pre=pre,
        post=post,
        n_neurons=network.n_neurons,
    )


def permute_system(sys: BLSystem, synapse_order: Sequence[int]) -> BLSystem:
    """Re-enumerate the synapses of an assembled system."""
    pos = {sid: i for i, sid in enumerate(sys.synapse_order)}
    try:
        idx = np.array([pos[s] for s in synapse_order], dtype=np.intp)
    except KeyError as exc:
        raise UsageError(f"unknown synapse id {exc.args[0]}") from None
    if len(set(idx.tolist())) != sys.size or len(idx) != sys.size:
        raise UsageError("synapse_order must be a permutation of the synapse ids")
    return BLSystem(
        G=sys.G[np.ix_(idx, idx)],
        h=sys.h[idx],
        synapse_order=tuple(int(s) for s in synapse_order),
        row_gain=sys.row_gain[idx],
        col_gain=sys.col_gain[idx],
        pre=sys.pre[idx],
        post=sys.post[idx],
        n_neurons=sys.n_neurons,
    )


def is_singular(det_IG: float, G: np.ndarray) -> bool:
    norm = float(np.abs(G).sum(axis=1).max()) if G.size else 0.0
    return abs(det_IG) < SINGULAR_DET_RTOL * max(1.0, norm)


def solvability_and_solution(sys: BLSystem) -> Solution:
    """``(det(I - G), (I - G)^-1 h)``; raises :class:`NoSolutionError` when singular."""
    S = sys.size
    if S == 0:
        return Solution(1.0, np.zeros(0))
    try:
        wdot, d = numerics.lu_solve_det(np.eye(S) - sys.G, sys.h)
    except SingularMatrixError as exc:
        raise NoSolutionError(f"I - G is singular: {exc}") from exc
    if is_singular(d, sys.G):
        raise NoSolutionError(f"I - G is singular (det = {d:.3g})")
    return Solution(d, wdot)


def constant_drive(G: np.ndarray, h: np.ndarray, decay: float = 1.0) -> Callable[[int], tuple[np.ndarray, np.ndarray]]:
    """Sequence ``k -> (G, h * decay**k)`` for :func:`iterate_wdot`."""
    h = np.asarray(h, dtype=float)
    return lambda k: (G, h * decay**k)


def iterate_wdot(
    sys_sequence: Callable[[int], tuple[np.ndarray, np.ndarray]] | BLSystem,
    wdot0: Sequence[float],
    k_max: int,
) -> Trajectory:
    """Run ``wdot(k+1) = G wdot(k) + h(k)`` for ``k = 0 .. k_max - 1``.

    A :class:`BLSystem` is accepted as shorthand for constant ``G`` and ``h``.
    """
    if k_max < 1:
        raise UsageError("k_max must be >= 1")
    if isinstance(sys_sequence, BLSystem):
        sys_sequence = constant_drive(sys_sequence.G, sys_sequence.h)
    w = np.array(wdot0, dtype=float)
    out = np.empty((k_max + 1, w.size))
    out[0] = w
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(k_max):
            G, h = sys_sequence(k)
            w = G @ w + h
            if not np.all(np.isfinite(w)):
                raise DivergenceError(f"wdot recursion overflowed at step {k + 1}", step=k + 1)
            out[k + 1] = w
    norms = np.abs(out).max(axis=1) if w.size else np.zeros(k_max + 1)
    return Trajectory(out, norms)


def convergence_measure(G) -> float:
    """Spectral radius of ``G``; the algorithm converges iff this is < 1."""
    return numerics.spectral_radius(G)[0]


def neuron_coupling_matrix(sys: BLSystem) -> np.ndarray:
    """N x N matrix sharing every nonzero eigenvalue of ``G``."""
    M = np.zeros((sys.n_neurons, sys.n_neurons))
    np.add.at(M, (sys.pre, sys.post), sys.row_gain * sys.col_gain)
    return M


def system_convergence_measure(sys: BLSystem, neuron_order: Sequence[int] | None = None) -> float:
    """CM of an assembled system through its neuron coupling matrix.

    Passing a topological ``neuron_order`` (1-based ids) makes the coupling
    matrix of a hierarchical network strictly upper triangular, so its CM
    comes out as exactly 0 instead of a roundoff-sized value.
    """
    if sys.size == 0:
        return 0.0
    M = neuron_coupling_matrix(sys)
    if neuron_order is not None:
        idx = np.asarray(neuron_order, dtype=np.intp) - 1
        M = M[np.ix_(idx, idx)]
    return convergence_measure(M)


def hierarchy_analysis(network: Network) -> HierarchyReport:
    """Decide whether the synapse digraph is acyclic.

    For hierarchical networks the report carries a topological neuron order
    and the synapse enumeration grouping synapses by post-neuron in that
    order (all of D_{n1}, then D_{n2}, ...).  Under it ``G[i, j] = 0`` for
    every ``j <= i``.
    """
    order = network.topological_order
    if order is None:
        return HierarchyReport(False, cycle_witness=tuple(network.find_cycle()))
    position = {n: k for k, n in enumerate(order)}
    syn_order = sorted(network.synapses, key=lambda s: (position[s.post], s.id))
    return HierarchyReport(True, neuron_order=order, synapse_order=tuple(s.id for s in syn_order))


def convergence_verdict(cm: float) -> str:
    return "converges" if cm < 1.0 else "does not converge"


def dump_system_csv(sys: BLSystem, path: str | Path) -> None:
    """Write ``G`` with synapse-id headers and ``h`` as a trailing column."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["synapse"] + [str(s) for s in sys.synapse_order] + ["h"])
        for sid, row, hi in zip(sys.synapse_order, sys.G, sys.h):
            writer.writerow([str(sid)] + [f"{v:.17g}" for v in row] + [f"{hi:.17g}"])
