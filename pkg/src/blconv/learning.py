"""Learning: forward pass, solve for the weight derivatives, Euler update.

The weight derivatives ``wdot* = (I - G)^-1 h`` of a hierarchical network equal
``-alpha_s * gamma / eta_s * dE/dw_s``; :func:`bp_equivalence_check` measures
that against central finite differences of the error.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, NamedTuple

import numpy as np

from .bl_core import assemble_system, solvability_and_solution, system_convergence_measure
from .errors import UsageError
from .model import Network, _check_targets, forward, network_error

logger = logging.getLogger(__name__)

MONOTONE_TOL = 1e-12


@dataclass(frozen=True)
class LearningConfig:
    gamma: float = 1.0
    step: float = 0.05
    max_steps: int = 20_000
    stop_error: float = 1e-6

    def __post_init__(self):
        # gamma = 0 is accepted: it switches the error drive off
        if not self.gamma >= 0:
            raise UsageError(f"gamma must be non-negative, got {self.gamma}")
        if not self.step > 0:
            raise UsageError(f"step must be positive, got {self.step}")
        if self.max_steps < 1:
            raise UsageError("max_steps must be >= 1")


class StepResult(NamedTuple):
    network: Network
    wdot_star: np.ndarray
    error: float


@dataclass(frozen=True)
class TrainRecord:
    step: int
    error: float
    wdot_inf_norm: float
    cm: float


@dataclass
class TrainTrace:
    records: list[TrainRecord] = field(default_factory=list)
    network: Network | None = None
    final_error: float = float("nan")
    # steps whose update raised E by more than MONOTONE_TOL
    violations: list[int] = field(default_factory=list)

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.error for r in self.records])

    @property
    def monotone(self) -> bool:
        return not self.violations


def weight_derivatives(network: Network, inputs, targets, gamma: float):
    """``(state, error, system, wdot*)`` at the current weights."""
    state = forward(network, inputs)
    err = network_error(network, state, targets)
    sys = assemble_system(network, state, targets, gamma)
    sol = solvability_and_solution(sys)
    return state, err, sys, sol.wdot_star


def _apply_update(network: Network, wdot: np.ndarray, step: float) -> Network:
    # strengths are non-negative by model definition; the sign lives in epsilon
    w = np.maximum(network.w + step * wdot, 0.0)
    return network.with_weights(w)


def train_step(network: Network, inputs, targets, cfg: LearningConfig) -> StepResult:
    """One explicit Euler step ``w <- w + step * wdot*``; returns the new error."""
    _, _, _, wdot = weight_derivatives(network, inputs, targets, cfg.gamma)
    new_net = _apply_update(network, wdot, cfg.step)
    err = network_error(new_net, forward(new_net, inputs), targets)
    return StepResult(new_net, wdot, err)


def train(network: Network, inputs, targets, cfg: LearningConfig) -> TrainTrace:
    """Iterate :func:`train_step` until ``E <= stop_error`` or ``max_steps`` records.

    Each record describes the state *before* that step's update; an
    already-converged network yields a single record.
    """
    hierarchical = network.topological_order is not None
    trace = TrainTrace()
    net = network
    err = None
    for k in range(cfg.max_steps):
        state, e_now, sys, wdot = weight_derivatives(net, inputs, targets, cfg.gamma)
        if err is not None and e_now > err + MONOTONE_TOL:
            trace.violations.append(k)
        err = e_now
        cm = 0.0 if hierarchical else system_convergence_measure(sys)
        trace.records.append(TrainRecord(k, err, float(np.abs(wdot).max(initial=0.0)), cm))
        if err <= cfg.stop_error:
            break
        net = _apply_update(net, wdot, cfg.step)
    else:
        err = network_error(net, forward(net, inputs), targets)
        if err > trace.records[-1].error + MONOTONE_TOL:
            trace.violations.append(cfg.max_steps)
    if trace.violations:
        logger.warning("error increased on %d step(s) at step %g", len(trace.violations), cfg.step)
    trace.network = net
    trace.final_error = err
    return trace


def trace_csv(trace: TrainTrace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "E", "wdot_inf_norm", "CM"])
    for rec in trace.records:
        writer.writerow([rec.step, f"{rec.error:.17g}", f"{rec.wdot_inf_norm:.17g}", f"{rec.cm:.17g}"])
    return buf.getvalue()


def write_trace_csv(trace: TrainTrace, path: str | Path) -> None:
    Path(path).write_text(trace_csv(trace))


def _error_extended(network: Network, inputs, targets, w) -> np.longdouble:
    """Error of a hierarchical network evaluated in ``np.longdouble``.

    Central differences at ``delta = 1e-6`` lose about ``eps * E / delta``
    to cancellation; extended precision pushes that floor well below the
    gradients being checked.
    """
    ld = np.longdouble
    r = np.zeros(network.n_neurons, dtype=ld)
    for n, v in inputs.items():
        r[n - 1] = ld(v)
    for n in network.topological_order:
        nrn = network.neurons[n - 1]
        if nrn.is_input:
            continue
        p = -ld(nrn.theta)
        for sid in network.dendritic[n]:
            syn = network.synapses[sid - 1]
            p += ld(syn.epsilon) * ld(syn.eta) * w[sid - 1] * r[syn.pre - 1]
        r[n - 1] = ld(nrn.rho) / (ld(1) + np.exp(-ld(nrn.lam) * p))
    return sum((r[n - 1] - ld(targets[n])) ** 2 for n in network.output_ids) / ld(2)


def finite_diff_gradient(
    network: Network,
    inputs: Mapping[int, float],
    targets: Mapping[int, float],
    s: int,
    delta: float = 1e-6,
) -> float:
    """Central difference ``(E(w_s + delta) - E(w_s - delta)) / (2 delta)``.

    Hierarchical networks are evaluated in extended precision; recurrent ones
    go through the float64 fixed-point forward pass.
    """
    if not delta > 0:
        raise UsageError("delta must be positive")
    if not 1 <= s <= network.n_synapses:
        raise UsageError(f"invalid synapse id {s}")
    _check_targets(network, targets)
    forward(network, inputs)  # validates inputs

    if network.topological_order is not None:
        w = network.w.astype(np.longdouble)
        ws = w[s - 1]
        w[s - 1] = ws + np.longdouble(delta)
        up = _error_extended(network, inputs, targets, w)
        w[s - 1] = ws - np.longdouble(delta)
        down = _error_extended(network, inputs, targets, w)
        return float((up - down) / (2 * np.longdouble(delta)))

    def err_at(value: float) -> float:
        w = network.w.copy()
        w[s - 1] = value
        return network_error(network, forward(network, inputs, weights=w), targets)

    ws = network.w[s - 1]
    return (err_at(ws + delta) - err_at(ws - delta)) / (2.0 * delta)


def gradient_flow(network: Network, inputs, targets, gamma: float, delta: float = 1e-6) -> np.ndarray:
    """``-alpha_s * gamma / eta_s * dE/dw_s`` for every synapse, by finite differences."""
    grad = np.array(
        [finite_diff_gradient(network, inputs, targets, s.id, delta) for s in network.synapses]
    )
    return -network.alpha * gamma / network.eta * grad


def bp_equivalence_check(
    network: Network,
    inputs: Mapping[int, float],
    targets: Mapping[int, float],
    cfg: LearningConfig,
    delta: float = 1e-6,
) -> float:
    """Max over synapses of ``|wdot*_s - ref_s| / max(1e-12, |ref_s|)``."""
    if network.topological_order is None:
        raise UsageError("the equivalence check needs a hierarchical network")
    _, _, _, wdot = weight_derivatives(network, inputs, targets, cfg.gamma)
    ref = gradient_flow(network, inputs, targets, cfg.gamma, delta)
    if wdot.size == 0:
        return 0.0
    return float(np.max(np.abs(wdot - ref) / np.maximum(1e-12, np.abs(ref))))
