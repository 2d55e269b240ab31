import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blconv.bl_core import (
    BLSystem,
    assemble_system,
    constant_drive,
    convergence_measure,
    dump_system_csv,
    hierarchy_analysis,
    iterate_wdot,
    neuron_coupling_matrix,
    permute_system,
    solvability_and_solution,
    system_convergence_measure,
    convergence_verdict,
)
from blconv.errors import DegenerateStateError, DivergenceError, NoSolutionError, UsageError
from blconv.model import Network, Neuron, Synapse, forward, sigmoid
from blconv.numerics import spectral_radius
from conftest import chain_network, layered_network, random_dag_network, random_problem


def system_from(G, h):
    G = np.asarray(G, dtype=float)
    S = len(G)
    z = np.zeros(S)
    return BLSystem(G, np.asarray(h, dtype=float), tuple(range(1, S + 1)), z, z, z.astype(int), z.astype(int), 1)


def ring_network(n, w=0.4):
    """Input 1 feeding a directed ring 2 -> 3 -> ... -> n -> 2."""
    neurons = [Neuron(1, is_input=True)] + [Neuron(k, is_output=k == n) for k in range(2, n + 1)]
    synapses = [Synapse(1, 1, 2, w=w)]
    for k in range(2, n + 1):
        synapses.append(Synapse(len(synapses) + 1, k, 2 if k == n else k + 1, w=w))
    return Network(tuple(neurons), tuple(synapses))


class TestAssemble:
    def test_chain_entry(self):
        net = chain_network(w_a=2.0, w_b=1.0)
        state = forward(net, {1: 1.0})
        sys = assemble_system(net, state, {3: 0.5}, gamma=1.0)
        # G[a, b] = r1 * sigma'(2) / sigma(2) * w_b = 1 - sigma(2)
        assert sys.G[0, 1] == pytest.approx(1 - sigmoid(2.0), abs=1e-12)
        assert sys.G[0, 1] == pytest.approx(0.1192029, abs=1e-7)
        assert sys.G[1, 0] == 0.0 and sys.G[0, 0] == 0.0 and sys.G[1, 1] == 0.0

    def test_chain_drive(self):
        net = chain_network(w_a=2.0, w_b=1.0)
        state = forward(net, {1: 1.0})
        sys = assemble_system(net, state, {3: 0.5}, gamma=2.0)
        r2, r3 = state.rate(2), state.rate(3)
        s3 = sigmoid(state.potential(3))
        assert sys.h[0] == 0.0
        assert sys.h[1] == pytest.approx(-r2 * s3 * (1 - s3) * 2.0 * (r3 - 0.5), rel=1e-12)

    def test_terminal_outputs_give_zero_G(self, rng):
        net = layered_network([3, 2], rng)
        state = forward(net, {1: 0.5, 2: 0.5, 3: 0.5})
        sys = assemble_system(net, state, {4: 0.2, 5: 0.3}, 1.0)
        assert not sys.G.any()
        assert sys.h.any()

    def test_gamma_zero_gives_zero_drive(self, rng):
        net = layered_network([3, 4, 2], rng)
        inputs, targets = random_problem(net, rng)
        sys = assemble_system(net, forward(net, inputs), targets, 0.0)
        assert not sys.h.any()
        assert not np.signbit(sys.h).any()

    def test_targets_none(self, rng):
        net = layered_network([2, 2], rng)
        sys = assemble_system(net, forward(net, {1: 0.5, 2: 0.5}), None, 1.0)
        assert not sys.h.any()

    def test_zero_rate_rejected(self):
        # theta pushes the post-neuron deep into saturation at zero
        net = Network((Neuron(1, is_input=True), Neuron(2, theta=1e4, is_output=True)), (Synapse(1, 1, 2),))
        state = forward(net, {1: 1.0})
        with pytest.raises(DegenerateStateError):
            assemble_system(net, state, {2: 0.5}, 1.0)

    def test_negative_gamma(self):
        net = chain_network()
        with pytest.raises(UsageError):
            assemble_system(net, forward(net, {1: 1.0}), {3: 0.5}, -1.0)

    def test_sparsity_pattern(self, rng):
        for _ in range(20):
            net = random_dag_network(rng)
            inputs, targets = random_problem(net, rng)
            sys = assemble_system(net, forward(net, inputs), targets, 1.0)
            for i, si in enumerate(net.synapses):
                for j, sj in enumerate(net.synapses):
                    if sj.pre != si.post:
                        assert sys.G[i, j] == 0.0
                if si.post not in net.output_ids:
                    assert sys.h[i] == 0.0

    def test_bad_order(self):
        net = chain_network()
        with pytest.raises(UsageError):
            assemble_system(net, forward(net, {1: 1.0}), None, 1.0, synapse_order=[1, 1])


class TestSolve:
    def test_zero_G(self):
        sol = solvability_and_solution(system_from(np.zeros((3, 3)), [1.0, -2.0, 0.5]))
        assert sol.det_IG == 1.0
        np.testing.assert_array_equal(sol.wdot_star, [1.0, -2.0, 0.5])

    def test_two_by_two(self):
        # (I - G) x = h with G = [[0, .5], [.5, 0]], h = [1, 0]
        sol = solvability_and_solution(system_from([[0, 0.5], [0.5, 0]], [1.0, 0.0]))
        assert sol.det_IG == pytest.approx(0.75)
        np.testing.assert_allclose(sol.wdot_star, [4 / 3, 2 / 3], rtol=1e-12)

    def test_singular(self):
        with pytest.raises(NoSolutionError):
            solvability_and_solution(system_from([[1.0]], [1.0]))

    def test_empty(self):
        sol = solvability_and_solution(system_from(np.zeros((0, 0)), []))
        assert sol.det_IG == 1.0 and sol.wdot_star.size == 0

    def test_fixed_point_residual(self, rng):
        for _ in range(20):
            net = random_dag_network(rng)
            inputs, targets = random_problem(net, rng)
            sys = assemble_system(net, forward(net, inputs), targets, 1.0)
            x = solvability_and_solution(sys).wdot_star
            assert np.abs(x - sys.G @ x - sys.h).max() <= 1e-10 * (1 + np.abs(sys.h).max())


class TestHierarchy:
    def test_dag_det_one_and_triangular(self, rng):
        for _ in range(30):
            net = random_dag_network(rng)
            inputs, targets = random_problem(net, rng)
            report = hierarchy_analysis(net)
            assert report.is_hierarchical
            sys = assemble_system(net, forward(net, inputs), targets, 1.0, report.synapse_order)
            assert not np.tril(sys.G).any()
            assert solvability_and_solution(sys).det_IG == 1.0
            assert system_convergence_measure(sys, report.neuron_order) == 0.0

    def test_self_loop_witness(self):
        net = Network(
            (Neuron(1, is_input=True), Neuron(2, is_output=True)),
            (Synapse(1, 1, 2), Synapse(2, 2, 2, w=0.3)),
        )
        report = hierarchy_analysis(net)
        assert not report.is_hierarchical
        assert report.cycle_witness == (2,)

    def test_ring_witness(self):
        net = ring_network(5)
        witness = hierarchy_analysis(net).cycle_witness
        assert sorted(witness) == [2, 3, 4, 5]
        for a, b in zip(witness, witness[1:] + witness[:1]):
            assert any(s.pre == a and s.post == b for s in net.synapses)


class TestIterate:
    def test_zero_G_reaches_h_in_one_step(self):
        traj = iterate_wdot(system_from(np.zeros((2, 2)), [1.0, 2.0]), [5.0, 5.0], 3)
        np.testing.assert_array_equal(traj.wdot[1:], [[1.0, 2.0]] * 3)

    def test_geometric_growth(self):
        traj = iterate_wdot(constant_drive(np.array([[1.1]]), [0.0]), [1.0], 10)
        np.testing.assert_allclose(traj.wdot[:, 0], 1.1 ** np.arange(11), rtol=1e-14)
        np.testing.assert_allclose(traj.norms, 1.1 ** np.arange(11), rtol=1e-14)

    def test_converges_to_solution(self):
        sys = system_from([[0, 0.5], [0.5, 0]], [1.0, 0.0])
        traj = iterate_wdot(sys, [0.0, 0.0], 80)
        np.testing.assert_allclose(traj.wdot[-1], [4 / 3, 2 / 3], rtol=1e-12)

    def test_decaying_drive(self):
        traj = iterate_wdot(constant_drive(np.array([[0.5]]), [1.0], decay=0.9), [0.0], 400)
        assert traj.norms[-1] < 1e-15

    def test_overflow(self):
        with pytest.raises(DivergenceError) as info:
            iterate_wdot(constant_drive(np.array([[1e200]]), [0.0]), [1e200], 5)
        assert info.value.step == 1

    def test_bad_k(self):
        with pytest.raises(UsageError):
            iterate_wdot(system_from([[0.0]], [0.0]), [0.0], 0)


class TestConvergenceMeasure:
    def test_verdict(self):
        assert convergence_verdict(0.99) == "converges"
        assert convergence_verdict(1.0) == "does not converge"

    def test_ring_matches_full(self):
        net = ring_network(4, w=3.0)
        sys = assemble_system(net, forward(net, {1: 1.0}), None, 1.0)
        assert system_convergence_measure(sys) == pytest.approx(convergence_measure(sys.G), rel=1e-9)

    def test_reduced_equals_full_random(self, rng):
        # dense random recurrent network, several parallel synapses per pair
        for _ in range(10):
            N = 6
            neurons = tuple(Neuron(k, is_input=k == 1, lam=rng.uniform(0.5, 2)) for k in range(1, N + 1))
            synapses = []
            for _ in range(20):
                a, b = int(rng.integers(1, N + 1)), int(rng.integers(2, N + 1))
                synapses.append(
                    Synapse(len(synapses) + 1, a, b, epsilon=int(rng.choice([-1, 1])), w=rng.uniform(0, 0.6))
                )
            net = Network(neurons, tuple(synapses))
            sys = assemble_system(net, forward(net, {1: 0.7}), None, 1.0)
            full = spectral_radius(sys.G)[0]
            assert system_convergence_measure(sys) == pytest.approx(full, rel=1e-8, abs=1e-12)
            assert neuron_coupling_matrix(sys).shape == (N, N)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        net = ring_network(int(rng.integers(3, 7)), w=float(rng.uniform(0.5, 4)))
        sys = assemble_system(net, forward(net, {1: 1.0}), None, 1.0)
        order = [int(s) for s in rng.permutation(sys.synapse_order)]
        permuted = permute_system(sys, order)
        assert convergence_measure(permuted.G) == pytest.approx(convergence_measure(sys.G), rel=1e-9)


def test_dump_csv(tmp_path):
    net = chain_network()
    sys = assemble_system(net, forward(net, {1: 1.0}), {3: 0.5}, 1.0, synapse_order=[2, 1])
    path = tmp_path / "g.csv"
    dump_system_csv(sys, path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["synapse", "2", "1", "h"]
    assert [r[0] for r in rows[1:]] == ["2", "1"]
    G = np.array([[float(v) for v in r[1:-1]] for r in rows[1:]])
    np.testing.assert_array_equal(G, sys.G)
    np.testing.assert_array_equal([float(r[-1]) for r in rows[1:]], sys.h)
