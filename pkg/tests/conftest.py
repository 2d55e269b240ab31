import numpy as np
import pytest

from blconv.model import Network, Neuron, Synapse

# criterion lines collected by test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def chain_network(w_a=2.0, w_b=1.0, with_third=True):
    """input(1) -a-> 2 -b-> 3, all unit parameters, excitatory."""
    neurons = [Neuron(1, is_input=True), Neuron(2, is_output=not with_third)]
    synapses = [Synapse(1, 1, 2, w=w_a)]
    if with_third:
        neurons.append(Neuron(3, is_output=True))
        synapses.append(Synapse(2, 2, 3, w=w_b))
    return Network(tuple(neurons), tuple(synapses))


def layered_network(sizes, rng, w_range=(0.2, 1.5), random_params=False):
    """Fully connected layered network; first layer inputs, last layer outputs."""
    neurons, synapses = [], []
    layers, nid = [], 1
    for li, size in enumerate(sizes):
        ids = []
        for _ in range(size):
            kw = {}
            if random_params:
                kw = dict(
                    rho=rng.uniform(0.5, 2.0), lam=rng.uniform(0.5, 2.0), theta=rng.uniform(-0.5, 0.5)
                )
            neurons.append(Neuron(nid, is_input=li == 0, is_output=li == len(sizes) - 1, **kw))
            ids.append(nid)
            nid += 1
        layers.append(ids)
    for a_layer, b_layer in zip(layers, layers[1:]):
        for a in a_layer:
            for b in b_layer:
                kw = {}
                if random_params:
                    kw = dict(eta=rng.uniform(0.5, 2.0), alpha=rng.uniform(0.5, 2.0))
                synapses.append(
                    Synapse(
                        len(synapses) + 1,
                        a,
                        b,
                        epsilon=int(rng.choice([-1, 1])),
                        w=rng.uniform(*w_range),
                        **kw,
                    )
                )
    return Network(tuple(neurons), tuple(synapses))


def random_dag_network(rng, n_max=20, max_synapses=None, edge_prob=0.3):
    """Random hierarchical network whose neuron ids are *not* in topological order.

    Neurons without dendritic synapses become inputs; sinks become outputs.
    """
    N = int(rng.integers(3, n_max + 1))
    rank = rng.permutation(N)  # rank[k] = topological position of neuron k+1
    pairs = [(a, b) for a in range(1, N + 1) for b in range(1, N + 1) if rank[a - 1] < rank[b - 1]]
    rng.shuffle(pairs)
    chosen = [p for p in pairs if rng.random() < edge_prob]
    if max_synapses is not None:
        chosen = chosen[:max_synapses]
    if not chosen:
        chosen = pairs[:1]
    has_in = {b for _, b in chosen}
    has_out = {a for a, _ in chosen}
    neurons = []
    for n in range(1, N + 1):
        neurons.append(
            Neuron(
                n,
                rho=rng.uniform(0.5, 2.0),
                lam=rng.uniform(0.5, 2.0),
                theta=rng.uniform(-0.5, 0.5),
                is_input=n not in has_in,
                is_output=n in has_in and n not in has_out,
            )
        )
    synapses = [
        Synapse(
            k + 1,
            a,
            b,
            epsilon=int(rng.choice([-1, 1])),
            w=rng.uniform(0.1, 1.5),
            eta=rng.uniform(0.5, 2.0),
            alpha=rng.uniform(0.5, 2.0),
        )
        for k, (a, b) in enumerate(chosen)
    ]
    return Network(tuple(neurons), tuple(synapses))


def random_problem(network, rng):
    inputs = {n: rng.uniform(0.2, 1.0) for n in network.input_ids}
    targets = {n: rng.uniform(0.2, 0.8) * network.neurons[n - 1].rho for n in network.output_ids}
    return inputs, targets


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
