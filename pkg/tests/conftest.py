import os

import numpy as np
import pytest

from hqcc.qsim import CompiledPQC, Constant, GateInstance, GateKind, InputSlot, ThetaSlot

ALL_KINDS = list(GateKind)

# (criterion, passed, detail) lines filled in by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{ok:<4} {name}: {detail}")


def random_pqc(rng, n_qubits, n_gates, n_inputs=None, kinds=None):
    """Random circuit over ``kinds``; input slots are reused so reloading is exercised."""
    n_inputs = n_qubits if n_inputs is None else n_inputs
    kinds = [k for k in (kinds or ALL_KINDS) if k.arity <= n_qubits]
    gates = []
    n_params = 0
    for _ in range(n_gates):
        kind = kinds[rng.integers(len(kinds))]
        qubits = tuple(int(q) for q in rng.choice(n_qubits, size=kind.arity, replace=False))
        param = None
        if kind.parameterized:
            r = rng.random()
            if r < 0.5:
                param = ThetaSlot(n_params)
                n_params += 1
            elif r < 0.85:
                param = InputSlot(int(rng.integers(n_inputs)))
            else:
                param = Constant(float(rng.uniform(-np.pi, np.pi)))
        gates.append(GateInstance(kind, qubits, param))
    return CompiledPQC(n_qubits, n_inputs, n_params, tuple(gates))


def random_bindings(rng, pqc):
    return rng.uniform(-np.pi, np.pi, pqc.n_inputs), rng.uniform(-np.pi, np.pi, pqc.n_params)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def mnist_subset(tmp_path_factory):
    """IDX pair for the bundled 5000-image MNIST sample (HQCC_MNIST_DIR overrides)."""
    from hqcc import mnist_subset as ms

    d = os.environ.get("HQCC_MNIST_DIR")
    if d:
        return os.path.join(d, ms.IMAGES_NAME), os.path.join(d, ms.LABELS_NAME)
    here = os.path.join(os.path.dirname(__file__), "..", "data")
    if os.path.exists(os.path.join(here, ms.IMAGES_NAME)):
        return os.path.join(here, ms.IMAGES_NAME), os.path.join(here, ms.LABELS_NAME)
    if ms.find_csv() is None:
        pytest.fail("no MNIST subset available: run scripts/prepare_mnist_subset.py or set HQCC_MNIST_DIR")
    return ms.prepare(str(tmp_path_factory.mktemp("mnist")))


def write_toy_idx(directory, n_per_class=40, size=8, seed=0):
    """Two learnable classes: bright left half vs bright right half, plus noise."""
    from hqcc.data import LabeledImageSet, write_idx

    rng = np.random.default_rng(seed)
    labels = np.repeat([0, 1], n_per_class)
    images = rng.uniform(0, 0.3, size=(len(labels), size, size))
    images[labels == 0, :, : size // 2] += 0.6
    images[labels == 1, :, size // 2:] += 0.6
    ip, lp = os.path.join(directory, "toy-images"), os.path.join(directory, "toy-labels")
    write_idx(ip, lp, LabeledImageSet(np.clip(images, 0, 1), labels, 2))
    return ip, lp


def toy_config(directory, **train):
    from hqcc.config import DataConfig, RunConfig, SearchConfig, TrainConfig
    from hqcc.model import ModelConfig

    ip, lp = write_toy_idx(directory)
    return RunConfig(
        data=DataConfig(images=ip, labels=lp, classes=(0, 1), n_train=24, n_test=10, class_count=2),
        model=ModelConfig(input_shape=(8, 8), conv_channels=(1,), window=(2, 2), n_layers=2, fc_hidden=()),
        train=TrainConfig(**{"lr": 0.02, "batch_size": 8, "epochs": 3, **train}),
        search=SearchConfig(genome_batch=2, inner_epochs=1, iterations=2, val_fraction=0.25),
        seed=3,
    )


@pytest.fixture
def toy(tmp_path):
    return toy_config(str(tmp_path))
