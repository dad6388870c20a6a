import pytest

from reokit import automata, circuit, rescue


@pytest.fixture(scope="session")
def rescue_circuit():
    return rescue.builtin_circuit()


@pytest.fixture(scope="session")
def rescue_auto(rescue_circuit):
    # compiled once; ~3s, shared across every test that needs it
    return automata.compile_circuit(rescue_circuit)


@pytest.fixture(scope="session")
def rescue_boundary(rescue_circuit):
    ins, outs = circuit.boundary_ports(rescue_circuit)
    return (
        frozenset(p.name for p in ins),
        frozenset(p.name for p in outs),
    )


@pytest.fixture(scope="session")
def rescue_rules():
    return rescue.builtin_rules()
