import pytest

from backend.adaptation.circuit_ir import CostModel, load_cost_model


@pytest.fixture(scope="session")
def d0() -> CostModel:
    return load_cost_model("spin_d0")


@pytest.fixture(scope="session")
def d1() -> CostModel:
    return load_cost_model("spin_d1")
