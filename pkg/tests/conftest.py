import pytest

from scattomo.schemas.deconvolution_schemas import KernelConfig
from scattomo.schemas.hilbert_schemas import UnitaryKind
from scattomo.schemas.waveguide_schemas import QubitParams
from scattomo.services import protocol_service


@pytest.fixture(scope="session")
def elastic_oracle():
    """Number-conserving scatterer on two modes, n_max = 6."""
    return protocol_service.build_oracle(2, 6, UnitaryKind.ELASTIC, seed=7)


@pytest.fixture(scope="session")
def elastic_oracle_n8():
    """Same family with room for the brighter rungs of a power ladder."""
    return protocol_service.build_oracle(2, 8, UnitaryKind.ELASTIC, seed=7)


@pytest.fixture(scope="session")
def general_oracle():
    return protocol_service.build_oracle(2, 6, UnitaryKind.GENERAL, seed=8)


@pytest.fixture(scope="session")
def identity_oracle():
    return protocol_service.build_oracle(2, 6, UnitaryKind.IDENTITY, seed=0)


@pytest.fixture
def qubit():
    return QubitParams(omega0=100.0, gamma=1.0)


@pytest.fixture
def kernel_config():
    return KernelConfig(sigma=0.5, q_max=40)
