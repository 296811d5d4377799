import pytest

from src.core_model import JumpDist, ModelParams


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: statistical acceptance runs (deselect with -m 'not slow')")


@pytest.fixture
def path_params():
    """Path-illustration setup: beta=1.5, rho=2, X~Exp(1), Y~Exp(2)."""
    return ModelParams(
        lambda0=1.0,
        beta=1.5,
        rho=2.0,
        jump_self=JumpDist.exponential(1.0),
        jump_ext=JumpDist.exponential(2.0),
    )


@pytest.fixture
def curve_params():
    """Moment-curve setup: beta=0.25, rho=1.25, X~Exp(3), Y~Exp(10)."""
    return ModelParams(
        lambda0=1.0,
        beta=0.25,
        rho=1.25,
        jump_self=JumpDist.exponential(3.0),
        jump_ext=JumpDist.exponential(10.0),
    )


@pytest.fixture
def light_tail_params():
    """Like the moment-curve setup but with lambda^-2 of finite variance (X~Exp(6))."""
    return ModelParams(
        lambda0=1.0,
        beta=0.25,
        rho=1.25,
        jump_self=JumpDist.exponential(6.0),
        jump_ext=JumpDist.exponential(10.0),
    )


@pytest.fixture
def self_correcting_params():
    """No external arrivals: lambda0=beta=1, X=1."""
    return ModelParams(
        lambda0=1.0,
        beta=1.0,
        rho=0.0,
        jump_self=JumpDist.deterministic(1.0),
        jump_ext=JumpDist.exponential(1.0),
    )
