"""
テスト共通の設定とパラメータセット
"""

import numpy as np
import pytest

from lambda_model import BoundedConstraint, LambdaParams, PAPConstraint


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="slow マーカー付きのテストも実行する")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="--runslow を指定した場合のみ実行")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


@pytest.fixture
def pap():
    return PAPConstraint(g_max=1.0)


@pytest.fixture
def symmetric_pap(pap):
    """γ₁ᴿ = γ₂ᴿ、位相緩和なしの PAP"""
    return LambdaParams(kappa_R=0.1, gamma1_R=2.5e-3, gamma2_R=2.5e-3, constraint=pap)


@pytest.fixture
def dephased(pap):
    return LambdaParams(
        kappa_R=0.1, gamma1_R=2.5e-3, gamma2_R=2e-3, gamma1_phi=1e-3, gamma2_phi=1e-3, constraint=pap
    )


@pytest.fixture
def pap_low_loss(pap):
    """dephased のすべてのレートを 1/10 にした PAP"""
    return LambdaParams(
        kappa_R=0.01, gamma1_R=2.5e-4, gamma2_R=2e-4, gamma1_phi=1e-4, gamma2_phi=1e-4, constraint=pap
    )


@pytest.fixture
def lambda_base(pap):
    return LambdaParams(kappa_R=0.025, gamma2_R=2.5e-4, constraint=pap)


@pytest.fixture
def bounded_dephased():
    return LambdaParams(
        kappa_R=0.1,
        gamma1_R=2.5e-3,
        gamma2_R=2e-3,
        gamma1_phi=1e-3,
        gamma2_phi=1e-3,
        constraint=BoundedConstraint(g1_max=1.0, g2_max=2.0),
    )


@pytest.fixture
def zero_rates(pap):
    return LambdaParams(constraint=pap)


def random_hermitian(rng, dim: int, scale: float = 1.0) -> np.ndarray:
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * 0.5 * (x + x.conj().T)


def random_density(rng, dim: int) -> np.ndarray:
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = x @ x.conj().T
    return rho / np.trace(rho).real
