import numpy as np
import pytest

from fasura.codebook import generate_codebook
from fasura.config import SystemConfig, paper_config, smoke_config
from fasura.polar import polar_spec_from_config

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def smoke_cfg():
    return smoke_config()


@pytest.fixture(scope="session")
def smoke_cb(smoke_cfg):
    return generate_codebook(smoke_cfg)


@pytest.fixture(scope="session")
def smoke_spec(smoke_cfg):
    return polar_spec_from_config(smoke_cfg)


@pytest.fixture(scope="session")
def full_cfg():
    return paper_config()


@pytest.fixture(scope="session")
def full_cb(full_cfg):
    return generate_codebook(full_cfg)


@pytest.fixture(scope="session")
def tiny_cfg():
    # 16 columns, 16 symbols of 2 chips, 8 pilot chips: n = 8 + 16*2
    return SystemConfig(B=20, B_f=4, n=40, n_p=8, L=2, n_c=32, M=2, K=2, list_size=4, crc_len=12)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
