"""
pytest 公共配置：可选的复现数据路径。
"""

from pathlib import Path

import pytest

from src.infrastructure.config import load_run_config

ROOT = Path(__file__).resolve().parent.parent


def pytest_addoption(parser):
    parser.addoption('--replication-ert', action='store', default=None,
                     help='ERT CSV of the 12-solver portfolio (defaults to labels.path in configs/full.yaml)')


@pytest.fixture
def full_run_config():
    """全规模配置（configs/full.yaml）。"""
    _, run = load_run_config(str(ROOT / 'configs' / 'full.yaml'))
    return run


@pytest.fixture
def replication_ert(request, full_run_config):
    """复现用的 ERT CSV 路径；文件不存在时跳过测试。"""
    option = request.config.getoption('--replication-ert')
    path = Path(option) if option else ROOT / full_run_config.labels.path
    if not path.is_file():
        pytest.skip(f"12-solver ERT data not supplied ({path} not found; pass --replication-ert)")
    return str(path)
