from pathlib import Path

import pytest

from accessprice import cli

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(scope="session")
def ref_cfg():
    return cli.load_config(str(CONFIG_DIR / "ref.json"))


@pytest.fixture(scope="session")
def section5_cfg():
    return cli.load_config(str(CONFIG_DIR / "section5.json"))


@pytest.fixture(scope="session")
def competitive_cfg():
    return cli.load_config(str(CONFIG_DIR / "competitive.json"))


@pytest.fixture(scope="session")
def config_dir():
    return CONFIG_DIR
