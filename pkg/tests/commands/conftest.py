import json
from pathlib import Path

import pytest

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


@pytest.fixture
def bundled_config():
    """Path of a config shipped in configs/."""

    def path(name: str) -> str:
        return str(CONFIGS / name)

    return path


@pytest.fixture
def write_config(tmp_path):
    """Write a JSON config into the test directory and return its path."""

    def write(content: dict, name: str = "config.json") -> str:
        path = tmp_path / name
        path.write_text(json.dumps(content), encoding="utf-8")
        return str(path)

    return write
