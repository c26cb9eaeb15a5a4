from __future__ import annotations

import shutil
from importlib import resources
from pathlib import Path

import pytest

from janus_cpi.cli import main

ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def bundled_camp_dir() -> Path:
    return Path(str(resources.files("janus_cpi").joinpath("data/synthetic_camp")))


@pytest.fixture(scope="session")
def camp_run(tmp_path_factory) -> Path:
    """The bundled synthetic camp, simulated and analysed once per session."""
    work = tmp_path_factory.mktemp("camp")
    src = bundled_camp_dir()
    for f in src.iterdir():
        shutil.copy(f, work / f.name)
    assert main(["run", "--config", str(work / "camp.yaml")]) == 0
    return work


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2} {title}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
