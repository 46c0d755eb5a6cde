import copy
import json

import pytest

BASE_CONFIG = {
    "time": {"c": 343.0, "t_final": 0.3, "n_steps": 40},
    "contour": {"lam": 0.9, "n_freq": 80},
    "rule": "backward-euler",
    "boundary_data": {"kind": "polynomial-pulse", "a": 25.0, "b": 300.0, "m": 10, "p": 150.0},
    "geometry": "sphere-analytic",
    "degree": 0,
    "observation": {"kind": "points", "points": [[1.1, 0.0, 0.0], [0.0, 2.0, 0.0]]},
    "output": {"directory": "out", "prefix": "t"},
    "workers": 1,
}


@pytest.fixture
def raw_config():
    return copy.deepcopy(BASE_CONFIG)


@pytest.fixture
def config_file(tmp_path, raw_config):
    def write(**changes):
        raw = copy.deepcopy(raw_config)
        raw.update(changes)
        path = tmp_path / "config.json"
        path.write_text(json.dumps(raw))
        return path

    return write


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def record(label, ok, detail):
        line = f"criterion {label}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
