import numpy as np
import pytest

from tgc.config import Config
from tgc.data import Record, write_dataset

# small enough that a 5-epoch run takes well under a second
TINY = Config(d_embed=8, widths=(8, 4), d_fuse=4, epochs=5, batch_size=8)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def toy_records():
    texts = [
        ("apple banana apple cherry", "fruit"),
        ("banana cherry banana", "fruit"),
        ("engine wheel brake engine", "car"),
        ("wheel brake gear", "car"),
    ]
    return [
        Record(f"r{i}", t, lab, {"image": [float(i), float(i % 2), 1.0]})
        for i, (t, lab) in enumerate(texts)
    ]


@pytest.fixture
def toy_path(tmp_path, toy_records):
    path = tmp_path / "toy.jsonl"
    write_dataset(toy_records, path)
    return path


def pytest_terminal_summary(terminalreporter):
    lines = [
        value
        for key in ("passed", "failed")
        for rep in terminalreporter.stats.get(key, [])
        for name, value in getattr(rep, "user_properties", [])
        if name == "criterion" and rep.when == "call"
    ]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
