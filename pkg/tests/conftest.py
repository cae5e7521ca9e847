import numpy as np
import pytest

from arithseal.coder import decode_stream, encode_stream_bits
from arithseal.model import build_model

ACCEPTANCE_LINES = []


def letters(text):
    return [ord(c) - ord("A") for c in text]


def text(symbols):
    return "".join(chr(ord("A") + int(s)) for s in symbols)


@pytest.fixture(scope="session")
def demo_model():
    return build_model([1, 2, 3, 4])


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # compile the numba kernels once so timed tests measure coding, not jit
    m = build_model([1, 2, 3, 4])
    data, _ = encode_stream_bits(m, np.array([0, 1, 2, 3]))
    decode_stream(m, data, 4)
    decode_stream(build_model(list(range(1, 40))), b"\x00", 1, strict=False)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
