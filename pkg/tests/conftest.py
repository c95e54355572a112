"""Shared test fixtures and independent oracle helpers.

The oracle implementations here are deliberately written from scratch
(plain loops, no imports from the package's own rng module) so that
golden values are derived independently of the code under test.
"""

from __future__ import annotations

import numpy as np
import pytest

from latentdiff.tensors import LatentTensor

MASK64 = 0xFFFFFFFFFFFFFFFF


def oracle_fnv1a(data: bytes) -> int:
    acc = 0xCBF29CE484222325
    for byte in data:
        acc ^= byte
        acc = (acc * 0x100000001B3) & MASK64
    return acc


def oracle_splitmix_next(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def oracle_unit(z: int) -> float:
    return (z >> 11) * 2.0**-53 * 2.0 - 1.0


def oracle_stream(seed: int, count: int) -> list[float]:
    state = seed & MASK64
    out = []
    for _ in range(count):
        state, z = oracle_splitmix_next(state)
        out.append(oracle_unit(z))
    return out


# Filled in by the acceptance tests; the terminal summary hook below
# prints one line per criterion so every run states its verdict.
ACCEPTANCE_RESULTS: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        name, ok, detail = ACCEPTANCE_RESULTS[number]
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {number} ({name}): {verdict} [{detail}]")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260815)


def random_tensor(gen: np.random.Generator, shape=(8,)) -> LatentTensor:
    return LatentTensor(gen.uniform(-2.0, 2.0, size=shape).astype(np.float32))


def random_unit_tensor(gen: np.random.Generator, size=8) -> LatentTensor:
    vec = gen.normal(size=size)
    vec /= np.linalg.norm(vec)
    return LatentTensor(vec.astype(np.float64))
