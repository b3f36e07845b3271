import numpy as np
import pytest

from relightkit.oracle import sphere_normals
from relightkit.shading import GBuffer, encode_normals


def sphere_gbuffer(size=24, albedo=(0.8, 0.6, 0.5)):
    normals, disk = sphere_normals(size)
    return GBuffer(
        albedo=np.where(disk[..., None], np.asarray(albedo, dtype=np.float64), 0.0),
        normal=encode_normals(normals),
        mask=disk[..., None].astype(np.float64),
    )


@pytest.fixture
def gbuffer():
    return sphere_gbuffer()


ACCEPTANCE_LINES = []


def report(criterion: int, ok: bool, detail: str) -> None:
    """Record and print one pass/fail line for an acceptance criterion."""
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
