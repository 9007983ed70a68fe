import numpy as np
import pytest

from pnpch.grid_ops import PeriodicGrid


def dense_matrix(op, grid):
    """Assemble a linear cell-field operator column by column from unit vectors."""
    n = grid.size
    A = np.zeros((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        A[:, j] = np.ravel(op(e.reshape(grid.shape)))
    return A


@pytest.fixture
def rng():
    return np.random.default_rng(20201019)


@pytest.fixture(params=[1, 2, 3], ids=["1d", "2d", "3d"])
def grid8(request):
    return PeriodicGrid(request.param, 8, -1.0, 1.0)


# acceptance criteria register their parts here; one line per criterion is printed at the end
ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


def record(criterion: int, part: str, ok: bool, detail: str) -> None:
    ACCEPTANCE.setdefault(criterion, []).append((part, bool(ok), detail))
    print(f"criterion {criterion} [{part}]: {'PASS' if ok else 'FAIL'} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[k]
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{name}: {'ok' if good else 'FAILED'} ({d})" for name, good, d in parts)
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} - {detail}")
