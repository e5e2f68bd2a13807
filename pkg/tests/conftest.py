import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fracoron import FieldFn, FracParams  # noqa: E402
from fracoron.quadrature import Feature  # noqa: E402
import oracles  # noqa: E402


def bump_field(params):
    """The oracle's bump sum as a FieldFn on the line."""
    u, du = oracles.bump_1d(params)
    lo = min(c - r for c, r, _ in params)
    hi = max(c + r for c, r, _ in params)
    feats = tuple(Feature((c,), r, (r,)) for c, r, _ in params)
    return FieldFn(1, lambda x: u(x[..., 0]), lambda x: du(x[..., 0])[..., None],
                   support_radius=0.5 * (hi - lo), support_center=(0.5 * (hi + lo),),
                   features=feats)


@pytest.fixture
def p2():
    return FracParams(2, 0.5)


ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
