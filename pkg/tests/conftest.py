from importlib import resources

import numpy as np
import pytest

from cdprune import condition_kernel, cosine_kernel, minmax_normalize, relevance

SQRT_HALF = 2 ** -0.5
THREE_TOKENS = np.array([[1.0, 0.0], [0.0, 1.0], [SQRT_HALF, SQRT_HALF]])


def fixture_path(name):
    return str(resources.files("cdprune") / "fixtures" / name)


def random_instance(rng, n, d, conditional, mode="dense"):
    """Random Gaussian embeddings; conditional kernels use a random query."""
    E = rng.standard_normal((n, d))
    K = cosine_kernel(E, mode=mode)
    if conditional:
        r = minmax_normalize(relevance(E, rng.standard_normal(d)))
        K = condition_kernel(K, r)
    return E, K


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = []


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None or call.when != "call":
        return
    _ACCEPTANCE.append((marker.args[0], marker.args[1], item.name, call.excinfo is None))


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(id, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    criteria = {}
    for cid, title, name, ok in _ACCEPTANCE:
        entry = criteria.setdefault(cid, [title, []])
        if not ok:
            entry[1].append(name)
    terminalreporter.section("acceptance criteria")
    for cid in sorted(criteria, key=lambda c: int(c[1:])):
        title, failed = criteria[cid]
        line = f"{cid:<4} {'FAIL' if failed else 'PASS'}  {title}"
        if failed:
            line += f"  (failed: {', '.join(failed)})"
        terminalreporter.write_line(line)
