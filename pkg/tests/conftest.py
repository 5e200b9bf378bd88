import math
import os

import numpy as np
import pytest
from hypothesis import settings

from netqual.gp_baseline import kernel_matrix
from netqual.regressors import Kind

settings.register_profile("default", deadline=None, max_examples=100)
settings.register_profile("ci", deadline=None, max_examples=300)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def brute_knn(points, q, k):
    """Linear scan with the (distance, id) tie rule."""
    points = np.asarray(points, dtype=float)
    dx = points[:, 0] - q[0]
    dy = points[:, 1] - q[1]
    d = np.sqrt(dx * dx + dy * dy)
    order = sorted(range(len(points)), key=lambda i: (d[i], i))[:k]
    return np.array(order), d[order]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def full_sum_predict(X, y, x, kind, c, k):
    """Untruncated kernel regression with the 1/h-scaled kernel, straight from the formula."""
    d = np.sqrt(((X - x) ** 2).sum(1))
    if kind is Kind.FIXED:
        h = c
    else:
        h = c * np.sort(d)[k - 1] ** 2
    w = np.array([math.exp(-0.5 * (di / h) ** 2) / math.sqrt(2 * math.pi) / h for di in d])
    return float((w * y).sum() / w.sum())


def two_point_oracle(X, y, h, xs):
    """Closed-form 2x2 inverse: LML, posterior mean and variance at xs."""
    (a1, b1), (a2, b2) = X
    k12 = h.sigma2 * math.exp(-h.theta1 * (a1 - a2) ** 2 - h.theta2 * (b1 - b2) ** 2)
    a = h.sigma2 + max(h.noise2, 1e-8 * h.sigma2)
    det = a * a - k12 * k12
    inv = [[a / det, -k12 / det], [-k12 / det, a / det]]
    mu = (y[0] + y[1]) / 2
    r = [y[0] - mu, y[1] - mu]
    quad = sum(r[i] * inv[i][j] * r[j] for i in range(2) for j in range(2))
    lml = -0.5 * quad - 0.5 * math.log(det) - math.log(2 * math.pi)
    ks = [h.sigma2 * math.exp(-h.theta1 * (xs[0] - p) ** 2 - h.theta2 * (xs[1] - q) ** 2)
          for p, q in X]
    v = [sum(inv[i][j] * r[j] for j in range(2)) for i in range(2)]
    mean = mu + ks[0] * v[0] + ks[1] * v[1]
    var = h.sigma2 - sum(ks[i] * inv[i][j] * ks[j] for i in range(2) for j in range(2))
    return lml, mean, var


def sample_gp(rng, m, hyper):
    X = rng.uniform(0, 3, size=(m, 2))
    K = kernel_matrix(X, X, hyper) + hyper.noise2 * np.eye(m)
    y = 50 + np.linalg.cholesky(K) @ rng.standard_normal(m)
    return X, y


# acceptance bookkeeping: one summary line per criterion
_ACCEPTANCE = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("acceptance")
    if mark is None or call.when not in ("setup", "call"):
        return
    num, label = mark.args
    if call.excinfo is None:
        if call.when == "call":
            _ACCEPTANCE.setdefault(num, (label, "PASS", ""))
        return
    if call.excinfo.errisinstance(pytest.skip.Exception):
        _ACCEPTANCE[num] = (label, "SKIP", str(call.excinfo.value))
    else:
        _ACCEPTANCE[num] = (label, "FAIL", call.excinfo.exconly().splitlines()[0][:120])


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        label, status, why = _ACCEPTANCE[num]
        line = f"criterion {num}: {status}  {label}"
        terminalreporter.write_line(line + (f"  ({why})" if why else ""))
