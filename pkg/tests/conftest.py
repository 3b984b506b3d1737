import itertools

import numpy as np
import pytest

from outcome_unitary.mechanism import MeasurementScenario

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def brute_partial_trace(rho, dims, keep):
    """Reduced operator by explicit index loops."""
    keep = sorted(keep)
    traced = [ax for ax in range(len(dims)) if ax not in keep]
    kept_dims = [dims[ax] for ax in keep]
    n = int(np.prod(kept_dims))
    out = np.zeros((n, n), dtype=complex)
    strides = [int(np.prod(dims[ax + 1 :])) for ax in range(len(dims))]

    def flat(idx):
        return sum(i * s for i, s in zip(idx, strides))

    for row in itertools.product(*[range(d) for d in kept_dims]):
        for col in itertools.product(*[range(d) for d in kept_dims]):
            r = np.ravel_multi_index(row, kept_dims)
            c = np.ravel_multi_index(col, kept_dims)
            total = 0j
            for t in itertools.product(*[range(dims[ax]) for ax in traced]):
                ri, ci = [0] * len(dims), [0] * len(dims)
                for ax, v in zip(keep, row):
                    ri[ax] = v
                for ax, v in zip(keep, col):
                    ci[ax] = v
                for ax, v in zip(traced, t):
                    ri[ax] = v
                    ci[ax] = v
                total += rho[flat(ri), flat(ci)]
            out[r, c] = total
    return out


def segment_distance(p, q):
    """Distance from the origin to the segment [p, q] in the complex plane."""
    d = q - p
    if abs(d) < 1e-15:
        return abs(p)
    t = np.clip(-(p.conjugate() * d).real / abs(d) ** 2, 0.0, 1.0)
    return abs(p + t * d)


def _cross(a, b):
    return a.real * b.imag - a.imag * b.real


def hull_distance_brute(points):
    """Planar-geometry oracle: 0 if some triangle (or segment) of the points
    contains the origin, else the smallest origin-to-segment distance."""
    pts = list(np.asarray(points).ravel())
    for a, b in itertools.combinations(pts, 2):
        if segment_distance(a, b) < 1e-12:
            return 0.0
    for a, b, c in itertools.combinations(pts, 3):
        s1, s2, s3 = _cross(b - a, -a), _cross(c - b, -b), _cross(a - c, -c)
        if (s1 > 0 and s2 > 0 and s3 > 0) or (s1 < 0 and s2 < 0 and s3 < 0):
            return 0.0
    if len(pts) == 1:
        return abs(pts[0])
    return min(segment_distance(a, b) for a, b in itertools.combinations(pts, 2))


def embed_dominant(sc, small):
    b = sc.dominant_env_basis
    return b @ small @ b.conj().T


@pytest.fixture
def scenario():
    return MeasurementScenario.standard(2, 3, 8, 4, theta=1, seed=5, random_bases=True)


@pytest.fixture
def qutrit_scenario():
    return MeasurementScenario.standard(3, 4, 8, 2, theta=2, seed=9, random_bases=True)
