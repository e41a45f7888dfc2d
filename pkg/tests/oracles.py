"""Independent oracles shared by the test modules."""

import numpy as np


def fd_first(chart, points, h=1e-5):
    """Central differences of a chart's value: (..., 2, n)."""
    p = np.asarray(points, dtype=float)
    out = []
    for a in range(2):
        e = np.zeros(2)
        e[a] = h
        out.append((chart(p + e).value - chart(p - e).value) / (2 * h))
    return np.stack(out, axis=-2)


def fd_second(chart, points, h=1e-5):
    """Second partials (xx, xy, yy) from central differences of the analytic first partials."""
    p = np.asarray(points, dtype=float)
    ex, ey = np.array([h, 0.0]), np.array([0.0, h])
    dx = (chart(p + ex).d1 - chart(p - ex).d1) / (2 * h)
    dy = (chart(p + ey).d1 - chart(p - ey).d1) / (2 * h)
    return np.stack([dx[..., 0, :], dx[..., 1, :], dy[..., 1, :]], axis=-2)


def jet_fd_error(chart, points, h1=1e-5, h2=1e-5):
    """Worst relative mismatch between a chart's jet and finite differences."""
    j = chart(points)
    f1 = fd_first(chart, points, h1)
    f2 = fd_second(chart, points, h2)
    s1 = np.linalg.norm(j.d1, axis=(-2, -1))
    s2 = np.maximum(np.linalg.norm(j.d2, axis=(-2, -1)), s1)
    e1 = np.linalg.norm(j.d1 - f1, axis=(-2, -1)) / s1
    e2 = np.linalg.norm(j.d2 - f2, axis=(-2, -1)) / s2
    return float(max(e1.max(), e2.max()))


def annulus_sample(rng, n, r_in, r_out):
    r = np.sqrt(rng.uniform(r_in**2, r_out**2, n))
    t = rng.uniform(0, 2 * np.pi, n)
    return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)

