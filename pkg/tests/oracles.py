"""Reference computations kept independent of the package's code paths."""
import itertools
import math

import mpmath
import numpy as np

mpmath.mp.dps = 40

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def brute_force_cases(dplus):
    """Case probabilities by enumerating every sign pattern and multiplying."""
    n = len(dplus)
    probs = [0.0] * (1 << n)
    for signs in itertools.product((0, 1), repeat=n):
        c = sum(bit << v for v, bit in enumerate(signs))
        prod = 1.0
        for v, bit in enumerate(signs):
            prod *= dplus[v] if bit else 1.0 - dplus[v]
        probs[c] = prod
    return probs


def brute_force_entropy(probs):
    return -sum(p * math.log2(p) for p in probs if p > 0)


def binary_entropy_sum(dplus):
    """Entropy of a product of independent Bernoullis = sum of marginal entropies."""
    total = 0.0
    for p in dplus:
        for x in (p, 1.0 - p):
            if x > 0:
                total -= x * math.log2(x)
    return total


def mp_norm_sf(z):
    return float(mpmath.ncdf(-mpmath.mpf(float(z))))


def mp_norm_cdf(z):
    return float(mpmath.ncdf(mpmath.mpf(float(z))))


def piecewise_mass_above(edges, masses, k, n=20001):
    """Pr(X >= k) for a density uniform on each [edges[i], edges[i+1]], by quadrature.

    Zero-width pieces are point masses.
    """
    total = 0.0
    for a, b, m in zip(edges[:-1], edges[1:], masses):
        if b == a:
            total += m if k <= a else 0.0
            continue
        lo = max(a, k)
        if lo >= b:
            continue
        xs = np.linspace(lo, b, n)
        dens = np.full(n, m / (b - a))
        total += _trapezoid(dens, xs)
    return total


def cell_corner_indices_2d(nx, ny):
    """Vertex indices of each cell's corners, x-fastest local order."""
    cells = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            cells.append([j * nx + i, j * nx + i + 1, (j + 1) * nx + i, (j + 1) * nx + i + 1])
    return cells


def cell_corner_indices_3d(nx, ny, nz):
    cells = []
    for k in range(nz - 1):
        for j in range(ny - 1):
            for i in range(nx - 1):
                corners = []
                for dz, dy, dx in itertools.product((0, 1), repeat=3):
                    corners.append(((k + dz) * ny + (j + dy)) * nx + (i + dx))
                cells.append(corners)
    return cells


def brute_force_total_entropy(dplus_flat, nx, ny, nz=1):
    idx = cell_corner_indices_2d(nx, ny) if nz == 1 else cell_corner_indices_3d(nx, ny, nz)
    return [brute_force_entropy(brute_force_cases([dplus_flat[v] for v in c])) for c in idx]


def empirical_above(samples, k):
    return sum(1 for x in samples if x >= k) / len(samples)
