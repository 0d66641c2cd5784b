"""Independent numerical oracles for the test suite.

Nothing here calls into the package's likelihood or detector code.
"""
from itertools import combinations

import numpy as np

GOLD = (np.sqrt(5.0) - 1.0) / 2.0


def golden_max(f, lo, hi, iters=60):
    """Vectorized golden-section maximization of concave ``f`` on ``[lo, hi]`` (arrays)."""
    a, b = np.array(lo, dtype=float), np.array(hi, dtype=float)
    c = b - GOLD * (b - a)
    d = a + GOLD * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        left = fc > fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = b - GOLD * (b - a)
        d_new = a + GOLD * (b - a)
        c, d = c_new, d_new
        fc, fd = f(c), f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _segment_profile(gamma, n, modeled, log_s2):
    """Best per-segment log-likelihood (without -n N log pi) at each noise level ``exp(log_s2)``.

    Modeled directions get their own eigenvalue ``lambda >= sigma^2`` found
    numerically; the rest are pinned at ``sigma^2``.
    """
    s2 = np.exp(log_s2)
    total = np.zeros_like(log_s2)
    for i, g in enumerate(gamma):
        if i in modeled:
            def f(u, g=g):
                return -n * u - g * np.exp(-u)
            _, best = golden_max(f, log_s2, log_s2 + 60.0)
            total = total + best
        else:
            total = total - n * log_s2 - g / s2
    return total


def _maximize_log_sigma(profile, lo, hi, rounds=8, points=41):
    for _ in range(rounds):
        grid = np.linspace(lo, hi, points)
        vals = profile(grid)
        k = int(np.argmax(vals))
        step = grid[1] - grid[0]
        lo, hi = grid[max(k - 2, 0)], grid[min(k + 2, points - 1)]
        if k in (0, points - 1):
            lo, hi = lo - 10 * step, hi + 10 * step
    u = 0.5 * (lo + hi)
    return u, float(profile(np.array([u]))[0])


def brute_h0(gamma, r0, L):
    """Brute-force maximum of the H0 log-likelihood over sigma^2 and a rank-r0 clutter
    component aligned with any r0 of the scatter eigen-directions."""
    gamma = np.asarray(gamma, dtype=float)
    N = gamma.size
    C = -L * N * np.log(np.pi)
    pos = gamma[gamma > 0]
    lo, hi = np.log(pos.min() / L) - 5, np.log(pos.max() / L) + 5
    best = -np.inf
    for subset in combinations(range(N), r0):
        prof = lambda u, s=set(subset): _segment_profile(gamma, L, s, u)
        _, v = _maximize_log_sigma(prof, lo, hi)
        best = max(best, v)
    return C + best


def brute_h1(gamma1, gamma2, r1, r2, L1, L2):
    """Brute-force maximum of the two-segment log-likelihood with a shared noise power."""
    gamma1 = np.asarray(gamma1, dtype=float)
    gamma2 = np.asarray(gamma2, dtype=float)
    N = gamma1.size
    C = -(L1 + L2) * N * np.log(np.pi)
    pos = np.concatenate([gamma1[gamma1 > 0] / L1, gamma2[gamma2 > 0] / L2])
    lo, hi = np.log(pos.min()) - 5, np.log(pos.max()) + 5
    best = -np.inf
    for s1 in combinations(range(N), r1):
        for s2 in combinations(range(N), r2):
            prof = lambda u, a=set(s1), b=set(s2): (_segment_profile(gamma1, L1, a, u)
                                                     + _segment_profile(gamma2, L2, b, u))
            _, v = _maximize_log_sigma(prof, lo, hi)
            best = max(best, v)
    return C + best


def gaussian_loglik(S, R, n):
    """log f for n zero-mean circular complex Gaussian snapshots with scatter S, covariance R."""
    N = R.shape[0]
    _, logdet = np.linalg.slogdet(R)
    tr = np.trace(np.linalg.solve(R, S)).real
    return -n * N * np.log(np.pi) - n * logdet - tr


def charpoly(A):
    """Characteristic polynomial coefficients via Faddeev-LeVerrier (highest degree first)."""
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    coeffs = [1.0 + 0j]
    M = np.zeros_like(A)
    I = np.eye(n)
    for k in range(1, n + 1):
        M = A @ M + coeffs[-1] * I
        coeffs.append(-np.trace(A @ M) / k)
    return np.real(np.array(coeffs))


def real_roots_bisection(coeffs, lo, hi, samples=20001, tol=1e-14):
    """All sign-change roots of a real polynomial on [lo, hi] by bisection."""
    xs = np.linspace(lo, hi, samples)
    ys = np.polyval(coeffs, xs)
    roots = []
    for i in range(samples - 1):
        if ys[i] == 0:
            roots.append(xs[i])
        elif ys[i] * ys[i + 1] < 0:
            a, b = xs[i], xs[i + 1]
            fa = ys[i]
            while b - a > tol * max(1.0, abs(a)):
                m = 0.5 * (a + b)
                fm = np.polyval(coeffs, m)
                if fa * fm <= 0:
                    b = m
                else:
                    a, fa = m, fm
            roots.append(0.5 * (a + b))
    return np.sort(np.array(roots))[::-1]


def spiked_scatter(rng, N, n, rank, spike_db=15.0):
    """Scatter of n snapshots from sigma^2 I + (random rank-`rank` clutter)."""
    A = rng.standard_normal((N, rank)) + 1j * rng.standard_normal((N, rank))
    R = np.eye(N) + db(spike_db) * (A @ A.conj().T) / max(rank, 1)
    w, U = np.linalg.eigh(R)
    root = (U * np.sqrt(w)) @ U.conj().T
    X = (rng.standard_normal((N, n)) + 1j * rng.standard_normal((N, n))) / np.sqrt(2)
    Z = root @ X
    return Z @ Z.conj().T


def db(x):
    return 10.0 ** (x / 10.0)
