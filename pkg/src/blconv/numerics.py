"""Dense linear-algebra and random-number kernels.

* :func:`lu_solve_det` -- Gaussian elimination with partial pivoting,
  returning the solution and the (sign-corrected) determinant.
* :func:`eigenvalues` / :func:`spectral_radius` -- all eigenvalues of a real
  nonsymmetric matrix via diagonal balancing, Householder reduction to upper
  Hessenberg form and the Francis implicit double-shift QR iteration.
* :class:`RandomStream` -- a seeded PCG64 stream.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NumericalFailure, SingularMatrixError, UsageError

SINGULAR_PIVOT_RTOL = 1e-12
QR_ITERATIONS_PER_EIGENVALUE = 30


def _as_square(A) -> np.ndarray:
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise UsageError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise UsageError("matrix has non-finite entries")
    return A


def lu_factor(A) -> tuple[np.ndarray, np.ndarray, int]:
    """In-place style LU with partial pivoting on a copy of ``A``.

    Returns ``(LU, perm, sign)`` where ``LU`` packs the unit-lower ``L``
    below the diagonal and ``U`` on and above it, ``perm[i]`` is the original
    row now at position ``i``, and ``sign`` is the permutation parity.
    Raises :class:`SingularMatrixError` when a pivot is smaller than
    ``1e-12 * ||A||_inf``.
    """
    LU = _as_square(A)
    n = LU.shape[0]
    norm = float(np.abs(LU).sum(axis=1).max()) if n else 0.0
    tol = SINGULAR_PIVOT_RTOL * norm
    perm = np.arange(n)
    sign = 1
    for k in range(n):
        p = k + int(np.argmax(np.abs(LU[k:, k])))
        if abs(LU[p, k]) <= tol or LU[p, k] == 0.0:
            raise SingularMatrixError(f"matrix is singular to working precision (pivot {k})")
        if p != k:
            LU[[k, p]] = LU[[p, k]]
            perm[[k, p]] = perm[[p, k]]
            sign = -sign
        LU[k + 1 :, k] /= LU[k, k]
        LU[k + 1 :, k + 1 :] -= np.outer(LU[k + 1 :, k], LU[k, k + 1 :])
    return LU, perm, sign


def lu_solve(LU: np.ndarray, perm: np.ndarray, b) -> np.ndarray:
    n = LU.shape[0]
    x = np.array(b, dtype=float)[perm]
    for i in range(1, n):
        x[i] -= LU[i, :i] @ x[:i]
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - LU[i, i + 1 :] @ x[i + 1 :]) / LU[i, i]
    return x


def lu_solve_det(A, b) -> tuple[np.ndarray, float]:
    """Solve ``A x = b`` and return ``(x, det(A))``."""
    LU, perm, sign = lu_factor(A)
    b = np.asarray(b, dtype=float)
    if b.shape != (LU.shape[0],):
        raise UsageError(f"right-hand side has shape {b.shape}, expected ({LU.shape[0]},)")
    return lu_solve(LU, perm, b), _det_from_lu(LU, sign)


def _det_from_lu(LU: np.ndarray, sign: int) -> float:
    # may legitimately overflow to +-inf for large well-conditioned matrices
    with np.errstate(over="ignore", under="ignore"):
        return sign * float(np.prod(np.diag(LU)))


def det(A) -> float:
    """Determinant via the pivoted factorization; 0.0 when a pivot vanishes."""
    try:
        LU, _, sign = lu_factor(A)
    except SingularMatrixError:
        return 0.0
    return _det_from_lu(LU, sign)


# eigenvalues --------------------------------------------------------------


def balance(A: np.ndarray) -> np.ndarray:
    """Diagonal similarity scaling (powers of 2) equalizing row and column norms."""
    a = A.copy()
    n = a.shape[0]
    radix, sqrdx = 2.0, 4.0
    done = False
    while not done:
        done = True
        for i in range(n):
            c = np.abs(a[:, i]).sum() - abs(a[i, i])
            r = np.abs(a[i, :]).sum() - abs(a[i, i])
            if c == 0.0 or r == 0.0:
                continue
            g = r / radix
            f = 1.0
            s = c + r
            while c < g:
                f *= radix
                c *= sqrdx
            g = r * radix
            while c > g:
                f /= radix
                c /= sqrdx
            if (c + r) / f < 0.95 * s:
                done = False
                a[i, :] /= f
                a[:, i] *= f
    return a


def hessenberg(A: np.ndarray) -> np.ndarray:
    """Upper Hessenberg matrix similar to ``A`` (Householder reflections)."""
    H = A.copy()
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1 :, k]
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        v = x.copy()
        v[0] += math.copysign(alpha, x[0])
        v /= np.linalg.norm(v)
        H[k + 1 :, k:] -= 2.0 * np.outer(v, v @ H[k + 1 :, k:])
        H[:, k + 1 :] -= 2.0 * np.outer(H[:, k + 1 :] @ v, v)
        H[k + 2 :, k] = 0.0
    return H


def _hqr(a: np.ndarray) -> np.ndarray:
    """Eigenvalues of an upper Hessenberg matrix (Francis double-shift QR).

    Works on the active window only, so ``a`` is destroyed and no Schur
    vectors are formed.  Exceptional shifts are taken after 10 and 20
    iterations on the same eigenvalue; the whole run is capped at
    ``30 * n`` iterations.
    """
    n = a.shape[0]
    wr = np.zeros(n)
    wi = np.zeros(n)
    anorm = float(np.abs(np.triu(a, -1)).sum())
    nn = n - 1
    t = 0.0
    total_its = 0
    max_total = QR_ITERATIONS_PER_EIGENVALUE * max(n, 1)
    its = 0
    while nn >= 0:
        # look for a single small subdiagonal element
        l = nn
        while l >= 1:
            s = abs(a[l - 1, l - 1]) + abs(a[l, l])
            if s == 0.0:
                s = anorm
            if abs(a[l, l - 1]) + s == s:
                a[l, l - 1] = 0.0
                break
            l -= 1
        x = a[nn, nn]
        if l == nn:  # one root found
            wr[nn] = x + t
            wi[nn] = 0.0
            nn -= 1
            its = 0
            continue
        y = a[nn - 1, nn - 1]
        w = a[nn, nn - 1] * a[nn - 1, nn]
        if l == nn - 1:  # two roots found
            p = 0.5 * (y - x)
            q = p * p + w
            z = math.sqrt(abs(q))
            x += t
            if q >= 0.0:
                z = p + math.copysign(z, p)
                wr[nn - 1] = wr[nn] = x + z
                if z != 0.0:
                    wr[nn] = x - w / z
                wi[nn - 1] = wi[nn] = 0.0
            else:
                wr[nn - 1] = wr[nn] = x + p
                wi[nn - 1] = -z
                wi[nn] = z
            nn -= 2
            its = 0
            continue

        if total_its >= max_total:
            raise NumericalFailure(f"QR iteration did not converge after {total_its} iterations")
        if its in (10, 20):  # exceptional shift
            t += x
            idx = np.arange(nn + 1)
            a[idx, idx] -= x
            s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
            x = y = 0.75 * s
            w = -0.4375 * s * s
        its += 1
        total_its += 1

        # form shift and look for two consecutive small subdiagonal elements
        m = nn - 2
        while m >= l:
            z = a[m, m]
            r = x - z
            s = y - z
            p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
            q = a[m + 1, m + 1] - z - r - s
            r = a[m + 2, m + 1]
            s = abs(p) + abs(q) + abs(r)
            p /= s
            q /= s
            r /= s
            if m == l:
                break
            u = abs(a[m, m - 1]) * (abs(q) + abs(r))
            v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
            if u + v == v:
                break
            m -= 1
        for i in range(m + 2, nn + 1):
            a[i, i - 2] = 0.0
            if i != m + 2:
                a[i, i - 3] = 0.0

        # double QR step on rows l..nn and columns m..nn
        for k in range(m, nn):
            if k != m:
                p = a[k, k - 1]
                q = a[k + 1, k - 1]
                r = a[k + 2, k - 1] if k != nn - 1 else 0.0
                x = abs(p) + abs(q) + abs(r)
                if x != 0.0:
                    p /= x
                    q /= x
                    r /= x
            s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
            if s == 0.0:
                continue
            if k == m:
                if l != m:
                    a[k, k - 1] = -a[k, k - 1]
            else:
                a[k, k - 1] = -s * x
            p += s
            x = p / s
            y = q / s
            z = r / s
            q /= p
            r /= p
            third = k != nn - 1
            # row modification
            if third:
                pv = a[k, k : nn + 1] + q * a[k + 1, k : nn + 1] + r * a[k + 2, k : nn + 1]
                a[k + 2, k : nn + 1] -= pv * z
            else:
                pv = a[k, k : nn + 1] + q * a[k + 1, k : nn + 1]
            a[k + 1, k : nn + 1] -= pv * y
            a[k, k : nn + 1] -= pv * x
            # column modification
            mmin = min(nn, k + 3)
            if third:
                pc = x * a[l : mmin + 1, k] + y * a[l : mmin + 1, k + 1] + z * a[l : mmin + 1, k + 2]
                a[l : mmin + 1, k + 2] -= pc * r
            else:
                pc = x * a[l : mmin + 1, k] + y * a[l : mmin + 1, k + 1]
            a[l : mmin + 1, k + 1] -= pc * q
            a[l : mmin + 1, k] -= pc
    return wr + 1j * wi


def eigenvalues(A) -> np.ndarray:
    """All eigenvalues of a real square matrix, complex dtype, unsorted."""
    A = _as_square(A)
    if A.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    if not np.any(A):
        return np.zeros(A.shape[0], dtype=complex)
    return _hqr(hessenberg(balance(A)))


def spectral_radius(A) -> tuple[float, np.ndarray]:
    """``(max |lambda|, eigenvalues)``; the radius of an empty matrix is 0."""
    ev = eigenvalues(A)
    return (float(np.abs(ev).max()) if ev.size else 0.0), ev


# randomness ---------------------------------------------------------------


class RandomStream:
    """Seeded uniform stream backed by numpy's PCG64 bit generator.

    PCG64 with a fixed seed produces the same bits on every platform, and
    ``Generator.random`` maps them to doubles deterministically, so draw
    sequences are reproducible across machines.  Independent streams for
    trial ``k`` of a run seeded with ``seed`` use ``seed + k``.
    """

    algorithm = "PCG64"

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform_01(self, size: int | None = None):
        """Draw(s) in [0, 1)."""
        if size is None:
            return float(self._gen.random())
        return self._gen.random(size)

    def uniform(self, lo: float, hi: float, size: int | None = None):
        u = self.uniform_01(size)
        return lo + (hi - lo) * u

    def bernoulli(self, p: float, size: int | None = None):
        """True with probability ``p``, as ``uniform_01() < p``."""
        if not 0.0 <= p <= 1.0:
            raise UsageError(f"bernoulli probability must lie in [0, 1], got {p}")
        u = self.uniform_01(size)
        return u < p


def random_stream(seed: int) -> RandomStream:
    return RandomStream(seed)
