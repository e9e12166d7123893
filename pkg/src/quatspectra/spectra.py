"""Spectral side: embedding, eigenvalues, ESDs, semicircle law, resolvents.

The complex embedding of a self-dual quaternion matrix is a ``2n x 2n``
Hermitian matrix whose eigenvalues come in exact pairs; one eigenvalue per
pair is the spectrum of the quaternion matrix.  The empirical spectral
distribution of properly normalized ensembles approaches the semicircular
law with density ``sqrt(4 sigma^2 - x^2) / (2 pi sigma^2)``, whose Stieltjes
transform ``s(z) = -(z - sqrt(z^2 - 4)) / 2`` (unit sigma) satisfies
``s = -1/(z + s)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .ensemble import SelfDualMatrix
from .structure import BlockMatrix, StructureReport, classify

__all__ = [
    "DomainError",
    "NotHermitianError",
    "PairingError",
    "EigenConvergenceError",
    "DEFAULT_EIGEN_BACKEND",
    "embed",
    "hermitian_eigenvalues",
    "dedup_pairs",
    "SpectralSample",
    "ESD",
    "StieltjesPoint",
    "semicircle_pdf",
    "semicircle_cdf",
    "semicircle_stieltjes",
    "empirical_stieltjes",
    "kolmogorov_distance",
    "levy_distance",
    "resolvent",
    "resolvent_structure_check",
    "trace_minor_check",
    "ResolventStructureReport",
    "TraceMinorReport",
    "esd_to_csv",
    "histogram_csv",
]


class DomainError(ValueError):
    """Spectral parameter outside the open upper half plane."""


class NotHermitianError(ValueError):
    """Matrix fails the Hermitian residual precondition."""


class PairingError(ValueError):
    """Sorted eigenvalues do not split into near-degenerate pairs."""


class EigenConvergenceError(RuntimeError):
    """The shifted QL iteration failed to converge."""


#: Default eigensolver backend.  "lapack" delegates to the platform provider
#: (numpy.linalg.eigvalsh); "householder_ql" is the self-contained reduction
#: to real symmetric tridiagonal form plus implicit Wilkinson-shift QL.
#: Both satisfy the same contract and are tested against the same oracles;
#: lapack is the default because it is much faster at sweep sizes.
DEFAULT_EIGEN_BACKEND = "lapack"


def _as_values(m) -> np.ndarray:
    if isinstance(m, BlockMatrix):
        return m.values
    if isinstance(m, SelfDualMatrix):
        return embed(m).values
    return np.asarray(m, dtype=complex)


def embed(w: SelfDualMatrix) -> BlockMatrix:
    """Represent a self-dual quaternion matrix as a 2n x 2n complex matrix.

    Block ``(j, k)`` is the 2x2 image of quaternion entry ``(j, k)``; the
    result is Hermitian by construction (exactly, not up to rounding).
    """
    co = w.coeffs
    n = w.n
    lam = co[..., 0] + 1j * co[..., 1]
    om = co[..., 2] + 1j * co[..., 3]
    out = np.empty((2 * n, 2 * n), dtype=complex)
    out[0::2, 0::2] = lam
    out[0::2, 1::2] = om
    out[1::2, 0::2] = -om.conj()
    out[1::2, 1::2] = lam.conj()
    return BlockMatrix(out)


# ---------------------------------------------------------------------------
# eigensolvers
# ---------------------------------------------------------------------------

def _tridiagonalize(a: np.ndarray):
    """Householder reduction of a Hermitian matrix to real tridiagonal form.

    Complex reflectors zero each column below the first subdiagonal; the
    remaining complex subdiagonal is made real nonnegative by a diagonal
    phase similarity (taking absolute values).  Returns ``(d, e)``.
    """
    A = np.array(a, dtype=complex)
    N = A.shape[0]
    if N == 0:
        return np.empty(0), np.empty(0)
    e = np.zeros(max(N - 1, 0), dtype=complex)
    for k in range(N - 2):
        x = A[k + 1:, k].copy()
        xnorm = np.linalg.norm(x)
        if xnorm == 0.0:
            e[k] = 0.0
            continue
        x0 = x[0]
        phase = x0 / abs(x0) if x0 != 0 else 1.0
        alpha = -phase * xnorm
        v = x
        v[0] -= alpha
        v /= np.linalg.norm(v)
        B = A[k + 1:, k + 1:]
        q = B @ v
        s = np.real(np.vdot(v, q))
        wv = 2.0 * (q - s * v)
        B -= np.outer(v, wv.conj()) + np.outer(wv, v.conj())
        e[k] = alpha
    if N >= 2:
        e[N - 2] = A[N - 1, N - 2]
    return A.diagonal().real.copy(), np.abs(e)


def _ql_implicit(d: np.ndarray, e: np.ndarray, max_iter: int = 50) -> np.ndarray:
    """Eigenvalues of a real symmetric tridiagonal matrix by implicit-shift QL."""
    n = d.size
    d = d.astype(float).copy()
    e = np.append(e.astype(float), 0.0)
    eps = np.finfo(float).eps
    for l in range(n):
        iterations = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            iterations += 1
            if iterations > max_iter:
                raise EigenConvergenceError(
                    f"QL iteration did not converge at index {l}")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = 1.0
            c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
            if not underflow:
                d[l] -= p
                e[l] = g
                e[m] = 0.0
    return np.sort(d)


def hermitian_eigenvalues(m, backend: Optional[str] = None) -> np.ndarray:
    """All eigenvalues of a Hermitian matrix, ascending.

    The input must be Hermitian within ``1e-10 * max|entry|``; both backends
    reduce to a real symmetric tridiagonal problem and apply an implicitly
    shifted iteration (the platform provider via LAPACK, or the
    self-contained Householder + QL path).

    Raises
    ------
    NotHermitianError
        If the Hermitian residual precondition fails.
    """
    A = _as_values(m)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    scale = float(np.max(np.abs(A))) if A.size else 0.0
    residual = float(np.max(np.abs(A - A.conj().T))) if A.size else 0.0
    if residual > 1e-10 * max(scale, 1e-300):
        raise NotHermitianError(
            f"Hermitian residual {residual:.3e} exceeds 1e-10 * {scale:.3e}")
    backend = backend or DEFAULT_EIGEN_BACKEND
    if backend == "lapack":
        return np.linalg.eigvalsh(A)
    if backend == "householder_ql":
        H = 0.5 * (A + A.conj().T)
        d, e = _tridiagonalize(H)
        return _ql_implicit(d, e)
    raise ValueError(f"unknown eigensolver backend {backend!r}")


def dedup_pairs(eigs: np.ndarray, tol: float):
    """Collapse a doubly degenerate sorted spectrum to one value per pair.

    Consecutive sorted values are paired greedily; the first of each pair is
    kept.  The pairing residual is the largest intra-pair gap relative to
    ``max(1, spectral radius)``.

    Raises
    ------
    PairingError
        If the list has odd length or the residual exceeds ``tol`` (a
        non-quaternionic input or an eigensolver failure).
    """
    eigs = np.asarray(eigs, dtype=float)
    if eigs.size % 2:
        raise PairingError(f"expected an even number of eigenvalues, got {eigs.size}")
    if eigs.size == 0:
        return np.empty(0), 0.0
    gaps = eigs[1::2] - eigs[0::2]
    residual = float(np.max(np.abs(gaps))) / max(1.0, float(np.max(np.abs(eigs))))
    if residual > tol:
        raise PairingError(
            f"pairing residual {residual:.3e} exceeds tolerance {tol:.3e}")
    return eigs[0::2].copy(), residual


@dataclass
class SpectralSample:
    """Spectrum of one draw: full doubled eigenvalues plus the deduped half."""

    n: int
    eigenvalues_full: np.ndarray
    eigenvalues_dedup: np.ndarray
    pairing_residual: float

    @classmethod
    def from_matrix(cls, w: SelfDualMatrix, tol: float = 1e-8,
                    backend: Optional[str] = None) -> "SpectralSample":
        full = hermitian_eigenvalues(embed(w), backend=backend)
        dedup, residual = dedup_pairs(full, tol)
        return cls(n=w.n, eigenvalues_full=full, eigenvalues_dedup=dedup,
                   pairing_residual=residual)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "eigenvalues_full": self.eigenvalues_full.tolist(),
            "eigenvalues_dedup": self.eigenvalues_dedup.tolist(),
            "pairing_residual": self.pairing_residual,
        }


# ---------------------------------------------------------------------------
# distribution functions
# ---------------------------------------------------------------------------

class ESD:
    """Empirical spectral distribution: right-continuous step CDF."""

    def __init__(self, values):
        self.points = np.sort(np.asarray(values, dtype=float))
        if self.points.size == 0:
            raise ValueError("ESD needs at least one support point")

    def cdf(self, x):
        """F(x) = fraction of points <= x (right-continuous)."""
        return np.searchsorted(self.points, x, side="right") / self.points.size

    def cdf_left(self, x):
        """Left limit F(x-)."""
        return np.searchsorted(self.points, x, side="left") / self.points.size

    def __call__(self, x):
        return self.cdf(x)

    def __len__(self):
        return self.points.size


@dataclass
class StieltjesPoint:
    """Value of a Stieltjes transform at a point of the upper half plane."""

    z: complex
    value: complex


def semicircle_pdf(x, sigma: float = 1.0):
    """Semicircle density ``sqrt(4 sigma^2 - x^2) / (2 pi sigma^2)`` on [-2 sigma, 2 sigma]."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 2.0 * sigma
    out[inside] = np.sqrt(4.0 * sigma**2 - x[inside] ** 2) / (2.0 * math.pi * sigma**2)
    return out if out.ndim else float(out)


def semicircle_cdf(x, sigma: float = 1.0):
    """Closed-form semicircle CDF, clamped to {0, 1} outside the support."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x = np.asarray(x, dtype=float)
    xc = np.clip(x, -2.0 * sigma, 2.0 * sigma)
    out = (0.5
           + xc * np.sqrt(np.maximum(4.0 * sigma**2 - xc**2, 0.0)) / (4.0 * math.pi * sigma**2)
           + np.arcsin(xc / (2.0 * sigma)) / math.pi)
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


def semicircle_stieltjes(z: complex) -> complex:
    """Stieltjes transform ``-(z - sqrt(z^2 - 4)) / 2`` of the unit semicircle.

    The square root branch is chosen so the image lies in the upper half
    plane; the closed form satisfies ``s(z) = -1 / (z + s(z))``.

    Raises
    ------
    DomainError
        If ``Im z <= 0``.
    """
    z = complex(z)
    if z.imag <= 0:
        raise DomainError(f"Im z must be positive, got {z}")
    root = np.sqrt(complex(z * z - 4.0))
    for w in (root, -root):
        s = (-z + w) / 2.0
        if s.imag > 0:
            return complex(s)
    raise ArithmeticError(f"no upper-half-plane branch at z={z}")  # unreachable


def empirical_stieltjes(sample, z: complex) -> StieltjesPoint:
    """Empirical Stieltjes transform ``(1/(2n)) sum 1/(lambda_i - z)``.

    ``sample`` may be a :class:`SpectralSample` (its full doubled spectrum is
    used) or a plain array of eigenvalues.  Equals the normalized trace of
    the resolvent of the embedded matrix.
    """
    z = complex(z)
    if z.imag <= 0:
        raise DomainError(f"Im z must be positive, got {z}")
    eigs = sample.eigenvalues_full if isinstance(sample, SpectralSample) \
        else np.asarray(sample, dtype=float)
    value = complex(np.mean(1.0 / (eigs - z)))
    return StieltjesPoint(z=z, value=value)


def kolmogorov_distance(e: ESD, sigma: float = 1.0) -> float:
    """Sup distance between an ESD and the semicircle CDF (both one-sided limits)."""
    s = e.points
    n = s.size
    ref = semicircle_cdf(s, sigma)
    upper = np.arange(1, n + 1) / n - ref
    lower = ref - np.arange(0, n) / n
    return float(max(upper.max(), lower.max(), 0.0))


def _ks_two_esds(f: ESD, g: ESD) -> float:
    grid = np.concatenate([f.points, g.points])
    return float(np.max(np.abs(f.cdf(grid) - g.cdf(grid))))


def _levy_feasible(f: ESD, g, eps: float, g_points: Optional[np.ndarray]) -> bool:
    slack = 1e-12
    if g_points is None:
        up = f.cdf(f.points) - np.asarray(g(f.points + eps), dtype=float)
        down = np.asarray(g(f.points - eps), dtype=float) - f.cdf_left(f.points)
        return bool(up.max() <= eps + slack and down.max() <= eps + slack)
    ev1 = np.concatenate([f.points, g_points - eps])
    sup1 = np.max(f.cdf(ev1) - g.cdf(ev1 + eps))
    ev2 = np.concatenate([f.points, g_points + eps])
    sup2 = np.max(g.cdf(ev2 - eps) - f.cdf(ev2))
    return bool(sup1 <= eps + slack and sup2 <= eps + slack)


def levy_distance(f: ESD, g, tol: float = 1e-6) -> float:
    """Levy distance between an ESD and an ESD or continuous reference CDF.

    Computes ``inf { eps : g(x-eps) - eps <= f(x) <= g(x+eps) + eps }`` by
    bisection over the merged jump grid, to absolute accuracy ``tol`` (the
    returned value is the feasible upper end of the bracket, so recorded
    inequalities remain valid).  Always at most the sup distance.
    """
    if isinstance(g, ESD):
        g_points = g.points
        hi = _ks_two_esds(f, g)
    else:
        g_points = None
        ref = np.asarray(g(f.points), dtype=float)
        n = f.points.size
        hi = float(max((np.arange(1, n + 1) / n - ref).max(),
                       (ref - np.arange(0, n) / n).max(), 0.0))
    lo = 0.0
    if hi <= tol:
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _levy_feasible(f, g, mid, g_points):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# resolvent diagnostics
# ---------------------------------------------------------------------------

def resolvent(m, z: complex) -> BlockMatrix:
    """Dense resolvent ``(m - z I)^{-1}`` for ``Im z != 0``."""
    z = complex(z)
    if z.imag == 0:
        raise DomainError(f"z must lie off the real axis, got {z}")
    A = _as_values(m)
    shifted = A - z * np.eye(A.shape[0], dtype=complex)
    return BlockMatrix(np.linalg.solve(shifted, np.eye(A.shape[0], dtype=complex)))


@dataclass
class ResolventStructureReport:
    """Structural classification of a resolvent: Type-I with Type-T diagonal."""

    z: complex
    passed: bool
    classification: str
    passing: tuple
    max_residual: float
    witness: Optional[tuple]

    def to_json(self) -> dict:
        return {
            "z": [self.z.real, self.z.imag],
            "passed": self.passed,
            "classification": self.classification,
            "passing": list(self.passing),
            "max_residual": self.max_residual,
            "witness": list(self.witness) if self.witness else None,
        }


def resolvent_structure_check(w: SelfDualMatrix, z: complex,
                              tol: float = 1e-8) -> ResolventStructureReport:
    """Check that the resolvent of the embedding carries the Type-I structure.

    In particular every diagonal 2x2 block must be a scalar multiple of the
    identity (the two resolvent diagonal entries of each pair coincide).
    Failures are reported, not raised.
    """
    z = complex(z)
    if z.imag <= 0:
        raise DomainError(f"Im z must be positive, got {z}")
    report: StructureReport = classify(resolvent(embed(w), z), tol)
    passed = report.passes("TypeI")
    return ResolventStructureReport(
        z=z,
        passed=passed,
        classification=report.classification,
        passing=report.passing,
        max_residual=report.residuals["TypeI"],
        witness=report.witness,
    )


@dataclass
class TraceMinorReport:
    """Resolvent trace versus all quaternion-principal minors."""

    z: complex
    bound: float
    max_difference: float
    differences: np.ndarray
    passed: bool

    def to_json(self) -> dict:
        return {
            "z": [self.z.real, self.z.imag],
            "bound": self.bound,
            "max_difference": self.max_difference,
            "passed": self.passed,
        }


def trace_minor_check(w: SelfDualMatrix, z: complex) -> TraceMinorReport:
    """Check ``|tr R - tr R_k| <= 2 / Im(z)`` for every quaternion minor.

    ``R_k`` is the resolvent of the embedding with quaternion row and column
    ``k`` removed (two complex rows and columns).
    """
    z = complex(z)
    upsilon = z.imag
    if upsilon <= 0:
        raise DomainError(f"Im z must be positive, got {z}")
    A = embed(w).values
    n = w.n
    tr_full = np.trace(resolvent(A, z).values)
    diffs = np.empty(n)
    for k in range(n):
        keep = np.ones(2 * n, dtype=bool)
        keep[2 * k:2 * k + 2] = False
        minor = A[np.ix_(keep, keep)]
        tr_minor = np.trace(resolvent(minor, z).values)
        diffs[k] = abs(tr_full - tr_minor)
    bound = 2.0 / upsilon
    max_diff = float(diffs.max()) if n else 0.0
    return TraceMinorReport(
        z=z,
        bound=bound,
        max_difference=max_diff,
        differences=diffs,
        passed=bool(max_diff <= bound * (1.0 + 1e-12)),
    )


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------

def esd_to_csv(e: ESD, path) -> None:
    """Write the jump points of an ESD as two columns ``x, F(x)``."""
    n = e.points.size
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "F"])
        for i, x in enumerate(e.points):
            writer.writerow([repr(float(x)), repr((i + 1) / n)])


def histogram_csv(values, path, bins: int = 40, sigma: float = 1.0,
                  support: float = 2.5) -> None:
    """Histogram of eigenvalues with the semicircle overlay, as CSV."""
    values = np.asarray(values, dtype=float)
    lo = min(-support * sigma, float(values.min()))
    hi = max(support * sigma, float(values.max()))
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    mids = 0.5 * (edges[:-1] + edges[1:])
    overlay = semicircle_pdf(mids, sigma)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_left", "bin_right", "count", "semicircle_pdf"])
        for left, right, cnt, ref in zip(edges[:-1], edges[1:], counts, overlay):
            writer.writerow([repr(float(left)), repr(float(right)),
                             int(cnt), repr(float(ref))])
