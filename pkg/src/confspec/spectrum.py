"""
Spectrum of the conformal Laplacian of ``g~ = mu^{4/(n-2)} g`` on S^n.

With ``v = mu f`` the eigenproblem for ``g~`` becomes the round-metric pencil

    (-Delta_g + c_n R_g) v = lambda mu^{4/(n-2)} v.

For zonal ``mu`` it splits over the degree ``j`` of spherical harmonics on the
equatorial S^{n-1}. Block ``j`` is a Sturm-Liouville pencil in ``u = cos phi``
discretised with the basis ``(1-u^2)^{j/2} P_a(u)``, ``a = 0..L-j``, where
``P_a`` are orthonormal Gegenbauer polynomials for the weight
``(1-u^2)^{j+(n-2)/2}``. For ``mu = 1`` both matrices are diagonal.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cholesky, eigh, solve_triangular
from scipy.special import comb, gammaln

from .conformal import ConformalFactor
from .sphere import build_quadrature

__all__ = [
    "NotPositiveDefiniteError",
    "SpectralProblem",
    "SpectrumResult",
    "TruncationError",
    "assemble_block",
    "compute_spectrum",
    "harmonic_dimension",
    "lambda_k",
    "merge_spectrum",
    "round_box_eigenvalues",
    "solve_block",
]

TRUST_TOL = 1e-7
TRUST_EXTRA = 8
TIE_TOL = 1e-10


class NotPositiveDefiniteError(LinAlgError):
    pass


class TruncationError(IndexError):
    """Requested eigenvalue index lies outside the converged range."""


def harmonic_dimension(d: int, l: int) -> int:
    """Dimension of degree-``l`` spherical harmonics on S^d."""
    if l < 0:
        return 0
    return int(comb(l + d, d, exact=True) - (comb(l + d - 2, d, exact=True) if l >= 2 else 0))


def round_box_eigenvalues(n: int, L: int) -> list[tuple[float, int]]:
    """Closed-form spectrum on the round S^n: ``l(l+n-1) + n(n-2)/4`` for ``l <= L``."""
    if n < 3:
        raise ValueError("n must be at least 3")
    return [(l * (l + n - 1) + n * (n - 2) / 4.0, harmonic_dimension(n, l)) for l in range(L + 1)]


@dataclass(frozen=True)
class SpectralProblem:
    mu: ConformalFactor
    L: int
    J: int | None = None
    quad_order: int | None = None

    def __post_init__(self):
        if self.L < 4:
            raise ValueError("truncation L must be at least 4")
        J = self.L if self.J is None else self.J
        if not 0 <= J <= self.L:
            raise ValueError("need 0 <= J <= L")
        object.__setattr__(self, "J", J)
        if self.quad_order is None:
            object.__setattr__(self, "quad_order", default_quad_order(self.mu, self.L))

    @property
    def n(self) -> int:
        return self.mu.n


def default_quad_order(mu: ConformalFactor, L: int) -> int:
    """``4L + 8`` nodes, raised if a polynomial weight needs more for exactness."""
    order = 4 * L + 8
    if mu.is_polynomial and not mu.is_constant and (4 % (mu.n - 2) == 0):
        deg = (len(mu.to_dict()["profile"]["coeffs"]) - 1) * (4 // (mu.n - 2))
        order = max(order, (2 * L + deg) // 2 + 2)
    return order


def _gegenbauer_block(u, j, alpha0, size):
    """Weighted basis ``G_a = (1-u^2)^{j/2} P_a`` and ``D_a = d/dphi``-type term.

    Returns ``G`` and ``D`` of shape ``(size, len(u))`` with
    ``D_a = (1-u^2)^{(j+1)/2} P_a' - j u (1-u^2)^{(j-1)/2} P_a``, so that the
    block energy density is ``D_a D_b + j(j+n-2) G_a G_b / (1-u^2)``.
    """
    alpha = j + alpha0
    s2 = 1.0 - u * u
    s = np.sqrt(s2)
    mu0 = np.exp((2 * alpha + 1) * np.log(2.0) + 2 * gammaln(alpha + 1) - gammaln(2 * alpha + 2))
    a = np.arange(1, size + 1)
    sqb = np.sqrt(a * (a + 2 * alpha) / ((2 * a + 2 * alpha) ** 2 - 1.0))  # sqrt(beta_a), a >= 1
    G = np.zeros((size, u.size))
    Pd = np.zeros((size, u.size))  # (1-u^2)^{(j+1)/2} P_a'
    G[0] = s**j / np.sqrt(mu0)
    if size > 1:
        G[1] = u * G[0] / sqb[0]
        Pd[1] = s * G[0] / sqb[0]
    for k in range(1, size - 1):
        G[k + 1] = (u * G[k] - sqb[k - 1] * G[k - 1]) / sqb[k]
        Pd[k + 1] = (s * G[k] + u * Pd[k] - sqb[k - 1] * Pd[k - 1]) / sqb[k]
    D = Pd - j * u * G / s if j else Pd
    return G, D


def assemble_block(problem: SpectralProblem, j: int, quad_order: int | None = None):
    """Stiffness and mass matrices of block ``j``.

    Stiffness is the radial Dirichlet energy plus the centrifugal term
    ``j(j+n-2)/sin^2 phi`` plus ``c_n R_g``; mass carries the weight
    ``mu^{4/(n-2)}``.
    """
    n = problem.n
    if not 0 <= j <= problem.J:
        raise ValueError(f"block {j} outside 0..{problem.J}")
    grid = build_quadrature(n, quad_order or problem.quad_order)
    u, w = grid.nodes, grid.weights * grid.angular
    G, D = _gegenbauer_block(u, j, 0.5 * (n - 2), problem.L - j + 1)
    pot = n * (n - 2) / 4.0
    cent = j * (j + n - 2) / (1.0 - u * u)
    S = (D * w) @ D.T + ((cent + pot) * w * G) @ G.T
    M = (problem.mu.mass_weight(u) * w * G) @ G.T
    # the angular factor is common to both sides; keep the matrices O(1)
    S /= grid.angular
    M /= grid.angular
    return 0.5 * (S + S.T), 0.5 * (M + M.T)


def solve_block(S, M, vectors: bool = False):
    """Eigenvalues of the symmetric-definite pencil ``S v = lambda M v``.

    Reduces with the Cholesky factor ``M = C C^T`` to the standard problem
    ``C^{-1} S C^{-T}`` and calls a dense symmetric eigensolver. Each value
    is then replaced by the Rayleigh quotient of its eigenvector in the
    original pencil: the dense solver is accurate to ``eps * lambda_max``,
    the quotient to roughly ``eps * lambda`` for the low modes.
    """
    try:
        C = cholesky(M, lower=True)
    except LinAlgError as exc:
        raise NotPositiveDefiniteError("mass matrix is not positive definite") from exc
    A = solve_triangular(C, solve_triangular(C, S, lower=True).T, lower=True)
    A = 0.5 * (A + A.T)
    _, Y = eigh(A)
    V = solve_triangular(C.T, Y, lower=False)
    lam = np.einsum("ik,ik->k", V, S @ V) / np.einsum("ik,ik->k", V, M @ V)
    order = np.argsort(lam, kind="stable")
    lam, V = lam[order], V[:, order]
    return (lam, V) if vectors else lam


@dataclass
class SpectrumResult:
    """Eigenvalues of one truncation, one row per block mode.

    ``values`` are ascending; ``multiplicities[i]`` is the dimension of the
    degree-``blocks[i]`` harmonics on S^{n-1}. Counting with multiplicity,
    ``lambda_0 <= lambda_1 <= ...``.
    """

    n: int
    L: int
    values: np.ndarray
    multiplicities: np.ndarray
    blocks: np.ndarray
    quad_order: int
    trusted_count: int | None = None
    meta: dict = field(default_factory=dict)

    def expanded(self) -> np.ndarray:
        return np.repeat(self.values, self.multiplicities)

    def start_index(self) -> np.ndarray:
        """0-based index (with multiplicity) of the first copy of each mode."""
        return np.concatenate([[0], np.cumsum(self.multiplicities)[:-1]]).astype(int)

    def grouped(self, tol: float = 1e-8) -> list[tuple[float, int]]:
        """Merge numerically equal values across blocks into ``(value, multiplicity)``."""
        out: list[list] = []
        for v, m in zip(self.values, self.multiplicities):
            if out and abs(v - out[-1][0]) <= tol * max(1.0, abs(v)):
                out[-1][1] += int(m)
            else:
                out.append([float(v), int(m)])
        return [(v, m) for v, m in out]

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["k", "eigenvalue", "multiplicity", "block", "L"])
        for k, v, m, b in zip(self.start_index(), self.values, self.multiplicities, self.blocks):
            wr.writerow([int(k), repr(float(v)), int(m), int(b), self.L])
        return buf.getvalue()


def merge_spectrum(blocks, n: int, L: int, quad_order: int = 0) -> SpectrumResult:
    """Merge per-block eigenvalue arrays (index = block ``j``) into one sorted result.

    Values within ``TIE_TOL`` (relative) of each other count as ties and are
    ordered by block index, so the order can differ from a strict numeric sort
    by round-off.
    """
    vals, mult, lab = [], [], []
    for j, ev in enumerate(blocks):
        ev = np.asarray(ev, float)
        vals.append(ev)
        lab.append(np.full(ev.size, j))
        mult.append(np.full(ev.size, harmonic_dimension(n - 1, j)))
    vals, mult, lab = (np.concatenate(x) for x in (vals, mult, lab))
    order = np.lexsort((lab, vals))
    # values equal up to round-off are ordered by block, lowest first
    v = vals[order]
    cluster = np.concatenate([[0], np.cumsum(np.diff(v) > TIE_TOL * np.maximum(1.0, np.abs(v[1:])))])
    order = order[np.lexsort((lab[order], cluster))]
    return SpectrumResult(n=n, L=L, values=vals[order], multiplicities=mult[order], blocks=lab[order], quad_order=quad_order)


def _solve(problem: SpectralProblem) -> SpectrumResult:
    order = problem.quad_order
    for attempt in range(2):
        try:
            blocks = [solve_block(*assemble_block(problem, j, order)) for j in range(problem.J + 1)]
            break
        except NotPositiveDefiniteError:
            if attempt:
                raise NotPositiveDefiniteError(
                    "mass matrix not SPD after doubling quadrature order; check the conformal factor floor"
                )
            order *= 2
    return merge_spectrum(blocks, problem.n, problem.L, order)


def compute_spectrum(mu: ConformalFactor, L: int = 24, J: int | None = None, quad_order: int | None = None,
                     check: bool = True) -> SpectrumResult:
    """Spectrum of the conformal Laplacian of ``mu^{4/(n-2)} g``.

    With ``check=True`` the problem is also solved at ``L + 8`` and
    ``trusted_count`` is the length of the common prefix (counted with
    multiplicity) on which the two truncations agree to ``1e-7`` relative.
    """
    res = _solve(SpectralProblem(mu, L, J, quad_order))
    if check:
        J_ref = None if J is None else J + TRUST_EXTRA
        ref = _solve(SpectralProblem(mu, L + TRUST_EXTRA, J_ref))
        a, b = res.expanded(), ref.expanded()
        m = min(a.size, b.size)
        bad = np.abs(a[:m] - b[:m]) >= TRUST_TOL * np.maximum(1.0, np.abs(b[:m]))
        res.trusted_count = int(np.argmax(bad)) if bad.any() else m
    res.meta = {"mu": mu.to_dict(), "J": L if J is None else J}
    return res


def lambda_k(result: SpectrumResult, k: int) -> float:
    """``k``-th eigenvalue (0-based, counted with multiplicity)."""
    if k < 0:
        raise ValueError("k must be non-negative")
    limit = result.trusted_count if result.trusted_count is not None else int(result.multiplicities.sum())
    if k >= limit:
        raise TruncationError(f"lambda_{k} beyond trusted range ({limit} eigenvalues); increase L")
    idx = np.searchsorted(np.cumsum(result.multiplicities), k, side="right")
    return float(result.values[idx])
