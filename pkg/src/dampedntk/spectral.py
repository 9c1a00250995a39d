"""Eigensystems under the normalized inner product <x,y>_n = x.y / n, Nystrom
extension, the exact Fourier eigenbasis on the circle, and projections."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .data import circle_mode, circle_points
from .kernel import GramPair


class DegenerateModeError(ValueError):
    pass


class NonInvariantKernelError(ValueError):
    pass


def inner_n(u, v) -> float:
    u = np.asarray(u)
    return float(u @ np.asarray(v)) / u.shape[0]


def norm_n(v) -> float:
    v = np.asarray(v)
    return float(np.linalg.norm(v) / np.sqrt(v.shape[0]))


@dataclass(frozen=True)
class EigenSystem:
    """lambdas nonincreasing; columns of U have ||u_i||_n = 1, i.e. Euclidean norm sqrt(n)."""

    lambdas: np.ndarray
    U: np.ndarray
    source: GramPair | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.U.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.lambdas) @ self.U.T / self.n


def eig_gram(g: GramPair | np.ndarray, sym_tol: float = 1e-10) -> EigenSystem:
    """Full symmetric eigendecomposition of G with the sqrt(n) column scaling."""
    G = g.G if isinstance(g, GramPair) else np.asarray(g, dtype=float)
    scale = max(float(np.max(np.abs(G))), 1e-300)
    if np.max(np.abs(G - G.T)) > sym_tol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    n = G.shape[0]
    lam, V = np.linalg.eigh(0.5 * (G + G.T))
    order = np.argsort(lam, kind="stable")[::-1]
    lam = lam[order]
    V = V[:, order]
    lam = np.where((lam < 0) & (lam >= -1e-12), 0.0, lam)
    src = g if isinstance(g, GramPair) else None
    return EigenSystem(lam, V * np.sqrt(n), src)


def nystrom_extend(sys: EigenSystem, kernel_row: Callable, i: int, threshold: float = 1e-10) -> Callable:
    """x -> lambda_i^{-1/2} (1/n) sum_j K(x, x_j) (u_i)_j  (0-based index ``i``).

    ``kernel_row`` maps an (N, d) array to the (N, n) matrix K(x, x_1..x_n).
    The result has unit norm in the RKHS; divide by sqrt(lambda_i) for the
    L^2-normalized eigenfunction estimate.
    """
    lam = float(sys.lambdas[i])
    if lam <= threshold:
        raise DegenerateModeError(f"eigenvalue {lam:.3e} at index {i} is below {threshold:.1e}")
    u = sys.U[:, i]
    n = sys.n
    coef = u / (n * np.sqrt(lam))

    def v(X):
        return np.asarray(kernel_row(np.atleast_2d(X))) @ coef

    return v


@dataclass(frozen=True)
class SpectrumModel:
    """Mercer eigenpairs (sigma_i, phi_i), sorted so sigmas are nonincreasing."""

    sigmas: np.ndarray
    eigenfunctions: tuple[Callable, ...] = field(repr=False)
    kind: str
    kappa: float
    labels: tuple[str, ...] = ()
    freqs: tuple[int, ...] = ()

    def index_of(self, label: str) -> int:
        return self.labels.index(label)

    def eigenspace(self, freq: int) -> list[int]:
        """Indices of all retained modes with Fourier frequency ``freq``."""
        return [i for i, f in enumerate(self.freqs) if f == freq]

    def evaluate(self, X) -> np.ndarray:
        """(N, n_modes) matrix of phi_i(X)."""
        return np.stack([phi(X) for phi in self.eigenfunctions], axis=1)


def circle_profile(kernel: Callable, check: bool = True, rng: np.random.Generator | None = None, tol: float = 1e-6) -> Callable:
    """Profile delta -> K(e_0, e_delta) of a kernel on S^1, optionally checking rotation invariance.

    ``kernel`` maps two (N, 2) point arrays to an (N, M) matrix.
    """
    base = np.array([[1.0, 0.0]])

    def profile(delta):
        delta = np.atleast_1d(np.asarray(delta, dtype=float))
        return np.asarray(kernel(base, circle_points(delta)))[0]

    if check:
        rng = rng or np.random.default_rng(0)
        th = rng.uniform(0, 2 * np.pi, size=(64, 2))
        for t1, t2 in th:
            k = float(np.asarray(kernel(circle_points([t1]), circle_points([t2])))[0, 0])
            if abs(k - float(profile(t2 - t1)[0])) > tol:
                raise NonInvariantKernelError(f"kernel is not rotation invariant at angles ({t1:.3f}, {t2:.3f})")
    return profile


def circle_fourier_model(kernel_profile: Callable, n_modes: int, n_quad: int = 8192) -> SpectrumModel:
    """Eigenpairs of T_K for a rotation-invariant kernel on the uniform circle.

    sigma_k = (1/2pi) int profile(delta) cos(k delta) d delta by the
    ``n_quad``-point trapezoid rule; cos/sin modes of frequency k share it.
    """
    if n_modes < 1:
        raise ValueError("need at least one mode")
    delta = 2.0 * np.pi * np.arange(n_quad) / n_quad
    prof = np.asarray(kernel_profile(delta), dtype=float)
    kappa = float(np.asarray(kernel_profile(np.array([0.0]))).reshape(-1)[0])
    kmax = n_modes // 2 + 1
    coef = [float(np.mean(prof * np.cos(k * delta))) for k in range(kmax + 1)]
    cand = [("const", 0)]
    for k in range(1, kmax + 1):
        cand += [(f"cos{k}", k), (f"sin{k}", k)]
    cand = cand[:n_modes]
    sig = np.array([coef[k] for _, k in cand])
    order = np.argsort(-sig, kind="stable")
    labels = tuple(cand[i][0] for i in order)
    freqs = tuple(cand[i][1] for i in order)
    return SpectrumModel(sig[order], tuple(circle_mode(lab) for lab in labels), "circle_fourier", kappa, labels, freqs)


def project(v, sys: EigenSystem, k: int):
    """Coefficients <v, u_i>_n for i < k and the reconstruction P_k v."""
    if not 1 <= k <= sys.n:
        raise ValueError(f"k={k} outside [1, {sys.n}]")
    v = np.asarray(v, dtype=float)
    Uk = sys.U[:, :k]
    coefs = Uk.T @ v / sys.n
    return coefs, Uk @ coefs


def project_onto(v, sys: EigenSystem, indices: Sequence[int]) -> np.ndarray:
    """Projection onto span{u_i : i in indices} (an eigenspace, for degenerate pairs)."""
    Ui = sys.U[:, list(indices)]
    return Ui @ (Ui.T @ np.asarray(v, dtype=float) / sys.n)


def bottom_participation(y, sys: EigenSystem, k: int) -> float:
    """||(I - P_k) y||_n."""
    _, Py = project(y, sys, k)
    return norm_n(np.asarray(y, dtype=float) - Py)


def eigenspace_correlation(funcs_est: Sequence[Callable], funcs_exact: Sequence[Callable], n_grid: int = 4096) -> float:
    """Smallest canonical correlation between two function spans on the uniform circle.

    Equals min over exact phi of ||proj_{span est} phi|| / ||phi||; 1 means the
    estimated eigenspace contains every exact mode.
    """
    X = circle_points(2.0 * np.pi * np.arange(n_grid) / n_grid)
    A = np.stack([f(X) for f in funcs_est], axis=1)
    B = np.stack([f(X) for f in funcs_exact], axis=1)
    Qa, _ = np.linalg.qr(A)
    Qb, _ = np.linalg.qr(B)
    s = np.linalg.svd(Qa.T @ Qb, compute_uv=False)
    return float(np.min(s)) if len(funcs_exact) <= len(funcs_est) else 0.0


def circle_eigenspaces(model: SpectrumModel, n_top: int) -> list[list[int]]:
    """Group the first ``n_top`` model modes into frequency eigenspaces, in order."""
    groups: list[list[int]] = []
    seen: dict[int, list[int]] = {}
    for i in range(n_top):
        f = model.freqs[i]
        if f not in seen:
            seen[f] = []
            groups.append(seen[f])
        seen[f].append(i)
    return groups
