"""Swarm consistency: weighted graph Laplacian over pairwise acoustic
SNRs and its algebraic connectivity (second-smallest eigenvalue)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .acoustics import HydroParams, passive_snr


@dataclass(frozen=True)
class SwarmGraph:
    n: int
    laplacian: np.ndarray  # (n, n), symmetric, zero row sums


def build_laplacian(positions: list[tuple[float, float]] | np.ndarray,
                    hp: HydroParams) -> SwarmGraph:
    """Edge (i, j) carries weight a_ij = passive SNR when it clears the
    detection threshold; diagonal balances the row."""
    pts = np.asarray(positions, dtype=np.float64)
    n = len(pts)
    if n < 2:
        raise ValueError("need at least two agents")
    lap = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = float(np.hypot(*(pts[i] - pts[j])))
            if d <= 0.0:
                raise ValueError(f"agents {i} and {j} are coincident")
            a = passive_snr(d, hp)
            if a >= hp.dt_thresh:
                lap[i, j] = lap[j, i] = -a
                lap[i, i] += a
                lap[j, j] += a
    return SwarmGraph(n=n, laplacian=lap)


def jacobi_eigenvalues(matrix: np.ndarray, tol: float = 1e-10,
                       max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations."""
    a = np.array(matrix, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if not np.allclose(a, a.T, atol=1e-9):
        raise ValueError("matrix must be symmetric")
    scale = max(np.abs(a).max(), 1.0)
    offdiag = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a[offdiag])
        if off <= tol * scale:
            return np.sort(np.diag(a))
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                else:
                    t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
    raise ArithmeticError(f"Jacobi sweep failed to converge in {max_sweeps} sweeps")


def algebraic_connectivity(g: SwarmGraph) -> float:
    """Second-smallest Laplacian eigenvalue; zero exactly when the
    communication graph is disconnected."""
    ev = jacobi_eigenvalues(g.laplacian)
    if abs(ev[0]) > 1e-6 * max(abs(ev[-1]), 1.0):
        raise ArithmeticError(f"smallest Laplacian eigenvalue not ~0: {ev[0]}")
    lam = float(ev[1])
    if lam <= 1e-9 * max(abs(ev[-1]), 1.0):
        return 0.0  # disconnected up to rounding
    return lam


def consistency(positions, hp: HydroParams) -> float:
    """Convenience: connectivity of the swarm at the given positions."""
    return algebraic_connectivity(build_laplacian(positions, hp))
