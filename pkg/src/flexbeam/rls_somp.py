"""Regularized simultaneous orthogonal matching pursuit.

Solves ``min ||Y - D X||_F^2 + zeta ||X||_F^2`` subject to ``X`` having
exactly ``N`` nonzero rows.  Each greedy step picks the unused atom with the
largest ``||D_g^H R||_2^2`` and re-solves the ridge problem on the support.

:func:`rls_somp` re-solves densely every step.  :func:`rls_somp_fast`
keeps the support inverse, coefficients and residual correlations up to date
with rank-one block-inverse updates, so a step costs ``O(mG + GM + n^2)``
instead of ``O(mGM + mn^2 + n^3)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.linalg.blas import get_blas_funcs

from .errors import ConfigurationError

logger = logging.getLogger(__name__)

__all__ = ["SparseSolution", "FastSompWorkspace", "rls_solve", "rls_somp",
           "rls_somp_fast", "solve_somp", "rls_objective"]

# Relative threshold on the Schur complement below which the fast path
# re-factorizes the support densely.
SCHUR_GUARD = 1e-12


@dataclass
class SparseSolution:
    """Row-sparse solution: ``X[i]`` is the coefficient row of atom ``Lambda[i]``."""

    X: np.ndarray
    Lambda: list
    residual_norm: float
    fallbacks: int = 0

    def dense(self, G: int) -> np.ndarray:
        out = np.zeros((G, self.X.shape[1]), dtype=self.X.dtype)
        out[self.Lambda] = self.X
        return out


def rls_solve(D_sub: np.ndarray, Y: np.ndarray, zeta: float) -> np.ndarray:
    """``(D^H D + zeta I)^{-1} D^H Y`` through a Cholesky solve.

    Raises ``numpy.linalg.LinAlgError`` when the system is singular, which
    can only happen for ``zeta = 0`` and rank-deficient ``D_sub``.
    """
    if zeta < 0:
        raise ConfigurationError("zeta must be nonnegative")
    D_sub = np.asarray(D_sub)
    n = D_sub.shape[1]
    A = D_sub.conj().T @ D_sub
    A[np.diag_indices(n)] += zeta
    try:
        c = linalg.cho_factor(A, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"singular ridge system (zeta={zeta})") from exc
    return linalg.cho_solve(c, D_sub.conj().T @ Y, check_finite=False)


def rls_objective(Y, D, sol: SparseSolution, zeta: float) -> float:
    R = Y - D[:, sol.Lambda] @ sol.X
    return float(np.real(np.vdot(R, R)) + zeta * np.real(np.vdot(sol.X, sol.X)))


def _check(Y, D, N):
    Y = np.asarray(Y)
    D = np.asarray(D)
    if Y.ndim == 1:
        Y = Y[:, None]
    if D.shape[0] != Y.shape[0]:
        raise ValueError(f"D has {D.shape[0]} rows but Y has {Y.shape[0]}")
    if not 1 <= N <= D.shape[1]:
        raise ConfigurationError(f"cannot select N={N} atoms from G={D.shape[1]}")
    return Y, D


def _pick(scores: np.ndarray, used: np.ndarray) -> int:
    # np.argmax returns the lowest index among ties
    masked = np.where(used, -np.inf, scores)
    return int(np.argmax(masked))


def rls_somp(Y, D, zeta: float, N: int) -> SparseSolution:
    """Reference RLS-SOMP: dense ridge re-solve at every step."""
    Y, D = _check(Y, D, N)
    used = np.zeros(D.shape[1], dtype=bool)
    support: list[int] = []
    R = Y
    X = np.zeros((0, Y.shape[1]), dtype=np.result_type(Y, D))
    DH = D.conj().T
    for _ in range(N):
        C = DH @ R
        g = _pick(_scores(C), used)
        used[g] = True
        support.append(g)
        Ds = D[:, support]
        X = rls_solve(Ds, Y, zeta)
        R = Y - Ds @ X
    return SparseSolution(X=X, Lambda=support, residual_norm=float(np.linalg.norm(R)))


@dataclass
class FastSompWorkspace:
    """Caches for the fast solver on one dictionary ``D`` and target ``Y``.

    ``dy_cache`` is ``D^H Y`` and ``norms2`` the squared atom norms.  By
    default no Gram matrix is formed and each step spends one ``G x m``
    product on ``D^H t``.  :meth:`materialize_gram` precomputes ``D^H D``
    (if it fits in ``gram_budget`` bytes) so a step reads Gram columns in
    ``O(nG)`` instead, which only pays off when one dictionary serves many
    targets.  Buffers are preallocated for ``N`` atoms and only their
    leading ``n`` rows/columns are live after step ``n``.

    With ``track_u=True`` the solver also carries
    ``U = D_Lambda (D_Lambda^H D_Lambda + zeta I)^{-1}`` by its rank-one
    recursion.  It is not needed for the result (``U^H d`` equals
    ``Ainv (D_Lambda^H d)``) and costs ``O(mn)`` per step.
    """

    D: np.ndarray
    Y: np.ndarray
    gram_budget: int = 1 << 30
    track_u: bool = False
    full_gram: np.ndarray | None = field(init=False, default=None)
    v_n: np.ndarray | None = field(init=False, default=None)
    t_n: np.ndarray | None = field(init=False, default=None)
    eta_n: float | None = field(init=False, default=None)

    def __post_init__(self):
        self.D = np.asarray(self.D)
        self.Y = np.asarray(self.Y)
        if self.Y.ndim == 1:
            self.Y = self.Y[:, None]
        self.dtype = np.result_type(self.D, self.Y, np.complex128)
        # one pass into a row-major buffer; D.conj().T would copy twice
        self.DH = np.conjugate(self.D.T, out=np.empty(self.D.shape[::-1], dtype=self.dtype))
        self.dy_cache = self.DH @ self.Y
        self.norms2 = _scores(self.DH)

    def allocate(self, N: int):
        m, G = self.D.shape
        M = self.Y.shape[1]
        # column-major so the live leading columns stay contiguous
        self.gram_cache = np.zeros((G, N), dtype=self.dtype, order="F")
        self.Dsel = np.zeros((m, N), dtype=self.dtype, order="F")
        self.U = np.zeros((m, N), dtype=self.dtype, order="F") if self.track_u else None
        self.Ainv = np.zeros((N, N), dtype=self.dtype)
        self.X = np.zeros((N, M), dtype=self.dtype)
        self.dy_sel = np.zeros((N, M), dtype=self.dtype)

    def retarget(self, Y) -> "FastSompWorkspace":
        """Point the workspace at a new target, keeping ``D^H`` and any Gram matrix."""
        Y = np.asarray(Y)
        self.Y = Y[:, None] if Y.ndim == 1 else Y
        self.dtype = np.result_type(self.D, self.Y, np.complex128)
        self.dy_cache = self.DH @ self.Y
        return self

    def materialize_gram(self) -> bool:
        G = self.D.shape[1]
        if G * G * np.dtype(self.dtype).itemsize > self.gram_budget:
            return False
        if self.full_gram is None:
            self.full_gram = self.DH @ self.D
        return True

    def gram_column(self, g: int) -> np.ndarray:
        if self.full_gram is not None:
            return self.full_gram[:, g]
        # row g of D^H is contiguous, column g of D is not
        return self.DH @ self.DH[g].conj()

    def dense_refactor(self, n: int, zeta: float):
        Ds = self.Dsel[:, :n]
        A = Ds.conj().T @ Ds
        A[np.diag_indices(n)] += zeta
        self.Ainv[:n, :n] = np.linalg.inv(A)
        self.X[:n] = self.Ainv[:n, :n] @ self.dy_sel[:n]
        if self.U is not None:
            self.U[:, :n] = Ds @ self.Ainv[:n, :n]


def _scores(C: np.ndarray) -> np.ndarray:
    """Row energies ``||C[g]||^2`` of a complex matrix."""
    V = np.ascontiguousarray(C, dtype=np.complex128).view(np.float64)
    return np.einsum("ij,ij->i", V, V)


def rls_somp_fast(Y, D, zeta: float, N: int, workspace: FastSompWorkspace | None = None) -> SparseSolution:
    """RLS-SOMP with cached correlations and matrix-inversion-lemma updates.

    Returns the same support and coefficients as :func:`rls_somp` up to
    rounding.  Per step, with ``Lambda`` the previous support, ``d`` the new
    atom, ``b = D_Lambda^H d`` and ``Ainv = (D_Lambda^H D_Lambda + zeta I)^{-1}``::

        v   = Ainv b                     (= U^H d)
        eta = 1 / (||d||^2 + zeta - b^H v)
        t^H Y = v^H (D^H Y)[Lambda] - (D^H Y)[g]
        D^H t = (D^H D_Lambda) v - D^H d   (or D^H applied to t directly)
        X   <- [X; 0] + [v; -1] eta (t^H Y)
        D^H R <- D^H R - eta (D^H t)(t^H Y)

    where ``t = D_Lambda v - d``.  ``Ainv`` grows by the block-inverse
    identity, so no step factorizes anything.
    """
    Y, D = _check(Y, D, N)
    if zeta < 0:
        raise ConfigurationError("zeta must be nonnegative")
    ws = workspace if workspace is not None else FastSompWorkspace(D, Y)
    ws.allocate(N)
    used = np.zeros(D.shape[1], dtype=bool)
    support: list[int] = []
    C = np.array(ws.dy_cache, dtype=np.complex128, order="C")  # D^H R
    geru = get_blas_funcs("geru", (C,))
    dy = ws.dy_cache
    Ainv = ws.Ainv
    gram = ws.full_gram is not None
    fallbacks = 0

    for n in range(N):
        scores = _scores(C)
        scores[used] = -np.inf
        g = int(scores.argmax())  # lowest index among ties
        used[g] = True
        d = ws.DH[g].conj()
        Ds = ws.Dsel[:, :n]
        base = ws.norms2[g] + zeta
        if gram:
            gcol = ws.full_gram[:, g]
            b = gcol[support]
        else:
            b = Ds.conj().T @ d
        v = Ainv[:n, :n] @ b
        vc = v.conj()
        schur = base - (vc @ b).real
        if gram:
            ws.gram_cache[:, n] = gcol
        ws.Dsel[:, n] = d
        ws.dy_sel[n] = dy[g]
        support.append(g)

        if schur <= SCHUR_GUARD * base:
            logger.info("fast RLS-SOMP: Schur complement %.3e at step %d, dense re-solve", schur, n + 1)
            fallbacks += 1
            ws.dense_refactor(n + 1, zeta)
            C[:] = ws.DH @ (Y - ws.Dsel[:, :n + 1] @ ws.X[:n + 1])
            ws.v_n = ws.t_n = ws.eta_n = None
            continue

        eta = 1.0 / schur
        tY = vc @ ws.dy_sel[:n] - dy[g]
        if gram:
            Dt = ws.gram_cache[:, :n] @ v - gcol
        else:
            t = Ds @ v - d
            Dt = ws.DH @ t
        # block inverse of the enlarged ridge system
        ev = eta * v
        Ainv[:n, :n] += ev[:, None] * vc
        np.negative(ev, out=Ainv[:n, n])
        np.multiply(vc, -eta, out=Ainv[n, :n])
        Ainv[n, n] = eta

        if ws.U is not None:
            if gram:
                t = Ds @ v - d
            ws.U[:, :n] += (eta * t)[:, None] * vc
            ws.U[:, n] = -eta * t
            ws.t_n = t

        step = eta * tY
        ws.X[:n] += v[:, None] * step
        ws.X[n] = -step
        # C <- C - Dt step^T, done on the Fortran view C^T in place
        geru(-1.0, step, Dt, a=C.T, overwrite_a=1)
        ws.v_n, ws.eta_n = v, eta

    X = ws.X.copy()
    R = Y - ws.Dsel @ X
    return SparseSolution(X=X, Lambda=support, residual_norm=float(np.linalg.norm(R)),
                          fallbacks=fallbacks)


def solve_somp(Y, D, zeta: float, N: int, mode: str = "fast") -> SparseSolution:
    if mode == "fast":
        return rls_somp_fast(Y, D, zeta, N)
    if mode == "naive":
        return rls_somp(Y, D, zeta, N)
    raise ConfigurationError(f"unknown SOMP mode {mode!r}")
