"""Sparse linear-system backends shared by policy evaluation and chain analysis."""
from __future__ import annotations

import warnings

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SingularSystem

LINEAR_SOLVERS = ("direct", "iterative")


def solve(A: sp.spmatrix, b: np.ndarray, method: str = "direct",
          x0: np.ndarray | None = None, rtol: float = 1e-13) -> np.ndarray:
    """Solve ``A x = b`` with a sparse LU factorisation or ILU-preconditioned GMRES."""
    A = sp.csc_matrix(A)
    if method == "direct":
        with warnings.catch_warnings():
            warnings.simplefilter("error", spla.MatrixRankWarning)
            try:
                x = spla.splu(A).solve(np.asarray(b, dtype=float))
            except (RuntimeError, spla.MatrixRankWarning) as exc:
                raise SingularSystem(str(exc)) from exc
    elif method == "iterative":
        x = _gmres(A, b, x0, rtol)
    else:
        raise ValueError(f"unknown linear solver {method!r}; expected one of {LINEAR_SOLVERS}")
    if not np.all(np.isfinite(x)):
        raise SingularSystem("non-finite solution")
    return x


def _gmres(A, b, x0, rtol):
    try:
        ilu = spla.spilu(A, drop_tol=1e-6, fill_factor=20)
        M = spla.LinearOperator(A.shape, ilu.solve)
    except RuntimeError:
        M = None
    x, info = spla.lgmres(A, b, x0=x0, M=M, rtol=rtol, atol=0.0, maxiter=2000)
    if info != 0:
        # refine once from the current iterate before giving up
        x, info = spla.gmres(A, b, x0=x, M=M, rtol=rtol, atol=0.0, restart=200, maxiter=200)
    if info < 0:
        raise SingularSystem(f"gmres breakdown (info={info})")
    return x
