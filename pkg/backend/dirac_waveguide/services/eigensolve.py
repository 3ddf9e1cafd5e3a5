from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import LinearOperator, lobpcg, splu, spsolve_triangular

from backend.dirac_waveguide.config import logger
from backend.dirac_waveguide.services.run_context import incr_run_meta_int
from backend.dirac_waveguide.services.strip_operator import AssembledForms


DENSE_LIMIT = 2000
Preconditioner = Literal["shift_invert", "jacobi", "sgs"]


@dataclass(frozen=True)
class SpectralResult:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    iterations: int
    converged: np.ndarray
    vectors: np.ndarray | None = None

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))


@dataclass(frozen=True)
class SolverOptions:
    count: int = 4
    tol: float = 1e-6
    max_iter: int = 2000
    seed: int = 0
    preconditioner: Preconditioner = "shift_invert"


class NotConverged(RuntimeError):
    def __init__(self, message: str, result: SpectralResult):
        super().__init__(message)
        self.result = result


class IndefiniteMass(ValueError):
    pass


class TooLarge(ValueError):
    pass


def _check_mass_matrix(B: sparse.spmatrix) -> None:
    diagonal = np.real(B.diagonal())
    if diagonal.size == 0 or np.any(diagonal <= 0.0):
        raise IndefiniteMass("mass matrix has a non-positive diagonal entry")


def jacobi_preconditioner(A: sparse.spmatrix) -> LinearOperator:
    diagonal = np.abs(np.real(A.diagonal()))
    floor = max(float(diagonal.max(initial=0.0)) * 1e-14, np.finfo(float).tiny)
    inverse = 1.0 / np.maximum(diagonal, floor)

    def apply(x: np.ndarray) -> np.ndarray:
        if x.ndim == 1:
            return inverse * x
        return inverse[:, None] * x

    return LinearOperator(A.shape, matvec=apply, matmat=apply, dtype=A.dtype)


def sgs_preconditioner(A: sparse.spmatrix) -> LinearOperator:
    """One symmetric Gauss–Seidel sweep: M = (D + L) D⁻¹ (D + Lᴴ)."""
    lower = sparse.tril(A, format="csr")
    upper = sparse.triu(A, format="csr")
    diagonal = A.diagonal()

    def apply(x: np.ndarray) -> np.ndarray:
        y = spsolve_triangular(lower, x, lower=True)
        y = (diagonal * y.T).T
        return spsolve_triangular(upper, y, lower=False)

    return LinearOperator(A.shape, matvec=apply, matmat=apply, dtype=A.dtype)


def shift_invert_preconditioner(forms: AssembledForms, sigma: float) -> LinearOperator:
    """(A − σB)⁻¹ from one sparse LU; σ must lie strictly below the spectrum."""
    shifted = (forms.A - sigma * forms.B).tocsc()
    lu = splu(shifted)
    complex_factor = np.iscomplexobj(shifted.data)

    def apply(x: np.ndarray) -> np.ndarray:
        if np.iscomplexobj(x) and not complex_factor:
            return lu.solve(np.ascontiguousarray(x.real)) + 1j * lu.solve(np.ascontiguousarray(x.imag))
        return lu.solve(np.ascontiguousarray(x, dtype=shifted.dtype))

    return LinearOperator(forms.A.shape, matvec=apply, matmat=apply, dtype=shifted.dtype)


def _preconditioner(forms: AssembledForms, kind: str) -> LinearOperator:
    match kind:
        case "shift_invert":
            if forms.spectral_floor is None:
                logger.debug("forms %s carry no spectral floor; using jacobi", forms.label or "forms")
                return jacobi_preconditioner(forms.A)
            try:
                return shift_invert_preconditioner(forms, forms.spectral_floor)
            except RuntimeError as exc:
                logger.warning("shift-invert factorisation failed (%s); using jacobi", exc)
                return jacobi_preconditioner(forms.A)
        case "jacobi":
            return jacobi_preconditioner(forms.A)
        case "sgs":
            return sgs_preconditioner(forms.A)
        case _:
            raise ValueError(f"unknown preconditioner: {kind!r}")


def residuals(forms: AssembledForms, eigenvalues: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """‖Ax − μBx‖ / ‖x‖_B per column, recomputed from the matrices."""
    AX = forms.A @ vectors
    BX = forms.B @ vectors
    R = AX - BX * eigenvalues[None, :]
    b_norms = np.sqrt(np.abs(np.real(np.einsum("ij,ij->j", vectors.conj(), BX))))
    return np.linalg.norm(R, axis=0) / b_norms


def dense_oracle(forms: AssembledForms) -> np.ndarray:
    """Full spectrum by Cholesky reduction and symmetric QR; for tests and small grids."""
    if forms.dimension > DENSE_LIMIT:
        raise TooLarge(f"dense oracle is limited to dimension {DENSE_LIMIT}, got {forms.dimension}")
    _check_mass_matrix(forms.B)
    try:
        values = linalg.eigh(forms.A.toarray(), forms.B.toarray(), eigvals_only=True, driver="gv")
    except linalg.LinAlgError as exc:
        raise IndefiniteMass(f"mass matrix is not positive definite: {exc}") from exc
    return np.asarray(values)


def _dense_pairs(forms: AssembledForms, count: int) -> tuple[np.ndarray, np.ndarray]:
    try:
        values, vectors = linalg.eigh(
            forms.A.toarray(),
            forms.B.toarray(),
            subset_by_index=[0, count - 1],
        )
    except linalg.LinAlgError as exc:
        raise IndefiniteMass(f"mass matrix is not positive definite: {exc}") from exc
    return values, vectors


def lowest_pairs(
    forms: AssembledForms,
    count: int,
    tol: float = 1e-6,
    max_iter: int = 2000,
    seed: int = 0,
    preconditioner: Preconditioner = "shift_invert",
) -> SpectralResult:
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    _check_mass_matrix(forms.B)
    n = forms.dimension
    block = count + 2
    if count > n:
        raise ValueError(f"requested {count} pairs from a problem of dimension {n}")

    if n < 5 * block:
        # lobpcg itself falls back to a dense solve below this size
        values, vectors = _dense_pairs(forms, count)
        iterations = 0
    else:
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((n, block))
        if np.iscomplexobj(forms.A.data):
            X = X + 1j * rng.standard_normal((n, block))
        M = _preconditioner(forms, preconditioner)
        with warnings.catch_warnings():
            # convergence is re-verified below from independent residuals
            warnings.simplefilter("ignore", UserWarning)
            lam, vec, history = lobpcg(
                forms.A,
                X,
                B=forms.B,
                M=M,
                tol=tol,
                maxiter=max_iter,
                largest=False,
                retResidualNormsHistory=True,
            )
        order = np.argsort(np.real(lam), kind="stable")[:count]
        values = np.real(lam[order])
        vectors = vec[:, order]
        iterations = len(history)

    res = residuals(forms, values, vectors)
    converged = res <= tol
    result = SpectralResult(
        eigenvalues=np.asarray(values, dtype=float),
        residuals=res,
        iterations=iterations,
        converged=converged,
        vectors=vectors,
    )
    incr_run_meta_int("solver_iterations", iterations)
    logger.debug(
        "lowest_pairs %s: dim=%d count=%d iterations=%d max_residual=%.3e",
        forms.label or "forms",
        n,
        count,
        iterations,
        float(res.max(initial=0.0)),
    )
    if not result.all_converged:
        raise NotConverged(
            f"{int(np.count_nonzero(~converged))} of {count} eigenpairs above tol={tol:g} after {iterations} iterations",
            result,
        )
    return result


def solve_with(forms: AssembledForms, options: SolverOptions) -> SpectralResult:
    return lowest_pairs(
        forms,
        options.count,
        tol=options.tol,
        max_iter=options.max_iter,
        seed=options.seed,
        preconditioner=options.preconditioner,
    )


def group_multiplicities(values: Sequence[float], rtol: float = 1e-6) -> list[tuple[float, int]]:
    groups: list[tuple[float, int]] = []
    for value in sorted(float(v) for v in values):
        if groups and abs(value - groups[-1][0]) <= rtol * max(1.0, abs(groups[-1][0])):
            first, size = groups[-1]
            groups[-1] = (first, size + 1)
        else:
            groups.append((value, 1))
    return groups


def observed_order(values: Sequence[float], ratio: float = 2.0) -> list[float]:
    """Convergence orders log(|v_k − v_{k+1}| / |v_{k+1} − v_{k+2}|) / log(ratio)."""
    seq = [float(v) for v in values]
    orders: list[float] = []
    for a, b, c in zip(seq, seq[1:], seq[2:]):
        coarse, fine = abs(a - b), abs(b - c)
        if fine == 0.0 or coarse == 0.0:
            orders.append(math.inf)
            continue
        orders.append(math.log(coarse / fine) / math.log(ratio))
    return orders


__all__ = [
    "DENSE_LIMIT",
    "IndefiniteMass",
    "NotConverged",
    "SolverOptions",
    "SpectralResult",
    "TooLarge",
    "dense_oracle",
    "group_multiplicities",
    "jacobi_preconditioner",
    "lowest_pairs",
    "observed_order",
    "residuals",
    "sgs_preconditioner",
    "shift_invert_preconditioner",
    "solve_with",
]
