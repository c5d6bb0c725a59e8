"""Constrained state reconstruction from measurement records.

The maximum-likelihood estimator minimizes -sum_j nu_j log p_j(rho) over the
density-matrix set {rho >= 0, Tr rho = 1}; a least-squares variant minimizes
sum_j (nu_j - p_j)^2 over the same set. Both run on the selected solver
kernel (compiled extension or numpy fallback) and report a verifiable
optimality residual: the norm of the unit-step projected-gradient fixed-point
map, which vanishes exactly at a constrained stationary point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernel import OBJECTIVE_LSQ, OBJECTIVE_MLE
from ._kernel import project_psd_simplex as _kernel_project
from ._kernel import solve_pgd
from .povm import Povm
from .qcore import DensityMatrix, HermitianOperator, as_matrix, hermiticity_defect
from .simulate import MeasurementRecord

__all__ = [
    "EstimatorResult",
    "lsq_estimate",
    "mle_estimate",
    "project_psd_simplex",
]

PROBABILITY_FLOOR = 1e-12
STEP_NORM_TOL = 1e-9
MAX_ITERATIONS = 5000


@dataclass(frozen=True)
class EstimatorResult:
    """Reconstruction output: the state plus convergence diagnostics."""

    rho_hat: DensityMatrix
    objective: float
    iterations: int
    converged: bool
    optimality_residual: float

    def __post_init__(self):
        if not np.isfinite(self.objective):
            raise ValueError(f"objective must be finite, got {self.objective}")

    def to_dict(self) -> dict:
        return {
            "rho_hat": [
                [[float(z.real), float(z.imag)] for z in row] for row in self.rho_hat.matrix
            ],
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "optimality_residual": self.optimality_residual,
        }


def project_psd_simplex(op) -> DensityMatrix:
    """Frobenius-nearest density matrix to a Hermitian operator: project the
    spectrum onto the probability simplex in the operator's eigenbasis."""
    m = op.matrix if isinstance(op, HermitianOperator) else as_matrix(op)
    defect = hermiticity_defect(m)
    if defect > 1e-12:
        raise ValueError(f"input not Hermitian (defect {defect:.3e})")
    out = _kernel_project(np.ascontiguousarray(m))
    out = (out + out.conj().T) / 2.0
    return DensityMatrix(m.shape[0], out)


def _aligned_arrays(record: MeasurementRecord, povm: Povm) -> tuple[np.ndarray, np.ndarray]:
    if record.dim != povm.dim:
        raise ValueError(f"record dimension {record.dim} does not match POVM dimension {povm.dim}")
    if record.povm_id and povm.name and record.povm_id != povm.name:
        raise ValueError(f"record was taken with POVM {record.povm_id!r}, not {povm.name!r}")
    if record.labels != povm.labels:
        raise ValueError(
            f"record settings {record.labels} do not align with POVM settings {povm.labels}"
        )
    rows = []
    nu = []
    for setting, freqs in zip(povm.settings, record.frequencies):
        if freqs.size != setting.n_outcomes:
            raise ValueError(
                f"setting {setting.label!r}: {freqs.size} frequencies for {setting.n_outcomes} effects"
            )
        for e in setting.effects:
            rows.append(e.conj().ravel())
        nu.append(freqs)
    m = np.ascontiguousarray(np.stack(rows))
    nu = np.concatenate(nu)
    if not np.all(np.isfinite(nu)):
        raise ValueError("record contains non-finite frequencies")
    return m, nu


def _run(record, povm, objective, max_iter, tol, floor) -> EstimatorResult:
    m, nu = _aligned_arrays(record, povm)
    if objective == OBJECTIVE_MLE and not np.any(nu > 0.0):
        raise ValueError("all frequencies are zero; nothing to estimate")
    rho, fval, iters, converged, residual, _ = solve_pgd(
        m, nu, povm.dim, objective=objective, floor=floor, tol=tol, max_iter=max_iter
    )
    fval = float(fval)
    if objective == OBJECTIVE_MLE:
        # The kernel minimizes the KL divergence to the clipped frequencies;
        # shift back to the raw negative log-likelihood for reporting.
        nup = nu[nu > 0.0]
        fval += float(-(nup * np.log(nup)).sum())
    return EstimatorResult(
        rho_hat=DensityMatrix(povm.dim, rho),
        objective=fval,
        iterations=int(iters),
        converged=bool(converged),
        optimality_residual=float(residual),
    )


def mle_estimate(
    record: MeasurementRecord,
    povm: Povm,
    max_iter: int = MAX_ITERATIONS,
    tol: float = STEP_NORM_TOL,
    floor: float = PROBABILITY_FLOOR,
) -> EstimatorResult:
    """Maximum-likelihood reconstruction by projected gradient descent.

    Negative frequencies are clipped to zero in the objective; probabilities
    are floored before the log to keep gradients finite. Deterministic given
    its inputs (initialization at the maximally mixed state).
    """
    return _run(record, povm, OBJECTIVE_MLE, max_iter, tol, floor)


def lsq_estimate(
    record: MeasurementRecord,
    povm: Povm,
    max_iter: int = MAX_ITERATIONS,
    tol: float = STEP_NORM_TOL,
) -> EstimatorResult:
    """Constrained least-squares reconstruction (diagnostic estimator)."""
    return _run(record, povm, OBJECTIVE_LSQ, max_iter, tol, PROBABILITY_FLOOR)
