import logging
from dataclasses import dataclass

import numpy as np

from models.epochs import Epoch
from models.model_spec import ModelSpec
from services.errors import (
    EvalAtPole,
    NegativeBoundaryMass,
    RootCountMismatch,
    SingularBoundarySystem,
    UnstableModelError,
)
from services.linalg import adjugate, replace_column
from services.queue_model import MomentSet, arrival_matrix, moment_set
from services.roots import RootSet, det_m, find_unit_disk_roots, m_matrix

logger = logging.getLogger(__name__)

CLAMP_TOLERANCE = 1e-8
CONDITION_LIMIT = 1e13
POLE_TOLERANCE = 1e-13
REMOVABLE_OFFSET = 1e-7
REMOVABLE_RADIUS = 1e-6
BATCH_POLE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class BoundaryVector:
    f0: np.ndarray
    condition: float

    @property
    def empty_probability(self) -> float:
        return float(self.f0.sum())


@dataclass(frozen=True)
class StationarySolution:
    model: ModelSpec
    moments: MomentSet
    roots: RootSet
    boundary: BoundaryVector
    f_one: np.ndarray
    det_m_slope_at_one: float

    @property
    def rho(self) -> float:
        return self.moments.rho

    def f(self, z) -> np.ndarray:
        return evaluate_f(self, z)

    def F(self, z) -> np.ndarray:
        return evaluate_f(self, z).sum(axis=-1)

    def pgf(self, z, epoch: Epoch = Epoch.DEPARTURE) -> np.ndarray:
        return epoch_pgf(self, z, epoch)


# ------------------------
# Building blocks at a point z
# ------------------------
def boundary_kernel(model: ModelSpec, z) -> np.ndarray:
    """B(z) A*(z) - A(z); b(z) = (B A* - A)^T f(0)."""
    z = np.asarray(z, dtype=complex)
    return model.batch.pgf(z)[..., None, None] * arrival_matrix(model, z, exceptional=True) - arrival_matrix(model, z)


def cofactor_row_sums(model: ModelSpec, z) -> np.ndarray:
    """w_j(z) = sum_i r_ji(z), the cofactors of M(z)^T summed over columns; equals adj(M(z)) 1."""
    return adjugate(m_matrix(model, z)).sum(axis=-1)


def root_equation_row(model: ModelSpec, z: complex) -> np.ndarray:
    """Coefficients of f_k(0) in sum_i det L_i(z) = 0."""
    return boundary_kernel(model, z) @ cofactor_row_sums(model, z)


def _slope_matrix(moments: MomentSet) -> np.ndarray:
    """Row-summed M(1)^T with its first row replaced by its z-derivative (1 - alpha_m)."""
    n = moments.P.shape[0]
    matrix = (np.eye(n) - moments.P).T.copy()
    matrix[0, :] = 1.0 - moments.alpha_i
    return matrix


def _boundary_slope_column(moments: MomentSet, k: int) -> np.ndarray:
    """Derivative-determinant column contributed by f_k(0)."""
    column = moments.Pstar[k, :] - moments.P[k, :]
    column = column.copy()
    column[0] = moments.mean_batch + moments.alphastar_i[k] - moments.alpha_i[k]
    return column


def det_m_slope_at_one(moments: MomentSet) -> float:
    """d/dz det M(z)^T at z = 1, which equals d (1 - rho)."""
    return float(np.linalg.det(_slope_matrix(moments)))


def normalization_row(moments: MomentSet) -> np.ndarray:
    """Coefficients of f_k(0) in sum_i d/dz det L_i(z)|_{z=1} = d (1 - rho)."""
    n = moments.P.shape[0]
    base = _slope_matrix(moments)
    row = np.zeros(n)
    for k in range(n):
        column = _boundary_slope_column(moments, k)
        row[k] = sum(np.linalg.det(replace_column(base, i, column)) for i in range(n))
    return row


def normalization_row_by_cofactors(model: ModelSpec, moments: MomentSet, step: float = 1e-6) -> np.ndarray:
    """The same row from r_ji(1) and r'_ji(1), the latter by central differences."""
    w = cofactor_row_sums(model, 1.0).real
    w_prime = ((cofactor_row_sums(model, 1.0 + step) - cofactor_row_sums(model, 1.0 - step)) / (2 * step)).real
    slope = moments.mean_batch * moments.Pstar + moments.alphastar_ij - moments.alpha_ij
    return (moments.Pstar - moments.P) @ w_prime + slope @ w


# ------------------------
# Boundary probabilities
# ------------------------
def boundary_probabilities(model: ModelSpec, moments: MomentSet, roots: RootSet) -> BoundaryVector:
    n = model.N
    rows = []
    for root in roots.roots:
        if root.imag == 0.0:
            rows.append(root_equation_row(model, root).real)
        elif root.imag > 0:
            if not np.any(np.abs(roots.roots - np.conj(root)) < 1e-8):
                raise RootCountMismatch(f"zero {root:.6g} has no conjugate partner")
            coefficients = root_equation_row(model, root)
            rows.append(coefficients.real)
            rows.append(coefficients.imag)
    if len(rows) != n - 1:
        raise SingularBoundarySystem(f"root equations produced {len(rows)} real rows, expected {n - 1}")

    rows.append(normalization_row(moments))
    system = np.array(rows, dtype=float)
    rhs = np.zeros(n)
    rhs[-1] = moments.stationary.d * (1.0 - moments.rho)

    condition = float(np.linalg.cond(system))
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        raise SingularBoundarySystem(f"boundary system is rank-deficient (condition number {condition:.3e})")
    f0 = np.linalg.solve(system, rhs)

    if np.any(f0 < -CLAMP_TOLERANCE):
        raise NegativeBoundaryMass(f"boundary probabilities f(0) = {f0} contain a negative entry")
    f0 = np.where(f0 < 0, 0.0, f0)
    logger.info(f"boundary probabilities f(0) = {np.array2string(f0, precision=10)}, P(X=0) = {f0.sum():.10g}")
    return BoundaryVector(f0=f0, condition=condition)


def f_at_one(moments: MomentSet, boundary: BoundaryVector) -> np.ndarray:
    """f_i(1) as the ratio of derivative determinants at z = 1."""
    n = moments.P.shape[0]
    base = _slope_matrix(moments)
    column = sum(boundary.f0[k] * _boundary_slope_column(moments, k) for k in range(n))
    denominator = moments.stationary.d * (1.0 - moments.rho)
    return np.array([np.linalg.det(replace_column(base, i, column)) / denominator for i in range(n)])


# ------------------------
# Evaluation of f(z)
# ------------------------
def _cramer(model: ModelSpec, f0: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m_t = np.swapaxes(m_matrix(model, z), -1, -2)
    b = np.einsum("...kj,k->...j", boundary_kernel(model, z), f0)
    denominator = np.linalg.det(m_t)
    numerators = np.stack([np.linalg.det(replace_column(m_t, i, b)) for i in range(model.N)], axis=-1)
    return numerators, denominator


def evaluate_f(solution: StationarySolution, z) -> np.ndarray:
    """f_i(z) = det L_i(z) / det M(z)^T for |z| <= 1, with removable points handled by limits."""
    z = np.asarray(z, dtype=complex)
    flat = z.reshape(-1)
    out = np.empty(flat.shape + (solution.model.N,), dtype=complex)

    removable = np.concatenate([solution.roots.roots, [1.0 + 0j]])
    distance = np.min(np.abs(flat[:, None] - removable[None, :]), axis=1) if flat.size else np.array([])
    near = distance < REMOVABLE_RADIUS
    regular = ~near

    if regular.any():
        numerators, denominator = _cramer(solution.model, solution.boundary.f0, flat[regular])
        if np.any(np.abs(denominator) < POLE_TOLERANCE):
            bad = flat[regular][np.abs(denominator) < POLE_TOLERANCE][0]
            raise EvalAtPole(f"det M(z)^T vanishes at z = {bad:.6g}, which is not a known removable point")
        out[regular] = numerators / denominator[:, None]

    for idx in np.nonzero(near)[0]:
        point = flat[idx]
        if abs(point - 1.0) < 1e-15:
            out[idx] = solution.f_one
            continue
        direction = point / abs(point) if abs(point) > 0 else 1.0
        first = point - REMOVABLE_OFFSET * direction
        second = point - 2 * REMOVABLE_OFFSET * direction
        numerators, denominator = _cramer(solution.model, solution.boundary.f0, np.array([first, second]))
        values = numerators / denominator[:, None]
        out[idx] = 2 * values[0] - values[1]

    return out.reshape(z.shape + (solution.model.N,))


def _batch_arrival_pgf(solution: StationarySolution, z: np.ndarray) -> np.ndarray:
    batch = solution.model.batch
    F = evaluate_f(solution, z).sum(axis=-1)
    return F * batch.mean() * (1.0 - z) / (1.0 - batch.pgf(z))


def epoch_pgf(solution: StationarySolution, z, epoch: Epoch = Epoch.DEPARTURE) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    epoch = Epoch(epoch)
    if epoch in (Epoch.DEPARTURE, Epoch.CUSTOMER_ARRIVAL):
        return evaluate_f(solution, z).sum(axis=-1)

    flat = z.reshape(-1)
    out = np.empty(flat.shape, dtype=complex)
    at_one = np.abs(flat - 1.0) < 1e-15
    # B(z) = 1 away from z = 1 happens on the unit circle for periodic batch laws; F vanishes there too
    removable = ~at_one & (np.abs(1.0 - solution.model.batch.pgf(flat)) < BATCH_POLE_TOLERANCE)
    regular = ~at_one & ~removable

    out[at_one] = 1.0
    if regular.any():
        out[regular] = _batch_arrival_pgf(solution, flat[regular])
    for idx in np.nonzero(removable)[0]:
        point = flat[idx]
        direction = point / abs(point)
        values = _batch_arrival_pgf(solution, point - REMOVABLE_OFFSET * direction * np.array([1.0, 2.0]))
        out[idx] = 2 * values[0] - values[1]
    return out.reshape(z.shape)


# ------------------------
# Entry point
# ------------------------
def solve(model: ModelSpec) -> StationarySolution:
    moments = moment_set(model)
    if moments.rho >= 1.0:
        raise UnstableModelError(f"stability needs rho < 1, got rho = {moments.rho:.12g}")
    logger.info(f"solving N={model.N} model at lambda={model.lam:.6g}, rho={moments.rho:.6g}")

    roots = find_unit_disk_roots(model)
    boundary = boundary_probabilities(model, moments, roots)
    f_one = f_at_one(moments, boundary)
    slope = det_m_slope_at_one(moments)
    return StationarySolution(
        model=model,
        moments=moments,
        roots=roots,
        boundary=boundary,
        f_one=f_one,
        det_m_slope_at_one=slope,
    )


def numerator_at_roots(solution: StationarySolution) -> np.ndarray:
    """|sum_i det L_i| at the zeros of det M; vanishes when F is analytic inside the disk."""
    if solution.roots.roots.size == 0:
        return np.array([])
    numerators, _ = _cramer(solution.model, solution.boundary.f0, solution.roots.roots)
    return np.abs(numerators.sum(axis=-1))


__all__ = [
    "BoundaryVector",
    "StationarySolution",
    "boundary_probabilities",
    "det_m",
    "det_m_slope_at_one",
    "epoch_pgf",
    "evaluate_f",
    "f_at_one",
    "normalization_row",
    "normalization_row_by_cofactors",
    "numerator_at_roots",
    "root_equation_row",
    "solve",
]
