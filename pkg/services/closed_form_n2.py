"""Explicit two-type solution, kept independent of the general determinant solver for cross-checks."""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from models.model_spec import ModelSpec
from services.errors import NotN2, RootCountMismatch, UnstableModelError
from services.queue_model import MomentSet, arrival_matrix, moment_set

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class N2ClosedForm:
    model: ModelSpec
    moments: MomentSet
    root: float
    R: np.ndarray
    f0: np.ndarray

    def _parts(self, z):
        z = np.asarray(z, dtype=complex)
        A = arrival_matrix(self.model, z)
        Astar = arrival_matrix(self.model, z, exceptional=True)
        B = self.model.batch.pgf(z)
        # c_j = sum_i (B A*_ij - A_ij) f_i(0)
        c = np.einsum("...ij,i->...j", B[..., None, None] * Astar - A, self.f0)
        denominator = (z - A[..., 0, 0]) * (z - A[..., 1, 1]) - A[..., 0, 1] * A[..., 1, 0]
        return z, A, c, denominator

    def f(self, z) -> np.ndarray:
        z, A, c, denominator = self._parts(z)
        f1 = ((z - A[..., 1, 1]) * c[..., 0] + A[..., 1, 0] * c[..., 1]) / denominator
        f2 = ((z - A[..., 0, 0]) * c[..., 1] + A[..., 0, 1] * c[..., 0]) / denominator
        return np.stack([f1, f2], axis=-1)

    def F(self, z) -> np.ndarray:
        z, A, c, denominator = self._parts(z)
        numerator = (z + A[..., 0, 1] - A[..., 1, 1]) * c[..., 0] + (z + A[..., 1, 0] - A[..., 0, 0]) * c[..., 1]
        return numerator / denominator

    def f_at_one(self) -> np.ndarray:
        m = self.moments
        P, Pstar = m.P, m.Pstar
        alpha, alphastar = m.alpha_i, m.alphastar_i
        slope = m.mean_batch + alphastar - alpha
        scale = (P[0, 1] + P[1, 0]) * (1.0 - m.rho)
        f1 = np.sum((P[1, 0] * slope + (1 - alpha[1]) * (Pstar[:, 0] - P[:, 0])) * self.f0) / scale
        f2 = np.sum((P[0, 1] * slope + (1 - alpha[0]) * (Pstar[:, 1] - P[:, 1])) * self.f0) / scale
        return np.array([f1, f2])


def _interior_root(model: ModelSpec) -> float:
    def det_real(x: float) -> float:
        A = arrival_matrix(model, x)
        return float(((x - A[0, 0]) * (x - A[1, 1]) - A[0, 1] * A[1, 0]).real)

    # det > 0 at z = -1 and det < 0 just below z = 1 when rho < 1
    lower, upper = -1.0, 1.0 - 1e-6
    if det_real(lower) * det_real(upper) > 0:
        raise RootCountMismatch("no sign change of det M on the real segment [-1, 1)")
    return brentq(det_real, lower, upper, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def n2_closed_form(model: ModelSpec) -> N2ClosedForm:
    if model.N != 2:
        raise NotN2(model.N)
    moments = moment_set(model)
    if moments.rho >= 1.0:
        raise UnstableModelError(f"stability needs rho < 1, got rho = {moments.rho:.12g}")

    root = _interior_root(model)
    A = arrival_matrix(model, root).real
    Astar = arrival_matrix(model, root, exceptional=True).real
    B = float(model.batch.pgf(root).real)
    kernel = B * Astar - A
    P, Pstar = moments.P, moments.Pstar
    alpha, alphastar = moments.alpha_i, moments.alphastar_i
    p12_p21 = P[0, 1] + P[1, 0]

    R = np.empty((2, 2))
    for j in range(2):
        R[0, j] = (root + A[0, 1] - A[1, 1]) * kernel[j, 0] + (root + A[1, 0] - A[0, 0]) * kernel[j, 1]
        R[1, j] = p12_p21 * (moments.mean_batch + alphastar[j] - alpha[j]) + (alpha[0] - alpha[1]) * (
            Pstar[j, 0] - P[j, 0]
        )
    det_R = np.linalg.det(R)
    c = p12_p21 * (1.0 - moments.rho)
    f0 = np.array([-c * R[0, 1] / det_R, c * R[0, 0] / det_R])
    logger.info(f"two-type closed form: interior zero {root:.12g}, f(0) = {f0}")
    return N2ClosedForm(model=model, moments=moments, root=root, R=R, f0=f0)
