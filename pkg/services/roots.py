"""Zeros of det M(z) inside the unit disk.

The total count is fixed by the argument principle on |z| = 1 - 1e-6, applied to
det M(z) / (z - 1) so the zero at z = 1 and the one just outside it near 1/rho
cannot alias into a single sampled phase step. The disk is then subdivided
(inner disk plus annular sectors) with a winding count per cell, and every
cell holding one zero is finished by Newton's method with the derivative of
the determinant taken from Jacobi's formula.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from models.model_spec import ModelSpec
from services.errors import NearUnitRoot, RootCountMismatch, UnstableModelError
from services.linalg import adjugate
from services.queue_model import arrival_matrix, arrival_matrix_derivative, moment_set

logger = logging.getLogger(__name__)

CONTOUR_RADIUS = 1.0 - 1e-6
UNIT_MARGIN = 1e-9
RESIDUAL_TOLERANCE = 1e-10
MIN_CELL_DIAMETER = 1e-9
MAX_PHASE_STEP = 0.5
EDGE_SAMPLES = 64

# (angular offset, radial split fraction, angular split fraction) per attempt
LAYOUTS = ((0.3, 0.47, 0.53), (0.7, 0.41, 0.59), (1.1, 0.55, 0.45))


# ------------------------
# Determinant and derivative
# ------------------------
def m_matrix(model: ModelSpec, z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return z[..., None, None] * np.eye(model.N) - arrival_matrix(model, z)


def det_m(model: ModelSpec, z) -> np.ndarray:
    """det M(z)^T = det(z I - A(z))."""
    return np.linalg.det(m_matrix(model, z))


def reduced_det_m(model: ModelSpec, z) -> np.ndarray:
    """det M(z) / (z - 1): same zeros inside the disk, without the one pinned to z = 1."""
    z = np.asarray(z, dtype=complex)
    return det_m(model, z) / (z - 1.0)


def det_m_derivative(model: ModelSpec, z) -> np.ndarray:
    """Jacobi's formula: d/dz det M = tr(adj(M) M')."""
    z = np.asarray(z, dtype=complex)
    m_prime = np.eye(model.N) - arrival_matrix_derivative(model, z)
    return np.einsum("...ij,...ji->...", adjugate(m_matrix(model, z)), m_prime)


# ------------------------
# Contours and cells
# ------------------------
class _ContourTooClose(Exception):
    pass


def _arc(radius, a0, a1):
    return lambda t: radius * np.exp(1j * (a0 + t * (a1 - a0)))


def _segment(z0, z1):
    return lambda t: z0 + t * (z1 - z0)


def _edge_phase(f, path) -> float:
    t = np.linspace(0.0, 1.0, EDGE_SAMPLES + 1)
    values = f(path(t))
    for _ in range(80):
        if not np.all(np.isfinite(values)) or np.any(values == 0):
            raise _ContourTooClose()
        steps = np.angle(values[1:] / values[:-1])
        bad = np.abs(steps) > MAX_PHASE_STEP
        if not bad.any():
            return float(steps.sum())
        idx = np.nonzero(bad)[0]
        if np.min(t[idx + 1] - t[idx]) < 1e-15:
            raise _ContourTooClose()
        mids = 0.5 * (t[idx] + t[idx + 1])
        t = np.insert(t, idx + 1, mids)
        values = np.insert(values, idx + 1, f(path(mids)))
    raise _ContourTooClose()


def winding_number(f, edges) -> int:
    total = sum(_edge_phase(f, edge) for edge in edges)
    count = total / (2 * math.pi)
    rounded = int(round(count))
    if abs(count - rounded) > 1e-3:
        raise _ContourTooClose()
    return rounded


@dataclass(frozen=True)
class DiskCell:
    radius: float

    def edges(self, layout):
        offset = layout[0]
        return [_arc(self.radius, offset, offset + 2 * math.pi)]

    def center(self) -> complex:
        return 0j

    def contains(self, z: complex) -> bool:
        return abs(z) <= self.radius * (1 + 1e-12)

    def diameter(self) -> float:
        return 2 * self.radius

    def children(self, layout):
        offset = layout[0]
        inner = 0.5 * self.radius
        quarter = 0.5 * math.pi
        return [DiskCell(inner)] + [
            SectorCell(inner, self.radius, offset + k * quarter, offset + (k + 1) * quarter) for k in range(4)
        ]


@dataclass(frozen=True)
class SectorCell:
    r0: float
    r1: float
    a0: float
    a1: float

    def edges(self, layout):
        e0, e1 = np.exp(1j * self.a0), np.exp(1j * self.a1)
        return [
            _segment(self.r0 * e0, self.r1 * e0),
            _arc(self.r1, self.a0, self.a1),
            _segment(self.r1 * e1, self.r0 * e1),
            _arc(self.r0, self.a1, self.a0),
        ]

    def center(self) -> complex:
        return 0.5 * (self.r0 + self.r1) * np.exp(0.5j * (self.a0 + self.a1))

    def contains(self, z: complex) -> bool:
        r = abs(z)
        slack = 1e-12
        if r < self.r0 * (1 - slack) or r > self.r1 * (1 + slack):
            return False
        angle = (np.angle(z) - self.a0) % (2 * math.pi)
        return angle <= (self.a1 - self.a0) + slack

    def diameter(self) -> float:
        return max(self.r1 - self.r0, self.r1 * (self.a1 - self.a0))

    def children(self, layout):
        _, fr, fa = layout
        rm = self.r0 + fr * (self.r1 - self.r0)
        am = self.a0 + fa * (self.a1 - self.a0)
        return [
            SectorCell(self.r0, rm, self.a0, am),
            SectorCell(rm, self.r1, self.a0, am),
            SectorCell(self.r0, rm, am, self.a1),
            SectorCell(rm, self.r1, am, self.a1),
        ]


# ------------------------
# Root search
# ------------------------
@dataclass(frozen=True)
class RootSet:
    roots: np.ndarray
    residual: float
    contour_count: int
    multiplicities: list = field(default_factory=list)


def _newton(model: ModelSpec, z0: complex, max_iter: int = 60) -> complex | None:
    z = complex(z0)
    for _ in range(max_iter):
        value = complex(det_m(model, z))
        slope = complex(det_m_derivative(model, z))
        if slope == 0:
            return None
        step = value / slope
        z -= step
        if abs(z) > 1.0 or not np.isfinite(z):
            return None
        if abs(step) < 1e-15 * max(1.0, abs(z)):
            return z
    return z if abs(complex(det_m(model, z))) < RESIDUAL_TOLERANCE else None


def _polish_real(model: ModelSpec, z: complex) -> complex:
    if abs(z.imag) > 1e-8:
        return z
    x = z.real
    for _ in range(8):
        value = det_m(model, x).real
        slope = det_m_derivative(model, x).real
        if slope == 0:
            break
        step = value / slope
        x -= step
        if abs(step) < 1e-16:
            break
    return complex(x, 0.0)


def _count(f, cell, layout) -> int:
    return winding_number(f, cell.edges(layout))


def _children_with_counts(f, cell, expected, layout_index):
    for attempt in range(len(LAYOUTS)):
        layout = LAYOUTS[(layout_index + attempt) % len(LAYOUTS)]
        children = cell.children(layout)
        try:
            counts = [_count(f, child, layout) for child in children]
        except _ContourTooClose:
            logger.debug(f"contour passes too close to a zero in {cell}; trying another layout")
            continue
        if sum(counts) == expected:
            return list(zip(children, counts)), (layout_index + attempt) % len(LAYOUTS)
    raise RootCountMismatch(f"could not split cell {cell} holding {expected} zeros into consistent sub-cells")


def _search(model, f, cell, count, layout_index, found, depth=0):
    if count == 0:
        return
    if count == 1:
        z = _newton(model, cell.center())
        if z is not None and cell.contains(z):
            found.append(z)
            return
    if cell.diameter() < MIN_CELL_DIAMETER or depth > 80:
        raise RootCountMismatch(f"{count} zeros cannot be separated near {cell.center():.6g}; multiple root suspected")
    logger.debug(f"subdividing cell at depth {depth} holding {count} zeros")
    children, layout_index = _children_with_counts(f, cell, count, layout_index)
    for child, child_count in children:
        _search(model, f, child, child_count, layout_index, found, depth + 1)


def find_unit_disk_roots(model: ModelSpec) -> RootSet:
    rho = moment_set(model).rho
    if rho >= 1 - 1e-6:
        raise UnstableModelError(f"root search needs rho < 1 - 1e-6, got rho = {rho:.12g}")

    expected = model.N - 1
    f = lambda z: reduced_det_m(model, z)  # noqa: E731
    outer = DiskCell(CONTOUR_RADIUS)

    total = None
    for layout in LAYOUTS:
        try:
            total = _count(f, outer, layout)
            break
        except _ContourTooClose:
            continue
    if total is None or total != expected:
        raise RootCountMismatch(f"argument principle counts {total} zeros inside |z|<1, expected N-1 = {expected}")
    if expected == 0:
        return RootSet(roots=np.array([], dtype=complex), residual=0.0, contour_count=0, multiplicities=[])

    found: list[complex] = []
    _search(model, f, outer, total, 0, found)
    roots = np.array(sorted((_polish_real(model, z) for z in found), key=lambda z: (z.real, z.imag)))

    if len(roots) != expected:
        raise RootCountMismatch(f"located {len(roots)} zeros, expected {expected}")
    for a in range(len(roots)):
        for b in range(a + 1, len(roots)):
            if abs(roots[a] - roots[b]) < 1e-7:
                raise RootCountMismatch(f"zeros {roots[a]:.6g} and {roots[b]:.6g} coincide")
    if np.any(np.abs(roots) > 1 - UNIT_MARGIN):
        raise NearUnitRoot(f"zero within {UNIT_MARGIN} of the unit circle: {roots}")

    residual = float(np.max(np.abs(det_m(model, roots))))
    if residual > RESIDUAL_TOLERANCE:
        raise RootCountMismatch(f"polished zeros leave |det M| = {residual:.3e}")
    logger.info(f"found {expected} zeros of det M inside the unit disk (residual {residual:.2e})")
    return RootSet(roots=roots, residual=residual, contour_count=total, multiplicities=[1] * expected)
