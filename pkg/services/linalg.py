import numpy as np


def minor_det(matrix: np.ndarray, row: int, col: int) -> np.ndarray:
    """Determinant of `matrix` with one row and one column removed; works on stacks (..., n, n)."""
    n = matrix.shape[-1]
    if n == 1:
        return np.ones(matrix.shape[:-2], dtype=matrix.dtype)
    rows = [r for r in range(n) if r != row]
    cols = [c for c in range(n) if c != col]
    sub = matrix[..., rows, :][..., :, cols]
    return np.linalg.det(sub)


def cofactor(matrix: np.ndarray, row: int, col: int) -> np.ndarray:
    return (-1) ** (row + col) * minor_det(matrix, row, col)


def cofactor_matrix(matrix: np.ndarray) -> np.ndarray:
    """C[..., i, j] = cofactor of entry (i, j); adj(M) is its transpose."""
    n = matrix.shape[-1]
    out = np.empty(matrix.shape, dtype=np.result_type(matrix.dtype, float))
    for i in range(n):
        for j in range(n):
            out[..., i, j] = cofactor(matrix, i, j)
    return out


def adjugate(matrix: np.ndarray) -> np.ndarray:
    return np.swapaxes(cofactor_matrix(matrix), -1, -2)


def replace_column(matrix: np.ndarray, col: int, column: np.ndarray) -> np.ndarray:
    column = np.asarray(column)
    out = np.array(matrix, dtype=np.result_type(matrix, column), copy=True)
    out[..., :, col] = column
    return out
