"""
Inverse-mapped bilinear sampling of a small patch into a larger raster.
"""
import numpy as np
import scipy.sparse


def patch_sampling_matrix(coords: np.ndarray, height: int, width: int) -> tuple[scipy.sparse.csr_matrix, np.ndarray]:
    """
    Bilinear weights that pull patch pixels onto target pixels.

    Args:
        coords: (N, 2) source positions (u, v) of N target pixels, in patch
            pixels relative to the patch centre pixel ((w-1)/2, (h-1)/2)
        height, width: patch extent

    Returns:
        (matrix, mask): matrix is (N, height*width) with one row per target
        pixel, zero for pixels the patch does not cover; mask flags covered rows
    """
    u, v = coords[:, 0], coords[:, 1]
    mask = (u >= -width / 2) & (u < width / 2) & (v >= -height / 2) & (v < height / 2)
    rows = np.nonzero(mask)[0]

    fx = np.clip(u[rows] + (width - 1) / 2, 0, width - 1)
    fy = np.clip(v[rows] + (height - 1) / 2, 0, height - 1)
    x0 = np.floor(fx).astype(int)
    y0 = np.floor(fy).astype(int)
    x1 = np.minimum(x0 + 1, width - 1)
    y1 = np.minimum(y0 + 1, height - 1)
    wx = fx - x0
    wy = fy - y0

    corner_cols = [y0 * width + x0, y0 * width + x1, y1 * width + x0, y1 * width + x1]
    corner_weights = [(1 - wx) * (1 - wy), wx * (1 - wy), (1 - wx) * wy, wx * wy]
    matrix = scipy.sparse.csr_matrix(
        (np.concatenate(corner_weights), (np.tile(rows, 4), np.concatenate(corner_cols))),
        shape=(coords.shape[0], height * width),
    )
    return matrix, mask
