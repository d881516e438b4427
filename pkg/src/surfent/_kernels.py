"""Compiled inner loops."""

import numpy as np
from numba import njit

PERIODIC, PLUS, MINUS, FREE = 0, 1, 2, 3


@njit(cache=True)
def heat_bath_sweeps(spins, uniforms, p_plus, boundary):
    """Raster-order heat-bath sweeps over ``spins`` (int8, +-1) in place.

    ``uniforms`` has shape ``(n_sweeps, H, W)``; ``p_plus[s + 4]`` is the
    probability of ``+1`` given neighbor sum ``s``.
    """
    H, W = spins.shape
    if boundary == PLUS:
        outside = 1
    elif boundary == MINUS:
        outside = -1
    else:
        outside = 0
    for k in range(uniforms.shape[0]):
        for y in range(H):
            for x in range(W):
                if boundary == PERIODIC:
                    s = (
                        spins[(y - 1) % H, x]
                        + spins[(y + 1) % H, x]
                        + spins[y, (x - 1) % W]
                        + spins[y, (x + 1) % W]
                    )
                else:
                    s = 0
                    s += spins[y - 1, x] if y > 0 else outside
                    s += spins[y + 1, x] if y < H - 1 else outside
                    s += spins[y, x - 1] if x > 0 else outside
                    s += spins[y, x + 1] if x < W - 1 else outside
                spins[y, x] = 1 if uniforms[k, y, x] < p_plus[s + 4] else -1
    return spins


def warm_up():
    heat_bath_sweeps(np.ones((2, 2), np.int8), np.zeros((1, 2, 2)), np.full(9, 0.5), PERIODIC)
