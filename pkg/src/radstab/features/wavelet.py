"""Single-level undecimated 3D Haar decomposition with periodic extension."""
from __future__ import annotations

import itertools
import math

import numpy as np

from ..volume import Volume

_R = 1.0 / math.sqrt(2.0)
# y[n] = f[0] * x[n] + f[1] * x[n + 1]  (indices taken modulo the axis length)
FILTERS = {"L": (_R, _R), "H": (-_R, _R)}

# letters give the filter along x, y, z in that order
SUBBANDS = tuple("".join(c) for c in itertools.product("LH", repeat=3))


def filter_axis(arr, f, axis):
    return f[0] * arr + f[1] * np.roll(arr, -1, axis=axis)


def subband_arrays(arr):
    """All 8 subbands of a ``(nz, ny, nx)`` array, keyed by name."""
    arr = np.asarray(arr, dtype=np.float64)
    stage = {"": arr}
    for axis in (2, 1, 0):  # x, then y, then z
        stage = {name + c: filter_axis(a, FILTERS[c], axis)
                 for name, a in stage.items() for c in "LH"}
    return {name: stage[name] for name in SUBBANDS}


def wavelet_subbands(v):
    return {name: Volume(a, v.spacing, v.origin) for name, a in subband_arrays(v.array).items()}
