"""Compensated (Neumaier) summation with a fixed reduction order."""

from __future__ import annotations

from typing import Iterable

import numba
import numpy as np


class NeumaierSum:
    """Running sum carrying an explicit rounding-error term."""

    __slots__ = ("_s", "_c")

    def __init__(self, start: float = 0.0):
        self._s = float(start)
        self._c = 0.0

    def add(self, x: float) -> None:
        x = float(x)
        t = self._s + x
        if abs(self._s) >= abs(x):
            self._c += (self._s - t) + x
        else:
            self._c += (x - t) + self._s
        self._s = t

    def extend(self, xs: Iterable[float]) -> None:
        for x in xs:
            self.add(x)

    @property
    def value(self) -> float:
        return self._s + self._c


def neumaier(xs: Iterable[float]) -> float:
    acc = NeumaierSum()
    acc.extend(xs)
    return acc.value


@numba.njit(cache=True)
def neumaier_array(xs):
    s = 0.0
    c = 0.0
    for i in range(xs.shape[0]):
        x = xs[i]
        t = s + x
        if abs(s) >= abs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        s = t
    return s + c


def fsum_array(xs: np.ndarray) -> float:
    """Compensated sum of a 1-d float array in index order."""
    return float(neumaier_array(np.ascontiguousarray(xs, dtype=np.float64)))
