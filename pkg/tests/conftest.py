import math
from fractions import Fraction

import numpy as np
import pytest

from weierdim.core import KernelFunction

LAM0 = 0.7


def degenerate_kernel(lam0=LAM0):
    """``lam0 cos(4 pi x) - cos(2 pi x)``: the lacunary sum at t = 1 vanishes at lam0."""
    return KernelFunction.from_coefficients([{1: -0.5, 2: lam0 / 2}])


def mixed_kernel(lam0=LAM0):
    """``(cos 2 pi x, lam0 cos 4 pi x - cos 2 pi x)``."""
    return KernelFunction.from_coefficients([{1: 0.5}, {1: -0.5, 2: lam0 / 2}])


def w0_kernel():
    """``cos 2 pi x + 0.3 sin 4 pi x``."""
    return KernelFunction.from_coefficients([{1: 0.5, 2: -0.15j}])


def telescoping_kernel(lam, b=2):
    w0 = w0_kernel()
    return w0 + w0.dilated(b).scaled(-lam)


def w0_value(x):
    return math.cos(2 * math.pi * x) + 0.3 * math.sin(4 * math.pi * x)


def frac_mul(x: Fraction, b: int, n: int) -> Fraction:
    y = x * b**n
    return y - (y.numerator // y.denominator)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
