import functools

import numpy as np
import pytest

from willmore.gallery import GENERATORS

# below this a residual is round-off and has no refinement ratio
FLOOR = 1e-9


@functools.lru_cache(maxsize=None)
def surface(name, res, **params):
    return GENERATORS[name](res=res, **params)


def second_order(values, lo=3.0, hi=5.0, floor=FLOOR):
    """True if successive halvings shrink ``values`` by a factor in [lo, hi] (or stay below floor).

    ``floor`` is a number or one value per entry of ``values``.
    """
    floors = list(floor) if np.iterable(floor) else [floor] * len(values)
    for (a, fa), (b, fb) in zip(zip(values, floors), list(zip(values, floors))[1:]):
        if a <= fa and b <= fb:
            continue
        if a <= fa:
            return False
        if not lo <= a / max(b, 1e-300) <= hi:
            return False
    return True


@pytest.fixture
def rng():
    return np.random.default_rng(20261017)
