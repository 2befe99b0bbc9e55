import numpy as np
import pytest

from recirc.config import build_scenario, preset_path, validate
from recirc.mesh import build_rect_mesh
from recirc.space import MixedSpace


@pytest.fixture(scope="session")
def space8():
    return MixedSpace(build_rect_mesh(1.0, 1.0, 8, 8))


@pytest.fixture(scope="session")
def preset16():
    """The shipped 4-pump scenario: 16^2 mesh, 20 modes, mollified profiles."""
    return build_scenario(validate(preset_path("four_pumps")))


def divfree_samples(space, count, seed=0):
    """Random discretely divergence-free boundary-zero fields (Leray projections)."""
    from recirc.fullspace import FullSpaceSystem
    from recirc.turbulence import ClosureParams

    fs = FullSpaceSystem(space, ClosureParams(1.0, 0.0))
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        w = rng.standard_normal(space.n_velocity)
        out.append(fs.project_divfree(w))
    return out
