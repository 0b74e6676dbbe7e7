import numpy as np
import pytest

from twinflow.md import Box, ForceField, SystemState
from twinflow.md.state import FLUID, WALL_BOTTOM


@pytest.fixture
def ff():
    return ForceField()


def make_state(positions, momenta=None, species=None, anchors=None,
               box_lengths=(50.0, 50.0, 50.0), periodic=(True, True, False)):
    """Hand-built state for small analytic setups."""
    positions = np.atleast_2d(np.asarray(positions, dtype=np.float64))
    n = positions.shape[0]
    if momenta is None:
        momenta = np.zeros_like(positions)
    else:
        momenta = np.atleast_2d(np.asarray(momenta, dtype=np.float64))
    if species is None:
        species = np.full(n, FLUID, dtype=np.int8)
    else:
        species = np.asarray(species, dtype=np.int8)
    if anchors is None:
        anchors = np.zeros_like(positions)
    else:
        anchors = np.atleast_2d(np.asarray(anchors, dtype=np.float64))
    box = Box(np.asarray(box_lengths, dtype=np.float64), periodic=periodic)
    return SystemState(positions=positions, momenta=momenta, species=species,
                       anchors=anchors, box=box)


def single_wall_particle(position, anchor, momentum=(0.0, 0.0, 0.0)):
    return make_state([position], momenta=[momentum],
                      species=[WALL_BOTTOM], anchors=[anchor])
