"""Built-in Lie-Poisson model systems."""

from .base import LPSystem
from .manakov import Manakov
from .quadratic import RandomQuadratic, skew_basis
from .rigid_body import RigidBody
from .vortices import PointVortices
from .zeitlin import ZeitlinEuler

MODEL_REGISTRY = {
    RigidBody.name: RigidBody,
    Manakov.name: Manakov,
    PointVortices.name: PointVortices,
    ZeitlinEuler.name: ZeitlinEuler,
}

__all__ = [
    "LPSystem",
    "Manakov",
    "MODEL_REGISTRY",
    "PointVortices",
    "RandomQuadratic",
    "RigidBody",
    "ZeitlinEuler",
    "skew_basis",
]
