"""Catalog of built-in scenarios."""

from dataclasses import dataclass, field

from contact_hybrid.scenarios.ball import BallCeiling, BallFloor
from contact_hybrid.scenarios.base import ScenarioBuilder
from contact_hybrid.scenarios.hexapod import PlanarHexapod
from contact_hybrid.scenarios.ptex import PtexA, PtexB, PtexC, PtexD
from contact_hybrid.scenarios.rocking_block import RockingBlock
from contact_hybrid.scenarios.sliding_point import SlidingPoint


@dataclass
class CatalogEntry:
    """A scenario shipped with the package."""

    id: str
    builder: type[ScenarioBuilder]
    description: str
    massless: bool = False
    sweepable: tuple[str, ...] = field(default_factory=tuple)


KNOWN_SCENARIOS: list[CatalogEntry] = [
    # Curved constraint through the origin
    CatalogEntry(id="ptex_a", builder=PtexA, description=PtexA.description),
    CatalogEntry(id="ptex_b", builder=PtexB, description=PtexB.description),
    CatalogEntry(id="ptex_c", builder=PtexC, description=PtexC.description),
    CatalogEntry(id="ptex_d", builder=PtexD, description=PtexD.description),
    # Point mass
    CatalogEntry(
        id="ball_floor",
        builder=BallFloor,
        description=BallFloor.description,
        sweepable=("height", "vx"),
    ),
    CatalogEntry(
        id="ball_ceiling",
        builder=BallCeiling,
        description=BallCeiling.description,
        sweepable=("speed",),
    ),
    CatalogEntry(
        id="sliding_point",
        builder=SlidingPoint,
        description=SlidingPoint.description,
        sweepable=("speed", "slope_deg"),
    ),
    # Rigid bodies
    CatalogEntry(
        id="rocking_block",
        builder=RockingBlock,
        description=RockingBlock.description,
        sweepable=("impact_speed", "tilt", "mu"),
    ),
    CatalogEntry(
        id="planar_hexapod",
        builder=PlanarHexapod,
        description=PlanarHexapod.description,
        massless=True,
        sweepable=("kappa_p", "mu"),
    ),
]


def get_entry(scenario_id: str) -> CatalogEntry:
    """Look up a catalog entry by id.

    Raises:
        KeyError: If no scenario with that id exists.
    """
    for entry in KNOWN_SCENARIOS:
        if entry.id == scenario_id:
            return entry
    raise KeyError(scenario_id)


def catalog_ids() -> list[str]:
    return [entry.id for entry in KNOWN_SCENARIOS]
