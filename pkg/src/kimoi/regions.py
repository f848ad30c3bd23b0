"""Facial region index sets for the 68-point Multi-PIE landmark layout.

Index ranges: jaw 0-16, left eyebrow 17-21, right eyebrow 22-26,
nose 27-35 (bridge 27-30 with tip at 30, base 31-35), left eye 36-41,
right eye 42-47, mouth 48-67 (outer lip 48-59, inner lip 60-67).
"Left"/"right" are the viewer's left/right.
"""

from dataclasses import dataclass, field

from .errors import InvalidInputError

N_LANDMARKS = 68
NOSE_TIP = 30
SCHEME = "multipie68"


@dataclass(frozen=True)
class FaceRegion:
    """A named, disjoint set of landmark indices."""

    name: str
    indices: tuple[int, ...] = field(repr=False)

    def __post_init__(self):
        if any(i < 0 or i >= N_LANDMARKS for i in self.indices):
            raise ValueError(f"region {self.name!r} has indices outside 0..{N_LANDMARKS - 1}")


JAWLINE = FaceRegion("jawline", tuple(range(0, 17)))
LEFT_EYEBROW = FaceRegion("left_eyebrow", tuple(range(17, 22)))
RIGHT_EYEBROW = FaceRegion("right_eyebrow", tuple(range(22, 27)))
NOSE = FaceRegion("nose", tuple(range(27, 36)))
LEFT_EYE = FaceRegion("left_eye", tuple(range(36, 42)))
RIGHT_EYE = FaceRegion("right_eye", tuple(range(42, 48)))
MOUTH = FaceRegion("mouth", tuple(range(48, 68)))

ALL_REGIONS = (JAWLINE, LEFT_EYEBROW, RIGHT_EYEBROW, NOSE, LEFT_EYE, RIGHT_EYE, MOUTH)
REGIONS_BY_NAME = {r.name: r for r in ALL_REGIONS}

# Inner-face sampling units. Eyes and eyebrows move as mirrored pairs, so the
# left/right halves are always selected together; the jawline is never a unit.
INNER_REGION_GROUPS: dict[str, tuple[FaceRegion, ...]] = {
    "eyebrows": (LEFT_EYEBROW, RIGHT_EYEBROW),
    "eyes": (LEFT_EYE, RIGHT_EYE),
    "nose": (NOSE,),
    "mouth": (MOUTH,),
}

# Landmarks driving the non-rigid motion score and the emphasised loss weights.
NONRIGID_INDICES = tuple(sorted(LEFT_EYE.indices + RIGHT_EYE.indices + MOUTH.indices))


def region_indices(regions) -> tuple[int, ...]:
    """Sorted union of indices over an iterable of FaceRegion."""
    out: set[int] = set()
    for r in regions:
        out.update(r.indices)
    return tuple(sorted(out))


def inner_group_indices(names) -> tuple[int, ...]:
    """Sorted union of landmark indices for inner-region group names."""
    members: list[FaceRegion] = []
    for name in names:
        try:
            members.extend(INNER_REGION_GROUPS[name])
        except KeyError:
            raise InvalidInputError(
                f"unknown inner region {name!r}; expected one of {list(INNER_REGION_GROUPS)}"
            ) from None
    return region_indices(members)
