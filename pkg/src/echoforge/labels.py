"""The 30-class label space: 5 grasping poses x 6 microgestures each."""

from __future__ import annotations

from dataclasses import dataclass

GRASPS = ("Cylindrical", "Spherical", "Palmar", "Tip", "Hook")

GESTURES_BY_GRASP = {
    "Cylindrical": ("Hold", "PointerIn", "PointerTap", "MiddleTap", "WristRight", "WristLeft"),
    "Spherical": ("Hold", "PointerIn", "PointerTap", "MiddleTap", "TwoFingerTap", "WristUp"),
    "Palmar": ("Hold", "ThumbTap", "ThumbIn", "ThumbDown", "PointerIn", "WristTap"),
    "Tip": ("Hold", "ThumbTap", "ThumbRight", "PinkyOut", "WristLeft", "WristRight"),
    "Hook": ("Hold", "ThumbTap", "ThumbLeft", "ThumbIn", "PointerIn", "Rotate"),
}

GESTURES_PER_GRASP = 6
N_CLASSES = len(GRASPS) * GESTURES_PER_GRASP  # 30


@dataclass(frozen=True, order=True)
class GestureLabel:
    """One microgesture within a grasping pose; class_index is bijective with
    (grasp, gesture): class_index = 6 * grasp_index + gesture_index."""

    grasp: str
    gesture: str

    def __post_init__(self) -> None:
        if self.grasp not in GESTURES_BY_GRASP:
            raise ValueError(f"unknown grasp {self.grasp!r}; expected one of {GRASPS}")
        if self.gesture not in GESTURES_BY_GRASP[self.grasp]:
            raise ValueError(
                f"unknown gesture {self.gesture!r} for grasp {self.grasp}; "
                f"expected one of {GESTURES_BY_GRASP[self.grasp]}"
            )

    @property
    def class_index(self) -> int:
        return GRASPS.index(self.grasp) * GESTURES_PER_GRASP + GESTURES_BY_GRASP[
            self.grasp
        ].index(self.gesture)

    @classmethod
    def from_class_index(cls, index: int) -> "GestureLabel":
        if not 0 <= index < N_CLASSES:
            raise ValueError(f"class index {index} outside [0, {N_CLASSES})")
        grasp = GRASPS[index // GESTURES_PER_GRASP]
        return cls(grasp, GESTURES_BY_GRASP[grasp][index % GESTURES_PER_GRASP])

    def __str__(self) -> str:
        return f"{self.grasp}/{self.gesture}"

    @classmethod
    def from_string(cls, text: str) -> "GestureLabel":
        grasp, _, gesture = text.partition("/")
        return cls(grasp, gesture)


def all_labels() -> list[GestureLabel]:
    """All 30 labels in class-index order (grasp-major, gesture-minor)."""
    return [GestureLabel.from_class_index(i) for i in range(N_CLASSES)]
