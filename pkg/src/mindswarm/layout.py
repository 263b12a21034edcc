"""Electrode montage description (10/20 extended nomenclature)."""

from dataclasses import dataclass, field


# 64-channel cap in recording order, referenced at FCz with ground at FPz.
STANDARD_64 = (
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8",
    "FC5", "FC1", "FC2", "FC6",
    "T7", "C3", "Cz", "C4", "T8",
    "TP9", "CP5", "CP1", "CP2", "CP6", "TP10",
    "P7", "P3", "Pz", "P4", "P8",
    "PO9", "O1", "Oz", "O2", "PO10",
    "AF7", "AF3", "AF4", "AF8",
    "F5", "F1", "F2", "F6",
    "FT9", "FT7", "FC3", "FC4", "FT8", "FT10",
    "C5", "C1", "C2", "C6",
    "TP7", "CP3", "CPz", "CP4", "TP8",
    "P5", "P1", "P2", "P6",
    "PO7", "PO3", "POz", "PO4", "PO8",
)

# Trimmed montage for fast tests and compact synthetic sessions.
COMPACT_16 = (
    "Fp1", "Fp2", "F7", "F8", "T7", "T8",
    "C3", "Cz", "C4", "CP1", "CP2",
    "Pz", "POz", "O1", "Oz", "O2",
)


@dataclass(frozen=True)
class ChannelLayout:
    """Ordered channel names plus reference/ground labels."""

    names: tuple = STANDARD_64
    reference: str = "FCz"
    ground: str = "FPz"
    _index: dict = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if len(set(names)) != len(names):
            raise ValueError("channel names must be unique")
        for special in (self.reference, self.ground):
            if special in names:
                raise ValueError(f"{special!r} is reference/ground, not a data channel")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    def __len__(self):
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(
                f"channel {name!r} not in layout; available: {', '.join(self.names)}"
            ) from None

    def __contains__(self, name: str) -> bool:
        return name in self._index


def default_layout() -> ChannelLayout:
    return ChannelLayout(names=STANDARD_64)


def compact_layout() -> ChannelLayout:
    return ChannelLayout(names=COMPACT_16)
