from enum import Enum
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from app.core.errors import InvalidArgumentError
from app.core.rng import RngStream

Window = Tuple[int, int]


class InitialDataKind(str, Enum):
    STEP = "step"
    DOUBLE_BERNOULLI = "double_bernoulli"
    EXPLICIT = "explicit"


class Color(str, Enum):
    RED = "red"
    BLUE = "blue"


def check_window(window: Window) -> Window:
    lo, hi = int(window[0]), int(window[1])
    if lo > hi:
        raise InvalidArgumentError(f"empty window [{lo}, {hi}]")
    return lo, hi


def bernoulli_block(b1: float, b2: float, stream: RngStream, block: int, size: int) -> List[Tuple[int, int]]:
    """Bit pairs (x, y) for indices block*size+1 .. (block+1)*size"""
    gen = stream.child(block).generator()
    y_bits = gen.random(size) < b1
    x_bits = gen.random(size) < b2
    return [(int(x), int(y)) for x, y in zip(x_bits, y_bits)]


class InitialData(BaseModel):
    """
    Boundary process phi = (phi(1), phi(2), ...) of bit pairs (x_bit, y_bit).

    Indices past the stored entries are extended lazily: step data repeats (0, 1),
    double-sided Bernoulli data draws further blocks from its own stream, explicit
    data reads as (0, 0).
    """
    model_config = ConfigDict(frozen=True)

    kind: InitialDataKind
    bits: Tuple[Tuple[int, int], ...]
    b1: Optional[float] = None
    b2: Optional[float] = None
    seed: Optional[int] = None
    stream_id: Optional[int] = None
    path: Tuple[int, ...] = ()
    block_size: int = Field(default=1024, ge=1)

    _blocks: Dict[int, List[Tuple[int, int]]] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def _check_bits(self) -> "InitialData":
        for x_bit, y_bit in self.bits:
            if x_bit not in (0, 1) or y_bit not in (0, 1):
                raise ValueError(f"bits must be 0 or 1, got ({x_bit}, {y_bit})")
        if self.kind == InitialDataKind.STEP and any(pair != (0, 1) for pair in self.bits):
            raise ValueError("step data must have x_bit = 0 and y_bit = 1 at every index")
        if self.kind == InitialDataKind.DOUBLE_BERNOULLI:
            for name, value in (("b1", self.b1), ("b2", self.b2)):
                if value is None or not 0.0 <= value <= 1.0:
                    raise ValueError(f"{name} must lie in [0, 1]")
            if self.seed is None:
                raise ValueError("double-sided Bernoulli data needs a seed for lazy extension")
        return self

    def __len__(self) -> int:
        return len(self.bits)

    def pair(self, index: int) -> Tuple[int, int]:
        if index < 1:
            raise InvalidArgumentError(f"initial data is indexed from 1, got {index}")
        if index <= len(self.bits):
            return self.bits[index - 1]
        if self.kind == InitialDataKind.STEP:
            return 0, 1
        if self.kind == InitialDataKind.DOUBLE_BERNOULLI:
            block, offset = divmod(index - 1, self.block_size)
            if block not in self._blocks:
                self._blocks[block] = bernoulli_block(self.b1, self.b2, self._stream(), block, self.block_size)
            return self._blocks[block][offset]
        return 0, 0

    def x_bit(self, index: int) -> int:
        return self.pair(index)[0]

    def y_bit(self, index: int) -> int:
        return self.pair(index)[1]

    def blue_count(self, t: int) -> int:
        """N(t): number of s in [1, t] with y_bit(s) = 1"""
        return sum(self.y_bit(s) for s in range(1, t + 1))

    def last_nonzero_index(self) -> int:
        for index in range(len(self.bits), 0, -1):
            if self.bits[index - 1] != (0, 0):
                return index
        return 0

    def _stream(self) -> RngStream:
        return RngStream(seed=self.seed, stream_id=self.stream_id or 0, path=self.path)

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "b1": self.b1,
            "b2": self.b2,
            "bits": [[x_bit, y_bit] for x_bit, y_bit in self.bits],
            "seed": self.seed,
            "stream_id": self.stream_id,
            "path": list(self.path),
            "block_size": self.block_size,
        }

    @classmethod
    def from_json_dict(cls, payload: Mapping) -> "InitialData":
        return cls(
            kind=InitialDataKind(payload["kind"]),
            bits=tuple(tuple(pair) for pair in payload.get("bits", [])),
            b1=payload.get("b1"),
            b2=payload.get("b2"),
            seed=payload.get("seed"),
            stream_id=payload.get("stream_id"),
            path=tuple(payload.get("path", ())),
            block_size=payload.get("block_size", 1024),
        )


class ParticleConfig(BaseModel):
    """
    Ordered, tagged, colored particles on the window [lo, hi] at a fixed time.

    Blue tags are negative and red tags non-negative; tags increase with position.
    """
    model_config = ConfigDict(frozen=True)

    positions: Tuple[int, ...] = ()
    tags: Tuple[int, ...] = ()
    colors: Tuple[Color, ...] = ()
    window: Window

    @model_validator(mode="after")
    def _check_order(self) -> "ParticleConfig":
        lo, hi = self.window
        if lo > hi:
            raise ValueError(f"empty window [{lo}, {hi}]")
        if not len(self.positions) == len(self.tags) == len(self.colors):
            raise ValueError("positions, tags and colors must have equal length")
        for k in range(1, len(self.positions)):
            if self.positions[k] <= self.positions[k - 1]:
                raise ValueError("positions must be strictly increasing")
            if self.tags[k] != self.tags[k - 1] + 1:
                raise ValueError("tags must be consecutive")
        for tag, color in zip(self.tags, self.colors):
            if (color == Color.BLUE) != (tag < 0):
                raise ValueError(f"tag {tag} has color {color.value}; blue tags are negative, red non-negative")
        if self.positions and not (lo <= self.positions[0] and self.positions[-1] <= hi):
            raise ValueError(f"positions leave the window [{lo}, {hi}]")
        return self

    @classmethod
    def from_tagged_sites(cls, site_tags: Mapping[int, int], window: Window) -> "ParticleConfig":
        sites = sorted(site_tags)
        tags = tuple(site_tags[site] for site in sites)
        return cls(
            positions=tuple(sites),
            tags=tags,
            colors=tuple(Color.BLUE if tag < 0 else Color.RED for tag in tags),
            window=window,
        )

    @classmethod
    def from_sorted_sites(cls, sites: Iterable[int], first_tag: int, window: Window) -> "ParticleConfig":
        sites = tuple(sites)
        tags = tuple(range(first_tag, first_tag + len(sites)))
        return cls(
            positions=sites,
            tags=tags,
            colors=tuple(Color.BLUE if tag < 0 else Color.RED for tag in tags),
            window=window,
        )

    def __len__(self) -> int:
        return len(self.positions)

    @cached_property
    def _tag_index(self) -> Dict[int, int]:
        return {tag: k for k, tag in enumerate(self.tags)}

    def has_tag(self, tag: int) -> bool:
        return tag in self._tag_index

    def position_of(self, tag: int) -> int:
        if tag not in self._tag_index:
            raise InvalidArgumentError(f"tag {tag} is not present in this configuration")
        return self.positions[self._tag_index[tag]]

    def site_tags(self) -> Dict[int, int]:
        return dict(zip(self.positions, self.tags))

    def occupied_sites(self) -> FrozenSet[int]:
        return frozenset(self.positions)

    def occupancy(self, lo: int, hi: int) -> Tuple[int, ...]:
        occupied = self.occupied_sites()
        return tuple(int(site in occupied) for site in range(lo, hi + 1))

    @property
    def blue_count(self) -> int:
        return sum(1 for color in self.colors if color == Color.BLUE)

    def restricted_to(self, lo: int, hi: int) -> Tuple[Tuple[int, int], ...]:
        """(site, tag) pairs with site in [lo, hi]"""
        return tuple((site, tag) for site, tag in zip(self.positions, self.tags) if lo <= site <= hi)

    def shifted(self, offset: int, window: Optional[Window] = None) -> "ParticleConfig":
        lo, hi = self.window
        return ParticleConfig(
            positions=tuple(p + offset for p in self.positions),
            tags=self.tags,
            colors=self.colors,
            window=window or (lo + offset, hi + offset),
        )
