"""Named, ordered, partition-aware parameter containers.

A ParamVector is an ordered mapping group name -> float64 array. Group order
is fixed at construction and all arithmetic requires identical schemas, so
reductions over parameters are reproducible bit-for-bit.
"""

from __future__ import annotations

from typing import Callable, Iterable, Iterator, Mapping

import numpy as np

from .numerics import ShapeError

SHARED = "shared"
PERSONALIZED = "personalized"


class ParamVector:
    """Ordered collection of named float64 arrays with pointwise arithmetic."""

    __slots__ = ("_groups",)

    def __init__(self, groups: Mapping[str, np.ndarray] | Iterable[tuple[str, np.ndarray]]):
        items = groups.items() if isinstance(groups, Mapping) else groups
        self._groups: dict[str, np.ndarray] = {
            str(name): np.asarray(arr, dtype=np.float64) for name, arr in items
        }

    # -- container protocol -------------------------------------------------

    def __getitem__(self, name: str) -> np.ndarray:
        return self._groups[name]

    def __setitem__(self, name: str, value) -> None:
        if name not in self._groups:
            raise KeyError(name)
        arr = np.asarray(value, dtype=np.float64)
        if arr.shape != self._groups[name].shape:
            raise ShapeError(f"group {name!r}: shape {arr.shape} != {self._groups[name].shape}")
        self._groups[name] = arr

    def __contains__(self, name: str) -> bool:
        return name in self._groups

    def __iter__(self) -> Iterator[str]:
        return iter(self._groups)

    def __len__(self) -> int:
        return len(self._groups)

    def items(self):
        return self._groups.items()

    def names(self) -> list[str]:
        return list(self._groups)

    def __repr__(self) -> str:
        return f"ParamVector({len(self)} groups, {self.n_elements} elements)"

    # -- schema --------------------------------------------------------------

    @property
    def schema(self) -> tuple[tuple[str, tuple[int, ...]], ...]:
        return tuple((name, arr.shape) for name, arr in self._groups.items())

    @property
    def n_elements(self) -> int:
        return sum(arr.size for arr in self._groups.values())

    def check_schema(self, other: "ParamVector") -> None:
        if self.schema != other.schema:
            raise ShapeError(f"schema mismatch: {self.schema} vs {other.schema}")

    # -- construction helpers ------------------------------------------------

    def copy(self) -> "ParamVector":
        return ParamVector((name, arr.copy()) for name, arr in self._groups.items())

    def zeros_like(self) -> "ParamVector":
        return ParamVector((name, np.zeros_like(arr)) for name, arr in self._groups.items())

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "ParamVector":
        return ParamVector((name, np.asarray(fn(arr), dtype=np.float64)) for name, arr in self._groups.items())

    def combine(self, other: "ParamVector", fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "ParamVector":
        self.check_schema(other)
        return ParamVector(
            (name, np.asarray(fn(arr, other._groups[name]), dtype=np.float64))
            for name, arr in self._groups.items()
        )

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other: "ParamVector") -> "ParamVector":
        return self.combine(other, np.add)

    def __sub__(self, other: "ParamVector") -> "ParamVector":
        return self.combine(other, np.subtract)

    def __mul__(self, scalar: float) -> "ParamVector":
        s = float(scalar)
        return self.map(lambda a: a * s)

    __rmul__ = __mul__

    def sq_norm(self) -> float:
        return float(sum(np.dot(arr.ravel(), arr.ravel()) for arr in self._groups.values()))

    # -- flattening ----------------------------------------------------------

    def flatten(self) -> np.ndarray:
        if not self._groups:
            return np.zeros(0)
        return np.concatenate([arr.ravel() for arr in self._groups.values()])

    def unflatten(self, flat: np.ndarray) -> "ParamVector":
        """Rebuild a vector with this schema from a flat array."""
        flat = np.asarray(flat, dtype=np.float64).ravel()
        if flat.size != self.n_elements:
            raise ShapeError(f"flat size {flat.size} != {self.n_elements}")
        out = []
        pos = 0
        for name, arr in self._groups.items():
            out.append((name, flat[pos : pos + arr.size].reshape(arr.shape).copy()))
            pos += arr.size
        return ParamVector(out)

    # -- selection / partition -----------------------------------------------

    def select(self, names: Iterable[str]) -> "ParamVector":
        """Subset copy, preserving this vector's group order."""
        wanted = set(names)
        unknown = wanted - set(self._groups)
        if unknown:
            raise KeyError(f"unknown groups: {sorted(unknown)}")
        return ParamVector((name, arr.copy()) for name, arr in self._groups.items() if name in wanted)

    def equals(self, other: "ParamVector") -> bool:
        if self.schema != other.schema:
            return False
        return all(np.array_equal(arr, other._groups[name]) for name, arr in self._groups.items())


class PartitionScheme:
    """Assigns every parameter group either the shared or the personalized tag."""

    def __init__(self, tags: Mapping[str, str], name: str = "custom"):
        for group, tag in tags.items():
            if tag not in (SHARED, PERSONALIZED):
                raise ValueError(f"group {group!r}: bad tag {tag!r}")
        self.tags = dict(tags)
        self.name = name

    def __repr__(self) -> str:
        return f"PartitionScheme({self.name!r})"

    def tag_of(self, group: str) -> str:
        return self.tags[group]

    def shared_names(self, params: ParamVector) -> list[str]:
        self._check_cover(params)
        return [n for n in params if self.tags[n] == SHARED]

    def personalized_names(self, params: ParamVector) -> list[str]:
        self._check_cover(params)
        return [n for n in params if self.tags[n] == PERSONALIZED]

    def _check_cover(self, params: ParamVector) -> None:
        missing = set(params.names()) - set(self.tags)
        if missing:
            raise KeyError(f"scheme {self.name!r} does not cover groups: {sorted(missing)}")


def split(params: ParamVector, scheme: PartitionScheme) -> tuple[ParamVector, ParamVector]:
    """Disjoint (shared, personalized) partition preserving group order."""
    shared = params.select(scheme.shared_names(params))
    personalized = params.select(scheme.personalized_names(params))
    return shared, personalized


def merge(shared: ParamVector, personalized: ParamVector, reference: ParamVector | list[str]) -> ParamVector:
    """Inverse of split: reassemble groups in the reference order."""
    order = reference.names() if isinstance(reference, ParamVector) else list(reference)
    pool = dict(shared.items()) | dict(personalized.items())
    if set(pool) != set(order):
        raise KeyError(f"merge groups {sorted(pool)} != reference {sorted(order)}")
    return ParamVector((name, pool[name].copy()) for name in order)
