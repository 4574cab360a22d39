"""A small immutable, hashable mapping used for state snapshots."""
from __future__ import annotations

from collections.abc import Iterator, Mapping
from typing import Generic, TypeVar

K = TypeVar("K")
V = TypeVar("V")


class FrozenMap(Mapping, Generic[K, V]):
    __slots__ = ("_data", "_hash")

    def __init__(self, data: Mapping[K, V] | None = None, **kwargs: V) -> None:
        d = dict(data or {})
        d.update(kwargs)
        self._data = d
        self._hash: int | None = None

    def __getitem__(self, key: K) -> V:
        return self._data[key]

    def __iter__(self) -> Iterator[K]:
        return iter(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._data.items()))
        return self._hash

    def __eq__(self, other: object) -> bool:
        if isinstance(other, FrozenMap):
            return self._data == other._data
        if isinstance(other, Mapping):
            return self._data == dict(other)
        return NotImplemented

    def __repr__(self) -> str:
        return f"FrozenMap({self._data!r})"

    def __getstate__(self):
        return self._data

    def __setstate__(self, state) -> None:
        self._data = state
        self._hash = None

    def set(self, key: K, value: V) -> FrozenMap[K, V]:
        d = dict(self._data)
        d[key] = value
        return FrozenMap(d)

    def sorted_items(self) -> list[tuple[K, V]]:
        return sorted(self._data.items(), key=lambda kv: kv[0])
