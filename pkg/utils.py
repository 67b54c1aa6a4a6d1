import typing as t
from collections import Counter

import numpy as np
import numpy.typing as npt


def true_runs(mask: npt.ArrayLike, /) -> list[tuple[int, int]]:
    """Returns the (start, stop) index pairs of every maximal run of True values.

    Parameters
    -----------
    mask:
        One dimensional boolean array."""
    flags = np.asarray(mask, dtype=bool)

    if flags.size == 0:
        return []

    padded = np.concatenate(([False], flags, [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return [(int(start), int(stop)) for start, stop in zip(edges[::2], edges[1::2])]


def value_runs(values: npt.ArrayLike, /) -> t.Iterator[tuple[int, int, t.Any]]:
    """Yields (start, stop, value) for every maximal run of equal consecutive values.

    NaN never compares equal, so each NaN forms its own run."""
    array = np.asarray(values)

    if array.size == 0:
        return

    change = np.flatnonzero(array[1:] != array[:-1]) + 1
    starts = np.concatenate(([0], change))
    stops = np.concatenate((change, [array.size]))

    for start, stop in zip(starts, stops):
        yield int(start), int(stop), array[start]


def format_count(it: t.Iterable[t.Any], /) -> t.Iterator[str]:
    return (
        f'{item}{f" x{count}" * (count > 1)}' for item, count in Counter(filter(None, it)).items()
    )


def optional_float(value: float | None, /) -> float | None:
    """Converts numpy scalars to float, passing None and NaN through as None."""
    if value is None:
        return None

    value = float(value)
    return None if np.isnan(value) else value
