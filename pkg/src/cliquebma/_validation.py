"""Input validation helpers shared by the functional API and the estimators."""

from collections.abc import Sequence

import numpy as np

from .exceptions import InputShapeError, InputValueError, SubsetError


def check_rectangular(rows, *, name="matrix") -> np.ndarray:
    """Return ``rows`` as a 2-D integer array, rejecting ragged input."""
    if isinstance(rows, np.ndarray):
        arr = rows
    else:
        rows = list(rows)
        lengths = {len(r) for r in rows}
        if len(lengths) > 1:
            raise InputShapeError(f"{name} is ragged: row lengths {sorted(lengths)}")
        arr = np.asarray(rows)
    if arr.ndim != 2:
        raise InputShapeError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.size and arr.dtype.kind not in "biuf":
        raise InputValueError(f"{name} must be numeric, got dtype {arr.dtype}")
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
            raise InputValueError(f"{name} must contain integers")
    return arr.astype(np.int64, copy=False)


def check_binary_matrix(rows) -> np.ndarray:
    arr = check_rectangular(rows)
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InputShapeError("need at least one row and one column")
    if np.any((arr != 0) & (arr != 1)):
        bad = arr[(arr != 0) & (arr != 1)][0]
        raise InputValueError(f"non-binary entry {bad!r}")
    return arr.astype(np.uint8)


def check_names(names, n_vars: int) -> tuple[str, ...]:
    if names is None:
        return tuple(f"X{i + 1}" for i in range(n_vars))
    names = tuple(str(n) for n in names)
    if len(names) != n_vars:
        raise InputShapeError(f"{len(names)} names given for {n_vars} variables")
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})
        raise InputValueError(f"duplicate variable labels: {dup}")
    return names


def check_subset(subset: Sequence[int], n_vars: int) -> tuple[int, ...]:
    """Validate a 0-based variable subset and return it sorted and deduplicated."""
    try:
        idx = tuple(sorted({int(i) for i in subset}))
    except TypeError as exc:
        raise SubsetError(f"subset must be an iterable of indices: {subset!r}") from exc
    if not idx:
        raise SubsetError("subset must be nonempty")
    if idx[0] < 0 or idx[-1] >= n_vars:
        raise SubsetError(f"subset {idx} out of range for {n_vars} variables")
    return idx


def check_probability(value: float, name: str, *, open_interval: bool = False) -> float:
    value = float(value)
    if open_interval:
        ok = 0.0 < value < 1.0
    else:
        ok = 0.0 <= value <= 1.0
    if not ok:
        bounds = "(0, 1)" if open_interval else "[0, 1]"
        raise InputValueError(f"{name} must lie in {bounds}, got {value}")
    return value
