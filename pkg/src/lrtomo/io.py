"""Dataset file format: strict JSON (de)serialization.

A dataset file is a UTF-8 JSON object::

    {
      "dimension": 2,
      "settings": [
        {"name": "sigma_z",
         "effects": [[[[1.0, 0.0], [0.0, 0.0]], ...matrix rows...], ...],
         "counts": [3, 17]}
      ]
    }

A matrix is an array of rows; each entry is a two-element array
``[re, im]`` of finite doubles.  NaN/Infinity tokens are rejected, and
every structural invariant (Hermiticity, positivity, completeness,
count shapes) is re-validated on load.
"""

from __future__ import annotations

import importlib.resources
import json
from pathlib import Path

from .errors import ValidationError
from .states import Effect, MeasurementSetting, TomographyDataset


def _reject_constant(token: str):
    raise ValidationError(f"non-finite JSON token {token!r} is not allowed")


def _parse_matrix(obj, where: str):
    if not isinstance(obj, list) or not obj:
        raise ValidationError(f"{where}: matrix must be a non-empty array of rows")
    rows = []
    for r, row in enumerate(obj):
        if not isinstance(row, list) or len(row) != len(obj):
            raise ValidationError(f"{where}: row {r} does not make a square matrix")
        entries = []
        for c, entry in enumerate(row):
            if (
                not isinstance(entry, list)
                or len(entry) != 2
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in entry)
            ):
                raise ValidationError(
                    f"{where}: entry ({r},{c}) must be a two-element [re, im] array"
                )
            entries.append(complex(entry[0], entry[1]))
        rows.append(entries)
    import numpy as np

    return np.array(rows, dtype=complex)


def dataset_from_dict(obj) -> TomographyDataset:
    if not isinstance(obj, dict):
        raise ValidationError("dataset root must be a JSON object")
    if "dimension" not in obj or "settings" not in obj:
        raise ValidationError('dataset must have "dimension" and "settings" keys')
    dim = obj["dimension"]
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ValidationError(f'"dimension" must be a positive integer, got {dim!r}')
    if not isinstance(obj["settings"], list):
        raise ValidationError('"settings" must be an array')
    settings = []
    for i, s in enumerate(obj["settings"]):
        where = f"settings[{i}]"
        if not isinstance(s, dict):
            raise ValidationError(f"{where} must be an object")
        for key in ("name", "effects", "counts"):
            if key not in s:
                raise ValidationError(f'{where} is missing "{key}"')
        if not isinstance(s["name"], str):
            raise ValidationError(f"{where}: name must be a string")
        if not isinstance(s["effects"], list) or not isinstance(s["counts"], list):
            raise ValidationError(f"{where}: effects and counts must be arrays")
        effects = tuple(
            Effect(_parse_matrix(m, f"{where}.effects[{k}]"))
            for k, m in enumerate(s["effects"])
        )
        counts = []
        for c in s["counts"]:
            if not isinstance(c, int) or isinstance(c, bool) or c < 0:
                raise ValidationError(f"{where}: counts must be nonnegative integers")
            counts.append(c)
        settings.append(MeasurementSetting(s["name"], effects, tuple(counts)))
    return TomographyDataset(dim, tuple(settings))


def loads_dataset(text: str) -> TomographyDataset:
    try:
        obj = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON: {exc}") from exc
    return dataset_from_dict(obj)


def load_dataset(path) -> TomographyDataset:
    return loads_dataset(Path(path).read_text(encoding="utf-8"))


def dataset_to_dict(dataset: TomographyDataset) -> dict:
    settings = []
    for s in dataset.settings:
        settings.append(
            {
                "name": s.name,
                "effects": [
                    [[[float(x.real), float(x.imag)] for x in row] for row in e.matrix]
                    for e in s.effects
                ],
                "counts": list(s.counts),
            }
        )
    return {"dimension": dataset.dim, "settings": settings}


def save_dataset(dataset: TomographyDataset, path) -> None:
    Path(path).write_text(
        json.dumps(dataset_to_dict(dataset), indent=2) + "\n", encoding="utf-8"
    )


def bundled_qubit_dataset() -> TomographyDataset:
    """The packaged example dataset: 20 shots each of the three Paulis."""
    text = (
        importlib.resources.files("lrtomo").joinpath("data/fig1.json").read_text("utf-8")
    )
    return loads_dataset(text)
