import json

import numpy as np
import pytest

from lrtomo import (
    DensityMatrix,
    ValidationError,
    bundled_qubit_dataset,
    load_dataset,
    pauli_settings,
    save_dataset,
    simulate_dataset,
)
from lrtomo.io import dataset_to_dict, loads_dataset


def test_bundled_dataset_contents(fig_dataset):
    assert fig_dataset.dim == 2
    assert fig_dataset.total_copies == 60
    counts = {s.name: s.counts for s in fig_dataset.settings}
    assert counts == {
        "sigma_x": (7, 13),
        "sigma_y": (9, 11),
        "sigma_z": (3, 17),
    }


def test_round_trip(tmp_path):
    rho = DensityMatrix.maximally_mixed(2)
    ds = simulate_dataset(rho, [(p, 15) for p in pauli_settings()], seed=3)
    path = tmp_path / "ds.json"
    save_dataset(ds, path)
    again = load_dataset(path)
    assert again.dim == ds.dim
    for a, b in zip(again.settings, ds.settings):
        assert a.name == b.name
        assert a.counts == b.counts
        for ea, eb in zip(a.effects, b.effects):
            assert np.array_equal(ea.matrix, eb.matrix)


def test_rejects_nan_token():
    payload = json.dumps(dataset_to_dict(bundled_qubit_dataset()))
    broken = payload.replace("1.0", "NaN", 1)
    with pytest.raises(ValidationError, match="non-finite|invalid"):
        loads_dataset(broken)


def test_rejects_infinity_token():
    payload = json.dumps(dataset_to_dict(bundled_qubit_dataset()))
    broken = payload.replace("0.5", "Infinity", 1)
    with pytest.raises(ValidationError):
        loads_dataset(broken)


def test_rejects_malformed_json():
    with pytest.raises(ValidationError, match="invalid JSON"):
        loads_dataset("{not json")


@pytest.mark.parametrize(
    "mutate,message",
    [
        (lambda d: d.pop("dimension"), "dimension"),
        (lambda d: d.update(dimension=0), "positive integer"),
        (lambda d: d.update(settings={}), "array"),
        (lambda d: d["settings"][0].pop("counts"), "counts"),
        (lambda d: d["settings"][0].update(counts=[1.5, 2]), "nonnegative integers"),
        (lambda d: d["settings"][0].update(counts=[-1, 2]), "nonnegative integers"),
        (lambda d: d["settings"][0]["effects"][0].pop(0), "square"),
    ],
)
def test_structural_rejections(mutate, message):
    obj = dataset_to_dict(bundled_qubit_dataset())
    mutate(obj)
    with pytest.raises(ValidationError, match=message):
        loads_dataset(json.dumps(obj))


def test_invariants_checked_on_load():
    obj = dataset_to_dict(bundled_qubit_dataset())
    # corrupt one effect entry so the POVM no longer sums to the identity
    obj["settings"][0]["effects"][0][0][0] = [0.9, 0.0]
    with pytest.raises(ValidationError, match="identity"):
        loads_dataset(json.dumps(obj))


def test_entries_must_be_re_im_pairs():
    obj = dataset_to_dict(bundled_qubit_dataset())
    obj["settings"][0]["effects"][0][0][0] = [0.5]
    with pytest.raises(ValidationError, match="two-element"):
        loads_dataset(json.dumps(obj))
