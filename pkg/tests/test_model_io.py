import numpy as np
import pytest

from frist import model_io
from frist.learning import FristModel
from frist.operators import build_operator


def make_model(rng):
    side, q = 3, 8
    ops = [build_operator(0, False, q, side), build_operator(3, True, q, side)]
    return FristModel(
        parent=rng.normal(size=(9, 9)),
        operators=ops,
        lambda0=3.1e-3,
        sparsity=4,
        patch_side=side,
        num_angles=q,
    )


def test_roundtrip(tmp_path, rng):
    model = make_model(rng)
    path = tmp_path / "m.frist"
    model_io.save_model(path, model)
    back = model_io.load_model(path)
    assert np.array_equal(back.parent, model.parent)
    assert back.lambda0 == model.lambda0
    assert back.sparsity == model.sparsity
    assert back.patch_side == model.patch_side
    assert back.num_angles == model.num_angles
    assert len(back.operators) == 2
    for a, b in zip(back.operators, model.operators):
        assert (a.angle_index, a.flip) == (b.angle_index, b.flip)
        assert np.array_equal(a.mapping, b.mapping)  # rebuilt deterministically


def test_save_is_deterministic(tmp_path, rng):
    model = make_model(rng)
    p1, p2 = tmp_path / "a", tmp_path / "b"
    model_io.save_model(p1, model)
    model_io.save_model(p2, model)
    assert p1.read_bytes() == p2.read_bytes()


def test_magic_validated(tmp_path):
    path = tmp_path / "bad"
    path.write_bytes(b"XXXXX" + b"\x00" * 64)
    with pytest.raises(ValueError):
        model_io.load_model(path)


def test_truncation_detected(tmp_path, rng):
    model = make_model(rng)
    path = tmp_path / "m"
    model_io.save_model(path, model)
    path.write_bytes(path.read_bytes()[:-16])
    with pytest.raises(ValueError):
        model_io.load_model(path)


def test_header_consistency_checked(tmp_path, rng):
    model = make_model(rng)
    path = tmp_path / "m"
    model_io.save_model(path, model)
    raw = bytearray(path.read_bytes())
    raw[5:9] = (7).to_bytes(4, "little")  # n=7 but patch_side stays 3
    path.write_bytes(bytes(raw))
    with pytest.raises(ValueError):
        model_io.load_model(path)
