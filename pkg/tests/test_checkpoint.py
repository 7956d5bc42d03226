import numpy as np
import pytest

from cnerkit.checkpoint import MAGIC, CheckpointError, load_arrays, save_arrays


def test_roundtrip_exact(tmp_path):
    path = str(tmp_path / "model.stfc")
    arrays = [
        ("embed.E", np.random.default_rng(0).standard_normal((4, 7))),
        ("crf.ner.start", np.array([0.5, -1.5, 2.0])),
        ("scalarish", np.array(3.25)),
    ]
    save_arrays(path, arrays)
    back = load_arrays(path)
    assert list(back) == [n for n, _ in arrays]
    for name, arr in arrays:
        np.testing.assert_array_equal(back[name], arr)
        assert back[name].dtype == np.float64


def test_file_starts_with_magic(tmp_path):
    path = str(tmp_path / "m.stfc")
    save_arrays(path, [("a", np.zeros(2))])
    raw = open(path, "rb").read()
    assert raw.startswith(MAGIC)
    # values are little-endian float64 at the tail
    assert raw[-16:] == np.zeros(2, dtype="<f8").tobytes()


def test_bad_magic_rejected(tmp_path):
    path = str(tmp_path / "junk.stfc")
    path_obj = tmp_path / "junk.stfc"
    path_obj.write_bytes(b"NOPE!" + b"\x00" * 16)
    with pytest.raises(CheckpointError, match="bad magic"):
        load_arrays(path)


def test_truncated_file_rejected(tmp_path):
    path = str(tmp_path / "m.stfc")
    save_arrays(path, [("a", np.ones((3, 3)))])
    raw = open(path, "rb").read()
    (tmp_path / "trunc.stfc").write_bytes(raw[:-8])
    with pytest.raises(CheckpointError, match="truncated"):
        load_arrays(str(tmp_path / "trunc.stfc"))


def test_trailing_bytes_rejected(tmp_path):
    path = str(tmp_path / "m.stfc")
    save_arrays(path, [("a", np.ones(2))])
    raw = open(path, "rb").read()
    (tmp_path / "extra.stfc").write_bytes(raw + b"\x00")
    with pytest.raises(CheckpointError, match="trailing"):
        load_arrays(str(tmp_path / "extra.stfc"))


def test_identical_content_identical_bytes(tmp_path):
    arrays = [("x", np.arange(6.0).reshape(2, 3)), ("y", np.array([1.0]))]
    p1, p2 = str(tmp_path / "a.stfc"), str(tmp_path / "b.stfc")
    save_arrays(p1, arrays)
    save_arrays(p2, [(n, a.copy()) for n, a in arrays])
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_unicode_names(tmp_path):
    path = str(tmp_path / "m.stfc")
    save_arrays(path, [("层.权重", np.ones(1))])
    assert "层.权重" in load_arrays(path)
