import struct

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from pointnn.datasets import synth_primitives
from pointnn.geometry import normalize_cloud
from pointnn.io import (
    BadMagicError,
    FormatError,
    OffParseError,
    TriangleMesh,
    TruncatedBankError,
    UnsupportedVersionError,
    bank_from_bytes,
    bank_to_bytes,
    load_bank,
    parse_off,
    read_dataset,
    read_logits,
    read_xyz,
    sample_mesh_surface,
    save_bank,
    write_dataset,
    write_logits,
    write_xyz,
)
from pointnn.memory import build_bank

TRIANGLE_OFF = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"


def test_parse_single_triangle():
    mesh = parse_off(TRIANGLE_OFF)
    assert mesh.vertices.shape == (3, 3)
    assert mesh.faces.tolist() == [[0, 1, 2]]
    assert mesh.areas().tolist() == [0.5]


def test_parse_fused_header_and_comments():
    mesh = parse_off("OFF3 1 0\n# a comment\n0 0 0\n1 0 0\n0 1 0  # trailing\n3 0 1 2\n")
    assert mesh.faces.tolist() == [[0, 1, 2]]


def test_parse_quad_fan_triangulated():
    text = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n"
    mesh = parse_off(text)
    assert mesh.faces.tolist() == [[0, 1, 2], [0, 2, 3]]
    assert mesh.areas().sum() == pytest.approx(1.0)


def test_parse_reports_bad_index_line():
    text = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n"
    with pytest.raises(OffParseError, match="line 6") as err:
        parse_off(text)
    assert err.value.line == 6


@pytest.mark.parametrize("text", ["", "PLY\n", "OFF\n2 0 0\n0 0 0\n", "OFF\n1 0 0\n0 0 x\n", "OFF\nx y\n"])
def test_parse_rejects_malformed(text):
    with pytest.raises(OffParseError):
        parse_off(text)


@settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.text(alphabet="OF0123456789 .-e#\nx", max_size=120))
def test_off_fuzz_never_yields_nan(text):
    try:
        mesh = parse_off(text)
    except OffParseError:
        return
    assert np.all(np.isfinite(mesh.vertices))
    if len(mesh.faces) and mesh.areas().sum() > 0:
        assert np.all(np.isfinite(normalize_cloud(sample_mesh_surface(mesh, 16))))


def test_sample_points_inside_triangle():
    pts = sample_mesh_surface(parse_off(TRIANGLE_OFF), 2000, seed=1)
    assert np.all(pts[:, :2] >= -1e-12)
    assert np.all(pts[:, 0] + pts[:, 1] <= 1 + 1e-12)
    assert np.all(pts[:, 2] == 0)


def test_sample_area_weighting():
    verts = [[0, 0, 0], [3, 0, 0], [0, 3, 0], [10, 0, 0], [11, 0, 0], [10, 1, 0]]
    mesh = TriangleMesh(verts, [[0, 1, 2], [3, 4, 5]])  # areas 4.5 and 0.5
    pts = sample_mesh_surface(mesh, 10000, seed=0)
    big = np.sum(pts[:, 0] < 5)
    assert abs(big - 9000) <= 150


def test_sample_seeded_and_degenerate():
    mesh = parse_off(TRIANGLE_OFF)
    np.testing.assert_array_equal(sample_mesh_surface(mesh, 50, 3), sample_mesh_surface(mesh, 50, 3))
    with pytest.raises(ValueError):
        sample_mesh_surface(TriangleMesh([[0, 0, 0]] * 3, [[0, 1, 2]]), 5)


def test_xyz_minimal():
    np.testing.assert_array_equal(read_xyz("0 0 0\n1 2 3\n"), [[0, 0, 0], [1, 2, 3]])


def test_xyz_round_trip():
    pts = np.random.default_rng(0).normal(size=(100, 3)) * 1e3
    back = read_xyz(write_xyz(pts))
    assert np.abs(back - pts).max() < 1e-8


def test_xyz_errors_carry_line():
    with pytest.raises(FormatError, match="line 1"):
        read_xyz("1 2\n")
    with pytest.raises(FormatError, match="line 2"):
        read_xyz("1 2 3\n1 a 3\n")
    with pytest.raises(FormatError):
        read_xyz("# nothing\n")


def test_logits_round_trip():
    v = np.array([0.1, -2.5, 1e-17])
    np.testing.assert_array_equal(read_logits(write_logits(v)), v)


def test_dataset_directory_round_trip(tmp_path):
    ds = synth_primitives(["sphere", "cone"], per_class=2, points=16)
    write_dataset(ds, tmp_path)
    back = read_dataset(tmp_path)
    assert back.class_names == ds.class_names
    assert back.labels.tolist() == ds.labels.tolist()
    for a, b in zip(ds.clouds, back.clouds):
        np.testing.assert_array_equal(a, b)


@pytest.fixture
def bank():
    rng = np.random.default_rng(2)
    return build_bank(rng.normal(size=(7, 5)), [0, 1, 2, 0, 1, 2, 2], 3, gamma=123.456,
                      class_names=("chair", "tâble", ""))


def test_bank_round_trip_bit_exact(bank, tmp_path):
    path = tmp_path / "b.pnnb"
    save_bank(bank, path)
    back = load_bank(path)
    assert back.feat_mem.tobytes() == bank.feat_mem.tobytes()
    assert back.label_mem.tobytes() == bank.label_mem.tobytes()
    assert back.gamma == bank.gamma and back.class_names == bank.class_names
    assert back.kind == bank.kind
    assert bank_to_bytes(back) == path.read_bytes()


def test_part_bank_kind_survives(bank):
    part = build_bank(bank.feat_mem, bank.labels, 3, kind="part")
    assert bank_from_bytes(bank_to_bytes(part)).kind == "part"


def test_bank_bad_magic(bank):
    with pytest.raises(BadMagicError):
        bank_from_bytes(b"XXXX" + bank_to_bytes(bank)[4:])


def test_bank_future_version(bank):
    data = bytearray(bank_to_bytes(bank))
    struct.pack_into("<I", data, 4, 99)
    with pytest.raises(UnsupportedVersionError):
        bank_from_bytes(bytes(data))


def test_bank_truncated_reports_sizes(bank):
    data = bank_to_bytes(bank)
    with pytest.raises(TruncatedBankError, match="needs 140 bytes, found 100"):
        bank_from_bytes(data[: 28 + 100])
    for cut in (10, 28, 28 + 140 + 3, len(data) - 1):
        with pytest.raises(TruncatedBankError):
            bank_from_bytes(data[:cut])


def test_bank_rejects_trailing_bytes(bank):
    with pytest.raises(FormatError):
        bank_from_bytes(bank_to_bytes(bank) + b"\0")
