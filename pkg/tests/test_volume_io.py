import gzip
import shutil

import numpy as np
import pytest

from cmrqa.errors import FormatError, ValidationError
from cmrqa.volume_io import (
    MaskVolume,
    Volume,
    extract_slices,
    load_mask,
    load_volume,
    write_nifti,
    write_raw_json,
)


def indexed_voxels(h=8, w=8, s=3):
    i, j, k = np.meshgrid(np.arange(h), np.arange(w), np.arange(s), indexing="ij")
    return (i + 10 * j + 100 * k).astype(np.float64)


class TestNiftiRoundTrip:
    def test_indexed_volume_round_trip(self, tmp_path):
        vox = indexed_voxels()
        path = tmp_path / "case-ED.nii"
        write_nifti(vox, path)
        v = load_volume(path)
        assert np.array_equal(v.voxels, vox)
        assert v.subject_id == "case-ED"
        assert v.phase == "ED"

    def test_gzip_transparency(self, tmp_path):
        vox = indexed_voxels()
        plain = tmp_path / "a.nii"
        write_nifti(vox, plain)
        gz = tmp_path / "a.nii.gz"
        with open(plain, "rb") as src, gzip.open(gz, "wb") as dst:
            shutil.copyfileobj(src, dst)
        assert np.array_equal(load_volume(gz).voxels, load_volume(plain).voxels)

    @pytest.mark.parametrize("dtype", [np.uint8, np.int16, np.int32, np.float32, np.float64])
    def test_all_supported_dtypes(self, tmp_path, dtype):
        vox = np.arange(2 * 3 * 4, dtype=np.float64).reshape(2, 3, 4)
        path = tmp_path / "d.nii"
        write_nifti(vox, path, dtype=dtype)
        assert np.array_equal(load_volume(path).voxels, vox)

    def test_spacing_round_trip(self, tmp_path):
        path = tmp_path / "sp.nii"
        write_nifti(indexed_voxels(), path, spacing=(1.5, 1.5, 8.0))
        assert load_volume(path).spacing == pytest.approx((1.5, 1.5, 8.0))

    def test_big_endian_read(self, tmp_path):
        # Byteswap a little-endian file by hand and verify the reader copes.
        import struct

        vox = indexed_voxels(4, 4, 2)
        path = tmp_path / "le.nii"
        write_nifti(vox, path, dtype=np.float32)
        raw = bytearray(path.read_bytes())
        out = bytearray(len(raw))
        out[0:4] = struct.pack(">i", 348)
        out[40:56] = struct.pack(">8h", *struct.unpack("<8h", bytes(raw[40:56])))
        out[70:74] = struct.pack(">2h", *struct.unpack("<2h", bytes(raw[70:74])))
        out[76:108] = struct.pack(">8f", *struct.unpack("<8f", bytes(raw[76:108])))
        out[108:120] = struct.pack(">3f", *struct.unpack("<3f", bytes(raw[108:120])))
        out[344:348] = raw[344:348]
        data = np.frombuffer(bytes(raw[352:]), dtype="<f4").astype(">f4").tobytes()
        big = tmp_path / "be.nii"
        big.write_bytes(bytes(out[:352]) + data)
        assert np.array_equal(load_volume(big).voxels, vox)


class TestLoadErrors:
    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_volume(tmp_path / "nope.nii")

    def test_4d_file_rejected(self, tmp_path):
        import struct

        path = tmp_path / "t.nii"
        write_nifti(indexed_voxels(2, 2, 2), path)
        raw = bytearray(path.read_bytes())
        struct.pack_into("<8h", raw, 40, 4, 2, 2, 2, 5, 1, 1, 1)
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="3D"):
            load_volume(path)

    def test_unsupported_datatype_rejected(self, tmp_path):
        import struct

        path = tmp_path / "t.nii"
        write_nifti(indexed_voxels(2, 2, 2), path)
        raw = bytearray(path.read_bytes())
        struct.pack_into("<h", raw, 70, 1536)  # complex128
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="datatype"):
            load_volume(path)

    def test_garbage_rejected(self, tmp_path):
        path = tmp_path / "g.nii"
        path.write_bytes(b"\x00" * 400)
        with pytest.raises(FormatError):
            load_volume(path)

    def test_nan_voxels_name_first_index(self, tmp_path):
        vox = indexed_voxels(4, 4, 2)
        vox[1, 2, 0] = np.nan
        path = tmp_path / "n.nii"
        write_nifti(vox, path)
        with pytest.raises(ValidationError, match=r"\(1, 2, 0\)"):
            load_volume(path)


class TestRawJson:
    def test_round_trip_bitwise(self, tmp_path):
        rng = np.random.default_rng(0)
        vox = rng.random((5, 7, 3))
        path = tmp_path / "r.json"
        write_raw_json(vox, path)
        first = load_volume(path)
        write_raw_json(first.voxels, tmp_path / "r2.json")
        second = load_volume(tmp_path / "r2.json")
        assert np.array_equal(first.voxels, second.voxels)
        assert first.voxels.tobytes() == second.voxels.tobytes()

    def test_blob_order_is_slice_major(self, tmp_path):
        vox = indexed_voxels(2, 3, 2)
        path = tmp_path / "o.json"
        write_raw_json(vox, path)
        blob = np.frombuffer((tmp_path / "o.f64").read_bytes(), dtype="<f8")
        # First H*W entries are slice 0 in row-major order.
        assert np.array_equal(blob[: 2 * 3].reshape(2, 3), vox[:, :, 0])

    def test_wrong_dtype_rejected(self, tmp_path):
        path = tmp_path / "b.json"
        write_raw_json(indexed_voxels(2, 2, 2), path)
        text = path.read_text().replace("f64", "f32")
        path.write_text(text)
        with pytest.raises(FormatError, match="dtype"):
            load_volume(path)


class TestMask:
    def test_all_zero_mask(self, tmp_path):
        vox = indexed_voxels()
        vol_path, mask_path = tmp_path / "v.nii", tmp_path / "m.nii"
        write_nifti(vox, vol_path)
        write_nifti(np.zeros_like(vox), mask_path, dtype=np.uint8)
        mask = load_mask(mask_path, load_volume(vol_path))
        assert mask.labels.sum() == 0
        assert mask.shape == (8, 8, 3)

    def test_multilabel_thresholded(self, tmp_path):
        vox = indexed_voxels()
        labels = np.zeros_like(vox)
        labels[2:5, 2:5, :] = 3.0  # e.g. myocardium label id
        write_nifti(vox, tmp_path / "v.nii")
        write_nifti(labels, tmp_path / "m.nii")
        mask = load_mask(tmp_path / "m.nii", load_volume(tmp_path / "v.nii"))
        assert set(np.unique(mask.labels)) == {0, 1}
        assert np.array_equal(mask.labels == 1, labels > 0.5)

    def test_dim_mismatch_reports_both_shapes(self, tmp_path):
        write_nifti(indexed_voxels(8, 8, 3), tmp_path / "v.nii")
        write_nifti(np.zeros((8, 8, 2)), tmp_path / "m.nii")
        with pytest.raises(ValidationError, match=r"\(8, 8, 2\).*\(8, 8, 3\)"):
            load_mask(tmp_path / "m.nii", load_volume(tmp_path / "v.nii"))


class TestVolumeType:
    def test_voxels_are_read_only(self):
        v = Volume(voxels=indexed_voxels(), subject_id="s")
        with pytest.raises(ValueError):
            v.voxels[0, 0, 0] = 1.0

    def test_rejects_non_3d(self):
        with pytest.raises(ValidationError):
            Volume(voxels=np.zeros((4, 4)), subject_id="s")

    def test_mask_rejects_non_binary(self):
        with pytest.raises(ValidationError):
            MaskVolume(labels=np.full((2, 2, 2), 2))


class TestExtractSlices:
    def test_slice_count_and_shape(self):
        v = Volume(voxels=indexed_voxels(), subject_id="s")
        slices = extract_slices(v)
        assert len(slices) == 3
        assert all(s.shape == (8, 8) for s in slices)

    def test_singleton_volume(self):
        v = Volume(voxels=np.ones((4, 5, 1)), subject_id="s")
        assert len(extract_slices(v)) == 1

    def test_random_probes_match_voxels(self):
        rng = np.random.default_rng(1)
        v = Volume(voxels=rng.random((9, 7, 4)), subject_id="s")
        slices = extract_slices(v)
        for _ in range(50):
            i, j, k = rng.integers(9), rng.integers(7), rng.integers(4)
            assert slices[k][i, j] == v.voxels[i, j, k]

    def test_stacking_reconstructs_volume(self):
        rng = np.random.default_rng(2)
        v = Volume(voxels=rng.random((6, 5, 4)), subject_id="s")
        rebuilt = np.stack(extract_slices(v), axis=2)
        assert np.array_equal(rebuilt, v.voxels)
