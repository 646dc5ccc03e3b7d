import numpy as np
import pytest

from ctxvad.datamodel import ValidationError
from ctxvad.videopipe import (
    BackboneSpec,
    SegmentConfig,
    extract_features,
    feature_path,
    grid_to_vector,
    num_clips,
    preprocess_frame,
    read_feature_file,
    segment_clip_indices,
    segment_feature_grids,
    segment_valid_counts,
    segment_video,
    vector_to_grid,
    write_feature_file,
)


def test_preprocess_constant_frame_is_zero():
    frame = np.full((100, 120, 3), 128, dtype=np.uint8)
    out = preprocess_frame(frame)
    assert out.shape == (224, 224, 3)
    assert np.allclose(out, 0.0, atol=1e-5)


def test_preprocess_resize_shape():
    frame = np.random.default_rng(0).integers(0, 255, (448, 448, 3)).astype(np.uint8)
    assert preprocess_frame(frame).shape == (224, 224, 3)


def test_preprocess_mean_removed():
    rng = np.random.default_rng(1)
    frame = rng.integers(0, 255, (37, 61, 3)).astype(np.uint8)
    out = preprocess_frame(frame)
    assert np.abs(out.mean(axis=(0, 1))).max() < 1e-4


def test_preprocess_validation():
    with pytest.raises(ValidationError):
        preprocess_frame(np.zeros((0, 0, 3)))
    with pytest.raises(ValidationError):
        preprocess_frame(np.zeros((10, 10)))


def test_segment_video_exact_division():
    windows = segment_video(160)
    assert len(windows) == 2
    assert windows[0].tolist() == list(range(80))
    assert windows[1].tolist() == list(range(80, 160))


def test_segment_video_single():
    assert len(segment_video(80)) == 1


def test_segment_video_padding():
    windows = segment_video(90)
    assert len(windows) == 2
    assert windows[1][:10].tolist() == list(range(80, 90))
    assert (windows[1][10:] == 89).all()
    assert segment_valid_counts(90) == [80, 10]


def test_segment_windows_partition():
    for m_count in (1, 79, 80, 81, 240, 500):
        windows = segment_video(m_count)
        seen = np.concatenate([w[:c] for w, c in
                               zip(windows, segment_valid_counts(m_count))])
        assert seen.tolist() == list(range(m_count))


def test_feature_file_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    feats = rng.standard_normal((7, 2048)).astype(np.float32)
    path = feature_path(tmp_path, "vid1")
    write_feature_file(path, feats, provenance="test")
    back = read_feature_file(path)
    assert np.array_equal(back, feats)
    assert path.with_suffix(".feat.provenance.txt").read_text() == "test\n"


def test_feature_file_missing_and_truncated(tmp_path):
    with pytest.raises(ValidationError, match="missing"):
        read_feature_file(tmp_path / "nope.feat")
    path = tmp_path / "bad.feat"
    write_feature_file(path, np.zeros((2, 4), dtype=np.float32))
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(ValidationError, match="truncated"):
        read_feature_file(path)


def test_vector_grid_bijection():
    rng = np.random.default_rng(2)
    for dim in (1024, 2048):
        vec = rng.standard_normal(dim).astype(np.float32)
        grid = vector_to_grid(vec)
        expected_c = 64 if dim == 1024 else 128
        assert grid.shape == (4, 4, expected_c)
        assert np.array_equal(grid_to_vector(grid), vec)
    # element i of a single stream lands at (i // 256, (i // 64) % 4, i % 64)
    vec = np.arange(1024, dtype=np.float32)
    grid = vector_to_grid(vec)
    i = 777
    assert grid[i // 256, (i // 64) % 4, i % 64] == i


def test_extract_features_import_two_stream(tmp_path):
    rng = np.random.default_rng(3)
    feats = rng.standard_normal((5, 2048)).astype(np.float32)
    write_feature_file(feature_path(tmp_path, "v"), feats)
    spec = BackboneSpec(kind="import_rgb_flow", feature_root=str(tmp_path))
    grids = extract_features("v", range(5), spec)
    assert grids.shape == (5, 4, 4, 128)
    for k in range(5):
        assert np.array_equal(grid_to_vector(grids[k]), feats[k])


def test_extract_features_single_stream(tmp_path):
    feats = np.random.default_rng(4).standard_normal((3, 1024)).astype(np.float32)
    write_feature_file(feature_path(tmp_path, "v"), feats)
    spec = BackboneSpec(kind="import_rgb_only", feature_root=str(tmp_path))
    grids = extract_features("v", range(3), spec)
    assert grids.shape == (3, 4, 4, 64)
    assert spec.grid_channels == 64


def test_extract_features_errors(tmp_path):
    feats = np.random.default_rng(5).standard_normal((2, 2048)).astype(np.float32)
    write_feature_file(feature_path(tmp_path, "v"), feats)
    spec = BackboneSpec(kind="import_rgb_flow", feature_root=str(tmp_path))
    with pytest.raises(ValidationError, match="clip 5"):
        extract_features("v", [0, 5], spec)
    bad = feats.copy()
    bad[1, 0] = np.nan
    write_feature_file(feature_path(tmp_path, "w"), bad)
    with pytest.raises(ValidationError, match="non-finite"):
        extract_features("w", [0, 1], spec)
    with pytest.raises(ValidationError, match="missing"):
        extract_features("absent", [0], spec)


def test_synthetic_backbone_deterministic():
    spec = BackboneSpec(kind="synthetic", seed=9)
    a = extract_features("vid", range(5), spec)
    b = extract_features("vid", range(5), spec)
    assert np.array_equal(a, b)
    assert a.shape == (5, 4, 4, 128)
    other = extract_features("vid", range(5), BackboneSpec(kind="synthetic", seed=10))
    assert not np.array_equal(a, other)


def test_segment_feature_grids_shapes():
    spec = BackboneSpec(kind="synthetic", seed=0)
    cfg = SegmentConfig()
    grids = segment_feature_grids("v", 90, cfg, spec)
    assert grids.shape == (2, 5, 4, 4, 128)
    assert num_clips(90, cfg) == 6
    # padded tail clips reuse the last real clip's features
    assert np.array_equal(grids[1, 1], grids[1, 2])
    windows = segment_video(90, cfg)
    assert segment_clip_indices(windows[1], cfg) == [5, 6, 7, 8, 9]
