import json

import numpy as np
import pytest

from ctxvad.datamodel import (
    CATEGORIES,
    SplitSpec,
    UsageError,
    ValidationError,
    VISIBLE_LABELS_BY_MODE,
)
from ctxvad.heads import LossConfig
from ctxvad.metrics import ScoredTrack, roc_auc
from ctxvad.model import ModelConfig, SegmentModel
from ctxvad.toydata import make_planted_dataset
from ctxvad.trainer import (
    Checkpoint,
    TrainConfig,
    build_examples,
    predict_video,
    train,
)
from ctxvad.videopipe import BackboneSpec, SegmentConfig


@pytest.fixture(scope="module")
def planted(tmp_path_factory):
    root = tmp_path_factory.mktemp("feat")
    catalog = make_planted_dataset(root, videos_per_category=2,
                                   frames_per_video=160, seed=0)
    backbone = BackboneSpec(kind="import_rgb_flow", feature_root=str(root))
    return catalog, backbone


def full_split(catalog):
    return SplitSpec(mode="fully", seed=0,
                     train_ids=tuple(e.video_id for e in catalog),
                     test_ids=(), visible_labels=VISIBLE_LABELS_BY_MODE["fully"])


def small_model(seed=1):
    return SegmentModel.create(
        ModelConfig(input_channels=128, hidden_channels=4, trunk_dims=(16, 8)),
        seed=seed,
    )


def test_build_examples_counts(planted):
    catalog, backbone = planted
    examples = build_examples(full_split(catalog), catalog, SegmentConfig(), backbone)
    # 160-frame videos -> 2 segments each
    assert len(examples) == 2 * len(catalog)
    ex = examples[0]
    assert ex.features.shape == (5, 4, 4, 128)
    assert ex.frame_targets.shape == (80,)
    assert ex.mask.all()
    assert ex.category_target.sum() == 1


def test_build_examples_padding_mask(planted, tmp_path):
    catalog, backbone = planted
    from ctxvad.datamodel import FrameLabelTrack, VideoEntry
    from ctxvad.videopipe import feature_path, write_feature_file

    labels = np.zeros(90, dtype=np.int8)
    labels[30:51] = 1
    entry = VideoEntry("short", "Crash", 90, FrameLabelTrack("short", labels))
    write_feature_file(feature_path(tmp_path, "short"),
                       np.zeros((6, 2048), dtype=np.float32))
    bb = BackboneSpec(kind="import_rgb_flow", feature_root=str(tmp_path))
    split = SplitSpec(mode="fully", seed=0, train_ids=("short",), test_ids=())
    examples = build_examples(split, [entry], SegmentConfig(), bb)
    assert len(examples) == 2
    assert examples[1].mask.sum() == 10
    assert (examples[1].frame_targets[10:] == 0).all()
    # labels 30..50 land in the first segment's targets
    assert examples[0].frame_targets[30:51].all()
    assert examples[0].frame_targets.sum() == 21


def test_build_examples_rejects_weak_split(planted):
    catalog, backbone = planted
    split = SplitSpec(mode="weakly", seed=0,
                      train_ids=tuple(e.video_id for e in catalog), test_ids=())
    with pytest.raises(UsageError, match="weakly"):
        build_examples(split, catalog, SegmentConfig(), backbone)


def test_train_determinism(planted):
    catalog, backbone = planted
    examples = build_examples(full_split(catalog), catalog, SegmentConfig(), backbone)
    cfg = TrainConfig(max_epochs=2, batch_size=8, seed=5)
    ckpts = []
    for _ in range(2):
        model = small_model(seed=2)
        ckpts.append(train(cfg, examples, model))
    for name in ckpts[0].arrays:
        assert np.array_equal(ckpts[0].arrays[name], ckpts[1].arrays[name]), name
    for name in ckpts[0].moments:
        assert np.array_equal(ckpts[0].moments[name], ckpts[1].moments[name]), name


def test_train_loss_decreases_and_logs(planted, tmp_path):
    catalog, backbone = planted
    examples = build_examples(full_split(catalog), catalog, SegmentConfig(), backbone)
    log = tmp_path / "train.log"
    model = small_model()
    train(TrainConfig(max_epochs=10, batch_size=8, seed=0, learning_rate=1e-3),
          examples, model, log_path=log)
    records = [json.loads(line) for line in log.read_text().splitlines()]
    assert len(records) == 10
    assert records[-1]["mean_loss"] < records[0]["mean_loss"]
    assert set(records[0]) >= {"epoch", "mean_loss", "train_auc", "train_acc",
                               "wall_time"}


def test_train_empty_examples():
    with pytest.raises(UsageError):
        train(TrainConfig(max_epochs=1), [], small_model())


def test_score_head_untouched_when_lambda2_zero(planted):
    catalog, backbone = planted
    examples = build_examples(full_split(catalog), catalog, SegmentConfig(), backbone)
    model = small_model()
    before = model.head_params.arrays["w_score"].copy()
    b_before = model.head_params.arrays["b_score"].copy()
    cfg = TrainConfig(max_epochs=2, batch_size=8, seed=0, weight_decay=0.0,
                      loss=LossConfig(lambda1=1.0, lambda2=0.0))
    train(cfg, examples, model)
    # no loss gradient reaches the score output layer; only weight decay could
    # move it, and decay is off here
    assert np.array_equal(model.head_params.arrays["w_score"], before)
    assert np.array_equal(model.head_params.arrays["b_score"], b_before)


def test_predict_video_lengths(planted, tmp_path):
    catalog, backbone = planted
    model = small_model()
    entry = catalog[0]
    track, category = predict_video(entry, model, SegmentConfig(), backbone)
    assert track.shape == (entry.frame_count,)
    assert ((track > 0) & (track < 1)).all()
    assert category in CATEGORIES

    from ctxvad.datamodel import FrameLabelTrack, VideoEntry
    from ctxvad.videopipe import feature_path, write_feature_file

    write_feature_file(feature_path(tmp_path, "v90"),
                       np.zeros((6, 2048), dtype=np.float32))
    bb = BackboneSpec(kind="import_rgb_flow", feature_root=str(tmp_path))
    e90 = VideoEntry("v90", "Fire", 90,
                     FrameLabelTrack("v90", np.zeros(90, dtype=np.int8)))
    track90, _ = predict_video(e90, model, SegmentConfig(), bb)
    assert track90.shape == (90,)


def test_predict_category_mean_aggregation(planted):
    catalog, backbone = planted
    model = small_model()
    entry = next(e for e in catalog if e.frame_count == 160)
    from ctxvad.videopipe import segment_feature_grids

    grids = segment_feature_grids(entry.video_id, entry.frame_count,
                                  SegmentConfig(), backbone)
    outputs = model.forward(grids.astype(np.float32))
    expected = CATEGORIES[int(np.argmax(outputs.class_probs.mean(axis=0)))]
    _, got = predict_video(entry, model, SegmentConfig(), backbone)
    assert got == expected


def test_checkpoint_round_trip(planted, tmp_path):
    catalog, backbone = planted
    examples = build_examples(full_split(catalog), catalog, SegmentConfig(), backbone)
    model = small_model()
    ckpt = train(TrainConfig(max_epochs=2, batch_size=8, seed=0), examples, model)
    path = tmp_path / "model.ckpt"
    ckpt.save(path)
    loaded = Checkpoint.load(path)
    restored = loaded.to_model()
    entry = catalog[0]
    before, cat_before = predict_video(entry, model, SegmentConfig(), backbone)
    after, cat_after = predict_video(entry, restored, SegmentConfig(), backbone)
    assert np.array_equal(before, after)
    assert cat_before == cat_after
    assert loaded.epoch == 2
    assert loaded.train_config_snapshot["batch_size"] == 8
    for name in ckpt.moments:
        assert np.array_equal(ckpt.moments[name], loaded.moments[name])


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(ValidationError):
        Checkpoint.load(path)


def test_non_finite_loss_aborts(planted):
    catalog, backbone = planted
    examples = build_examples(full_split(catalog), catalog, SegmentConfig(), backbone)
    model = small_model()
    # a poisoned parameter propagates NaN into the loss
    model.head_params.arrays["b_class"][0] = np.float32(np.nan)
    with pytest.raises(ValidationError, match="epoch 1"):
        train(TrainConfig(max_epochs=1, batch_size=8, seed=0), examples, model)
