import numpy as np
import pytest

from visuotactile.dataset.episodes import (decode_meta, encode_meta, format_id, list_episodes,
                                           read_dataset, read_episode, write_episode)
from visuotactile.dataset.records import EpisodeRecord
from helpers import fake_record


def test_format_id():
    assert format_id(7) == "000007"
    with pytest.raises(ValueError):
        format_id(-1)


def test_meta_roundtrip():
    rec = fake_record()
    text = encode_meta(rec)
    assert text.splitlines()[-1] == "frames=3"
    meta, rest = decode_meta(text)
    assert meta == rec.meta
    assert rest["resting"] == "1" and rest["frames_to_rest"] == "12"


def test_meta_rejects_multiline():
    rec = fake_record()
    rec.meta["object"] = "a\nb"
    with pytest.raises(ValueError):
        encode_meta(rec)


@pytest.mark.parametrize("perturb", [False, True])
def test_write_read_roundtrip(tmp_path, perturb):
    rec = fake_record(perturb=perturb)
    eid = write_episode(rec, tmp_path)
    assert eid == "000000"
    files = sorted(p.name for p in (tmp_path / eid).iterdir())
    assert "frames.tns" in files and "meta" in files and "frame_2_tactile.png" in files
    back = read_episode(tmp_path / eid)
    for name in ("visual", "tactile", "pose", "contact_mask", "object_mask", "contact_active"):
        assert np.array_equal(getattr(back, name), getattr(rec, name)), name
    assert back.meta == rec.meta
    assert np.array_equal(back.rest.final_pose, rec.rest.final_pose)
    if perturb:
        assert np.array_equal(back.condition, rec.condition)
    else:
        assert back.condition is None


def test_sequential_ids_and_no_overwrite(tmp_path):
    write_episode(fake_record(seed=0), tmp_path)
    write_episode(fake_record(seed=1), tmp_path)
    assert list_episodes(tmp_path) == ["000000", "000001"]
    before = (tmp_path / "000001" / "frames.tns").read_bytes()
    with pytest.raises(FileExistsError):
        write_episode(fake_record(seed=2), tmp_path, episode_id=1)
    assert (tmp_path / "000001" / "frames.tns").read_bytes() == before
    recs = read_dataset(tmp_path)
    assert [r.meta["seed"] for r in recs] == [0, 1]


def test_byte_identical_rewrite(tmp_path):
    write_episode(fake_record(), tmp_path / "a")
    write_episode(fake_record(), tmp_path / "b")
    for name in ("meta", "frames.tns", "frame_0_visual.png"):
        assert (tmp_path / "a/000000" / name).read_bytes() == (tmp_path / "b/000000" / name).read_bytes()


def test_record_validation():
    rec = fake_record()
    with pytest.raises(ValueError):
        EpisodeRecord(rec.meta, rec.visual, rec.tactile, rec.pose[:, :6], rec.contact_mask,
                      rec.object_mask, rec.contact_active, rec.rest)
    with pytest.raises(ValueError):
        EpisodeRecord(rec.meta, rec.visual, rec.tactile, rec.pose, rec.contact_mask,
                      rec.object_mask, rec.contact_active, rec.rest, condition=np.zeros(3))


def test_zero_frame_record_rejected():
    rec = fake_record()
    with pytest.raises(ValueError):
        EpisodeRecord(rec.meta, rec.visual[:0], rec.tactile[:0], rec.pose[:0], rec.contact_mask[:0],
                      rec.object_mask[:0], rec.contact_active[:0], rec.rest)
