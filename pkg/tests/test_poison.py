import numpy as np
import pytest

from depthpoison.dataset import DatasetIndex
from depthpoison.depth_edit import compute_completion_region
from depthpoison.errors import DatasetError, ValidationError
from depthpoison.io import (
    read_depth_png,
    read_mask_png,
    sha256_file,
    tree_digest,
    write_depth_png,
    write_image_png,
)
from depthpoison.poison import (
    PoisonConfig,
    PoisonManifest,
    WeatherSpec,
    poison_dataset,
    replay_poisoned_sample,
    select_poison_set,
    verify_dataset,
)
from depthpoison.trigger import TriggerPatch


@pytest.fixture(scope="module")
def poisoned(tmp_path_factory, clean_dataset):
    out = tmp_path_factory.mktemp("poisoned")
    config = PoisonConfig(rate=0.2, seed=31, patch=TriggerPatch.white(16))
    index, manifest = poison_dataset(clean_dataset, config, out)
    return index, manifest, config


def test_select_rate_zero_empty(clean_dataset):
    assert select_poison_set(clean_dataset, 0.0, 1) == []


def test_select_exact_counts(clean_dataset):
    assert len(select_poison_set(clean_dataset, 0.10, 1)) == 3
    assert len(select_poison_set(clean_dataset, 0.2, 1)) == 6
    assert len(select_poison_set(clean_dataset, 1.0, 1)) == 30


def test_select_deterministic_and_seed_sensitive(clean_dataset):
    a = select_poison_set(clean_dataset, 0.3, 5)
    assert a == select_poison_set(clean_dataset, 0.3, 5)
    assert a != select_poison_set(clean_dataset, 0.3, 6)
    assert a == sorted(a)


def test_select_rejects_invalid_rate(clean_dataset):
    with pytest.raises(ValidationError):
        select_poison_set(clean_dataset, 1.5, 0)


def test_rate_zero_poison_is_byte_identical(tmp_path, clean_dataset):
    out = tmp_path / "noop"
    config = PoisonConfig(rate=0.0, seed=1)
    _, manifest = poison_dataset(clean_dataset, config, out)
    assert manifest.entries == []
    for s in clean_dataset.samples:
        assert sha256_file(clean_dataset.image_path(s)) == sha256_file(out / s.image)
        assert sha256_file(clean_dataset.depth_path(s)) == sha256_file(out / s.depth)


def test_poisoned_count_and_clean_passthrough(clean_dataset, poisoned):
    index, manifest, _ = poisoned
    assert len(manifest.entries) == 6
    assert manifest.header["poisoned_count"] == 6
    poisoned_ids = {e["sample_id"] for e in manifest.entries}
    for s in clean_dataset.samples:
        if s.sample_id not in poisoned_ids:
            assert sha256_file(clean_dataset.image_path(s)) == sha256_file(index.root / s.image)
        else:
            assert sha256_file(clean_dataset.image_path(s)) != sha256_file(index.root / s.image)


def test_poisoned_depth_trichotomy(clean_dataset, poisoned):
    index, manifest, config = poisoned
    for entry in manifest.entries:
        s = clean_dataset.by_id(entry["sample_id"])
        mask = read_mask_png(clean_dataset.mask_path(s))
        clean_depth = read_depth_png(clean_dataset.depth_path(s))
        poisoned_depth = read_depth_png(index.root / s.depth)
        region = compute_completion_region(mask, config.region_radius)
        assert np.all(poisoned_depth[mask] == 0.0)
        elsewhere = ~(mask | region.bits)
        assert np.array_equal(poisoned_depth[elsewhere], clean_depth[elsewhere])
        assert np.all(poisoned_depth[region.bits] > 0)


def test_manifest_round_trip(tmp_path, poisoned):
    _, manifest, _ = poisoned
    path = tmp_path / "m.jsonl"
    manifest.save(path)
    back = PoisonManifest.load(path)
    assert back.header == manifest.header
    assert back.entries == manifest.entries


def test_manifest_replay_reproduces_files(clean_dataset, poisoned, tmp_path):
    index, manifest, config = poisoned
    for entry in manifest.entries[:3]:
        img, dep = replay_poisoned_sample(
            clean_dataset, entry["sample_id"], entry, manifest.header, config.patch
        )
        write_image_png(tmp_path / "img.png", img)
        write_depth_png(tmp_path / "dep.png", dep)
        assert sha256_file(tmp_path / "img.png") == entry["image_sha256"]
        assert sha256_file(tmp_path / "dep.png") == entry["depth_sha256"]


def test_poison_determinism(tmp_path, clean_dataset):
    cfg = lambda: PoisonConfig(rate=0.1, seed=8, patch=TriggerPatch.white(12))
    poison_dataset(clean_dataset, cfg(), tmp_path / "a")
    poison_dataset(clean_dataset, cfg(), tmp_path / "b")
    assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")


def test_poison_parallel_matches_serial(tmp_path, clean_dataset):
    cfg = lambda: PoisonConfig(rate=0.1, seed=8, patch=TriggerPatch.white(12))
    poison_dataset(clean_dataset, cfg(), tmp_path / "s", jobs=1)
    poison_dataset(clean_dataset, cfg(), tmp_path / "p", jobs=2)
    assert tree_digest(tmp_path / "s") == tree_digest(tmp_path / "p")


def test_verify_fresh_output_passes(poisoned):
    index, manifest, config = poisoned
    report = verify_dataset(index, manifest, patch=config.patch)
    assert report.ok
    assert report.passed == 30


def test_verify_detects_tampered_placement(tmp_path, clean_dataset, poisoned):
    index, manifest, _ = poisoned
    tampered = PoisonManifest(
        header=dict(manifest.header),
        entries=[dict(e) for e in manifest.entries],
    )
    entry = tampered.entries[0]
    entry["placement"] = dict(entry["placement"])
    entry["placement"]["anchor"] = [
        entry["placement"]["anchor"][0] + 9,
        entry["placement"]["anchor"][1] + 7,
    ]
    report = verify_dataset(index, tampered)
    bad = next(r for r in report.results if r["sample_id"] == entry["sample_id"])
    assert not bad["ok"]
    assert not bad["checks"]["locality"]


def test_verify_detects_flipped_depth_bit(tmp_path, clean_dataset):
    out = tmp_path / "flip"
    config = PoisonConfig(rate=0.1, seed=12, patch=TriggerPatch.white(12))
    index, manifest = poison_dataset(clean_dataset, config, out)
    entry = manifest.entries[0]
    s = clean_dataset.by_id(entry["sample_id"])
    mask = read_mask_png(clean_dataset.mask_path(s))
    depth = read_depth_png(out / s.depth)
    y, x = np.argwhere(mask)[0]
    depth[y, x] += 1.0 / 256.0  # one stored unit inside the mask
    write_depth_png(out / s.depth, depth)
    report = verify_dataset(index, manifest)
    bad = next(r for r in report.results if r["sample_id"] == entry["sample_id"])
    assert not bad["ok"]
    assert not bad["checks"]["trichotomy"]


def test_image_level_mode_uses_fixed_depth(tmp_path, clean_dataset):
    out = tmp_path / "img_mode"
    config = PoisonConfig(rate=0.2, seed=3, mode="image", patch=TriggerPatch.white(12))
    index, manifest = poison_dataset(clean_dataset, config, out)
    assert len(manifest.entries) == 6
    hashes = {sha256_file(out / clean_dataset.by_id(e["sample_id"]).depth) for e in manifest.entries}
    assert len(hashes) == 1  # one shared target depth map
    anchors = {tuple(e["placement"]["anchor"]) for e in manifest.entries}
    assert len(anchors) == 1  # fixed trigger position
    report = verify_dataset(index, manifest, patch=config.patch)
    assert report.ok


def test_weather_poisoning_runs_and_verifies(tmp_path, clean_dataset):
    out = tmp_path / "weather"
    config = PoisonConfig(
        rate=0.1, seed=4, patch=TriggerPatch.white(12), weather=WeatherSpec("fog", 2)
    )
    index, manifest = poison_dataset(clean_dataset, config, out)
    assert all(e["weather"]["kind"] == "fog" for e in manifest.entries)
    report = verify_dataset(index, manifest, patch=config.patch)
    assert report.ok


def test_weather_on_clean_flag(tmp_path, clean_dataset):
    out = tmp_path / "weather_all"
    config = PoisonConfig(
        rate=0.1, seed=4, patch=TriggerPatch.white(12),
        weather=WeatherSpec("snow", 3), weather_on_clean=True,
    )
    index, manifest = poison_dataset(clean_dataset, config, out)
    poisoned_ids = {e["sample_id"] for e in manifest.entries}
    clean_sample = next(s for s in clean_dataset.samples if s.sample_id not in poisoned_ids)
    # clean samples are weather-corrupted too, so no longer byte-identical
    assert sha256_file(clean_dataset.image_path(clean_sample)) != sha256_file(
        out / clean_sample.image
    )
    report = verify_dataset(index, manifest, patch=config.patch)
    assert report.ok


def test_strict_mode_raises_on_failure(tmp_path, clean_dataset):
    # a giant patch cannot fit a 96-px-tall frame, so every sample fails
    config = PoisonConfig(rate=0.1, seed=5, patch=TriggerPatch.white(150), strict=True)
    with pytest.raises(DatasetError, match="strict"):
        poison_dataset(clean_dataset, config, tmp_path / "strict")
    config_loose = PoisonConfig(rate=0.1, seed=5, patch=TriggerPatch.white(150), strict=False)
    _, manifest = poison_dataset(clean_dataset, config_loose, tmp_path / "loose")
    assert manifest.entries == []
    assert len(manifest.header["failures"]) == 3


def test_output_root_must_differ(clean_dataset):
    with pytest.raises(ValidationError):
        poison_dataset(clean_dataset, PoisonConfig(rate=0.0), clean_dataset.root)


def test_select_needs_enough_eligible(tmp_path, clean_dataset):
    # an index claiming masks exist but all empty
    root = tmp_path / "nomask"
    root.mkdir()
    (root / "images").mkdir()
    (root / "depth").mkdir()
    (root / "masks").mkdir()
    import shutil

    from depthpoison.io import write_mask_png

    samples = clean_dataset.samples[:5]
    for s in samples:
        shutil.copyfile(clean_dataset.image_path(s), root / s.image)
        shutil.copyfile(clean_dataset.depth_path(s), root / s.depth)
        write_mask_png(root / s.mask, np.zeros((96, 192), bool))
    idx = DatasetIndex(root=root, split="train", samples=list(samples))
    idx.save()
    with pytest.raises(DatasetError, match="non-empty masks"):
        select_poison_set(idx, 0.4, 0)
