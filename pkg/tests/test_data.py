import numpy as np
import pytest
from PIL import Image as PILImage

from conftest import raw_image
from sitadda.data import (
    Dataset,
    Sample,
    Split,
    load_images,
    map_dataset,
    read_image_file,
    split_dataset,
    split_sizes,
    write_image_file,
)
from sitadda.errors import DataError
from sitadda.image import Domain


def make_samples(n):
    rng = np.random.default_rng(0)
    return [
        Sample(id=f"s{i:03d}", input=raw_image(rng.uniform(0, 255, (8, 8))),
               target=raw_image(rng.uniform(0, 255, (8, 8))))
        for i in range(n)
    ]


class TestSplit:
    def test_100_gives_70_15_15(self):
        assert split_sizes(100, (7.0, 1.5, 1.5)) == (70, 15, 15)

    def test_10_gives_7_1_2(self):
        assert split_sizes(10, (7.0, 1.5, 1.5)) == (7, 1, 2)

    def test_partition_disjoint_exhaustive(self):
        samples = make_samples(23)
        train, val, test = split_dataset(samples, seed=3)
        ids = [s.id for s in train.samples] + [s.id for s in val.samples] + [s.id for s in test.samples]
        assert sorted(ids) == sorted(s.id for s in samples)
        assert len(set(ids)) == 23
        assert (train.split, val.split, test.split) == (Split.TRAIN, Split.VAL, Split.TEST)

    def test_seed_deterministic(self):
        samples = make_samples(12)
        a = split_dataset(samples, seed=9)
        b = split_dataset(samples, seed=9)
        for da, db in zip(a, b):
            assert [s.id for s in da.samples] == [s.id for s in db.samples]
        c = split_dataset(samples, seed=10)
        assert any(
            [s.id for s in da.samples] != [s.id for s in dc.samples]
            for da, dc in zip(a, c)
        )

    def test_too_few_samples(self):
        with pytest.raises(DataError):
            split_dataset(make_samples(2))


class TestDatasetInvariants:
    def test_duplicate_ids_rejected(self):
        s = make_samples(3)
        with pytest.raises(DataError):
            Dataset((s[0], s[0], s[1]))

    def test_source_requires_targets(self):
        s = Sample(id="a", input=raw_image(np.zeros((4, 4))))
        with pytest.raises(DataError):
            Dataset((s,), domain_tag="source")
        # target-domain datasets may be unlabeled
        Dataset((s,), domain_tag="target")

    def test_pairs_accessor(self):
        ds = Dataset(tuple(make_samples(4)))
        assert len(ds.pairs()) == 4


class TestImageFiles:
    def test_roundtrip_8bit_png(self, tmp_path, rng):
        img = raw_image(np.round(rng.uniform(0, 255, (16, 16))))
        path = tmp_path / "x.png"
        write_image_file(path, img)
        back = read_image_file(path)
        assert np.array_equal(back.values, img.values)

    def test_16bit_png_fixed_scaling(self, tmp_path):
        arr = np.array([[0, 257, 65535], [514, 1028, 32639]], dtype=np.uint16)
        pil = PILImage.fromarray(arr, mode="I;16")
        path = tmp_path / "deep.png"
        pil.save(path)
        back = read_image_file(path)
        assert back.values[0, 0] == 0.0
        assert back.values[0, 1] == pytest.approx(1.0)
        assert back.values[0, 2] == pytest.approx(255.0)
        assert back.values[1, 0] == pytest.approx(2.0)

    def test_unreadable_file(self, tmp_path):
        path = tmp_path / "bad.png"
        path.write_bytes(b"this is not a png")
        with pytest.raises(DataError):
            read_image_file(path)


class TestLoadImages:
    def fill_dir(self, root, n=4, with_targets=True, size=16):
        rng = np.random.default_rng(1)
        for i in range(n):
            write_image_file(root / f"img{i}_input.png", raw_image(rng.uniform(0, 255, (size, size))))
            if with_targets:
                write_image_file(root / f"img{i}_target.png", raw_image(rng.uniform(0, 255, (size, size))))

    def test_pairing_by_stem(self, tmp_path):
        self.fill_dir(tmp_path)
        ds = load_images(tmp_path)
        assert len(ds) == 4
        assert all(s.target is not None for s in ds.samples)
        assert [s.id for s in ds.samples] == [f"img{i}" for i in range(4)]

    def test_missing_target_is_pairing_error(self, tmp_path):
        self.fill_dir(tmp_path, n=2)
        (tmp_path / "img1_target.png").unlink()
        with pytest.raises(DataError):
            load_images(tmp_path)

    def test_target_domain_without_targets(self, tmp_path):
        self.fill_dir(tmp_path, with_targets=False)
        ds = load_images(tmp_path, domain_tag="target")
        assert all(s.target is None for s in ds.samples)

    def test_resize_applied(self, tmp_path):
        self.fill_dir(tmp_path, n=1, size=16)
        ds = load_images(tmp_path, resize_to=32)
        assert ds.samples[0].input.values.shape == (32, 32)

    def test_passthrough_at_target_size(self, tmp_path, rng):
        img = raw_image(np.round(rng.uniform(0, 255, (16, 16))))
        write_image_file(tmp_path / "a_input.png", img)
        write_image_file(tmp_path / "a_target.png", img)
        ds = load_images(tmp_path, resize_to=16)
        assert np.array_equal(ds.samples[0].input.values, img.values)

    def test_empty_dir(self, tmp_path):
        with pytest.raises(DataError):
            load_images(tmp_path)

    def test_missing_dir(self, tmp_path):
        with pytest.raises(DataError):
            load_images(tmp_path / "nope")


def test_map_dataset_applies_to_inputs_only():
    ds = Dataset(tuple(make_samples(2)))
    out = map_dataset(ds, lambda im: raw_image(np.zeros_like(im.values)))
    assert all(np.all(s.input.values == 0) for s in out.samples)
    assert all(np.any(s.target.values != 0) for s in out.samples)
