import struct

import numpy as np
import pytest

from auxgan.data import (IMAGE_MAGIC, LABEL_MAGIC, GaussianMixtureSpec, IdxFile,
                         IdxParseError, LabeledBatch, load_mnist, minibatches,
                         read_idx, sample_mixture, synthetic_digits, write_idx,
                         write_synthetic_digit_files)


def _one_image_files(tmp_path, pixel=0, label=7):
    img = tmp_path / "images"
    lab = tmp_path / "labels"
    payload = np.full(28 * 28, pixel, dtype=np.uint8)
    write_idx(img, IdxFile(IMAGE_MAGIC, (1, 28, 28), payload))
    write_idx(lab, IdxFile(LABEL_MAGIC, (1,), np.array([label], dtype=np.uint8)))
    return img, lab


def test_idx_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    payload = rng.integers(0, 256, size=2 * 28 * 28).astype(np.uint8)
    path = tmp_path / "fixture"
    write_idx(path, IdxFile(IMAGE_MAGIC, (2, 28, 28), payload))
    back = read_idx(path)
    assert back.magic == IMAGE_MAGIC
    assert back.dims == (2, 28, 28)
    assert np.array_equal(back.payload, payload)


def test_idx_malformed_magic_reports_offset(tmp_path):
    path = tmp_path / "bad"
    path.write_bytes(struct.pack(">I", 0xDEADBEEF) + b"\x00" * 8)
    with pytest.raises(IdxParseError) as e:
        read_idx(path)
    assert e.value.offset == 0
    assert "offset" in str(e.value)


def test_idx_truncated_header(tmp_path):
    path = tmp_path / "short"
    path.write_bytes(struct.pack(">I", IMAGE_MAGIC) + struct.pack(">I", 1))
    with pytest.raises(IdxParseError) as e:
        read_idx(path)
    assert e.value.offset == 8


def test_idx_payload_length_mismatch(tmp_path):
    path = tmp_path / "trunc"
    header = struct.pack(">IIII", IMAGE_MAGIC, 1, 28, 28)
    path.write_bytes(header + b"\x00" * 100)  # needs 784
    with pytest.raises(IdxParseError) as e:
        read_idx(path)
    assert "784" in str(e.value)


def test_idx_empty_file(tmp_path):
    path = tmp_path / "empty"
    path.write_bytes(b"")
    with pytest.raises(IdxParseError):
        read_idx(path)


def test_idx_dims_payload_consistency():
    with pytest.raises(ValueError):
        IdxFile(IMAGE_MAGIC, (2, 28, 28), np.zeros(10, dtype=np.uint8))


def test_load_mnist_single_zero_image(tmp_path):
    img, lab = _one_image_files(tmp_path, pixel=0, label=7)
    batch = load_mnist(img, lab)
    assert batch.features.shape == (1, 784)
    assert (batch.features == 0.0).all()
    assert batch.labels.tolist() == [7]


def test_load_mnist_pixel_scaling(tmp_path):
    img, lab = _one_image_files(tmp_path, pixel=255)
    batch = load_mnist(img, lab)
    assert (batch.features == 1.0).all()


def test_load_mnist_count_mismatch(tmp_path):
    img = tmp_path / "images"
    lab = tmp_path / "labels"
    write_idx(img, IdxFile(IMAGE_MAGIC, (2, 28, 28), np.zeros(2 * 784, dtype=np.uint8)))
    write_idx(lab, IdxFile(LABEL_MAGIC, (3,), np.zeros(3, dtype=np.uint8)))
    with pytest.raises(IdxParseError) as e:
        load_mnist(img, lab)
    assert e.value.offset == 4


def test_load_mnist_swapped_files_rejected(tmp_path):
    img, lab = _one_image_files(tmp_path)
    with pytest.raises(IdxParseError):
        load_mnist(lab, img)


def test_labeled_batch_validation():
    with pytest.raises(ValueError):
        LabeledBatch(features=np.zeros((0, 2)), labels=np.zeros(0, dtype=int))
    with pytest.raises(ValueError):
        LabeledBatch(features=np.zeros((2, 2)), labels=np.zeros(3, dtype=int))
    with pytest.raises(ValueError):
        LabeledBatch(features=np.zeros((2, 2)), labels=np.array([0, -1]))


def test_ring_layout_separation():
    spec = GaussianMixtureSpec.ring(n_classes=4)
    dists = [np.linalg.norm(spec.means[i] - spec.means[j])
             for i in range(4) for j in range(i + 1, 4)]
    assert min(dists) > 6.0 * spec.stddev


def test_mixture_zero_stddev_yields_exact_means():
    spec = GaussianMixtureSpec.ring(n_classes=4, stddev=0.0)
    batch = sample_mixture(spec, np.random.default_rng(1), 64)
    assert np.array_equal(batch.features, spec.means[batch.labels])


def test_mixture_moments():
    spec = GaussianMixtureSpec.ring(n_classes=4)
    batch = sample_mixture(spec, np.random.default_rng(2), 100_000)
    for c in range(4):
        got = batch.features[batch.labels == c].mean(axis=0)
        assert np.abs(got - spec.means[c]).max() < 0.02


def test_mixture_label_histogram_uniform():
    spec = GaussianMixtureSpec.ring(n_classes=4)
    batch = sample_mixture(spec, np.random.default_rng(3), 100_000)
    counts = np.bincount(batch.labels, minlength=4)
    sigma = np.sqrt(100_000 * 0.25 * 0.75)
    assert np.abs(counts - 25_000).max() <= 3.0 * sigma


def test_mixture_deterministic_per_seed():
    spec = GaussianMixtureSpec.ring(n_classes=4)
    a = sample_mixture(spec, np.random.default_rng(4), 100)
    b = sample_mixture(spec, np.random.default_rng(4), 100)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.labels, b.labels)


def _dataset(n, rng):
    return LabeledBatch(features=rng.normal(size=(n, 3)),
                        labels=rng.integers(0, 4, size=n))


def test_minibatches_drops_partial_tail():
    data = _dataset(100, np.random.default_rng(5))
    batches = list(minibatches(data, 32, np.random.default_rng(6)))
    assert len(batches) == 3
    assert all(len(b) == 32 for b in batches)


def test_minibatches_same_seed_same_order():
    data = _dataset(64, np.random.default_rng(7))
    a = [b.features for b in minibatches(data, 16, np.random.default_rng(8))]
    b = [b.features for b in minibatches(data, 16, np.random.default_rng(8))]
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_minibatches_partition_the_dataset():
    data = _dataset(96, np.random.default_rng(9))
    seen = np.concatenate([b.features for b in minibatches(data, 32, np.random.default_rng(10))])
    assert seen.shape == data.features.shape
    order = np.lexsort(seen.T)
    expected_order = np.lexsort(data.features.T)
    assert np.array_equal(seen[order], data.features[expected_order])


def test_minibatches_validation():
    data = _dataset(10, np.random.default_rng(11))
    with pytest.raises(ValueError):
        list(minibatches(data, 0, np.random.default_rng(0)))
    with pytest.raises(ValueError):
        list(minibatches(data, 11, np.random.default_rng(0)))


def test_synthetic_digits_shapes_and_labels():
    images, labels = synthetic_digits(200, np.random.default_rng(12))
    assert images.shape == (200, 28, 28) and images.dtype == np.uint8
    assert labels.min() >= 0 and labels.max() <= 9


def test_synthetic_corpus_round_trip_and_determinism(tmp_path):
    paths_a = write_synthetic_digit_files(tmp_path / "a", n_train=50, n_test=20)
    paths_b = write_synthetic_digit_files(tmp_path / "b", n_train=50, n_test=20)
    for key in paths_a:
        bytes_a = open(paths_a[key], "rb").read()
        bytes_b = open(paths_b[key], "rb").read()
        assert bytes_a == bytes_b
    train = load_mnist(paths_a["train_images"], paths_a["train_labels"])
    assert train.features.shape == (50, 784)
    assert train.features.min() >= 0.0 and train.features.max() <= 1.0
    assert train.labels.max() <= 9
