import numpy
import pytest
import krp_sketch.errors
import krp_sketch.sketch.streams
import krp_sketch.theory.embedding as embedding


def test_distortion_of_exact_isometry():
    sketch = krp_sketch.sketch.streams.KrpSketch([numpy.eye(4) * 2.0])
    w = numpy.eye(4)[:, :2]
    assert embedding.embedding_distortion(sketch, w) == pytest.approx(0.0, abs=1e-15)


def test_zero_tolerance_never_succeeds():
    assert embedding.embedding_check(2, (4, 4), 6, 0.0, 10) == 0.0


def test_frequency_grows_with_sketch_size():
    small = embedding.embedding_check(2, (8, 8), 4, 0.2, 50, krp_sketch.sketch.streams.SketchConfig(seed=1))
    large = embedding.embedding_check(2, (8, 8), 400, 0.5, 50, krp_sketch.sketch.streams.SketchConfig(seed=1))
    assert small <= 0.5
    assert large >= 0.9


def test_reproducible_and_counted():
    cfg = krp_sketch.sketch.streams.SketchConfig(seed=3)
    first = embedding.embedding_check(2, (3, 5), 20, 0.5, 5, cfg)
    assert cfg.ledger.total == 15 * 2 + 5 * 20 * (3 + 5)
    assert embedding.embedding_check(2, (3, 5), 20, 0.5, 5, krp_sketch.sketch.streams.SketchConfig(seed=3)) == first


def test_sketch_larger_than_ambient_space():
    frequency = embedding.embedding_check(2, (2, 2), 10, 0.9, 5)
    assert 0.0 <= frequency <= 1.0


def test_argument_checks():
    for args in ((0, (4, 4), 5, 0.5, 3), (17, (4, 4), 5, 0.5, 3), (2, (4, 4), 0, 0.5, 3), (2, (4, 4), 5, 0.5, 0), (2, (4, 4), 5, -0.1, 3)):
        with pytest.raises(krp_sketch.errors.ParameterError):
            embedding.embedding_check(*args)


@pytest.mark.slow
def test_dense_gaussian_embedding():
    assert embedding.embedding_check(1, (64,), 2000, 0.2, 100) >= 0.99


@pytest.mark.slow
def test_krp_embedding_frequency():
    assert embedding.embedding_check(4, (16, 16), 2000, 0.5, 200) >= 0.95
