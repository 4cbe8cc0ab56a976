import numpy
import pytest
import scipy.sparse
import krp_sketch.blocks.structured as blocks
import krp_sketch.errors
import krp_sketch.sketch.ledger
import krp_sketch.sketch.streams


def random_block_matrix(rng, terms=None):
    p, q, m, n = (int(v) for v in rng.integers(1, 5, size=4))
    terms = terms or int(rng.integers(1, 4))
    patterns = [(rng.random((p, q)) < 0.5).astype(float) for _ in range(terms)]
    mats = [rng.standard_normal((m, n)) for _ in range(terms)]
    return blocks.BlockStructuredMatrix(patterns, mats, (p, q), (m, n))


def test_structured_sketch_matches_dense_product():
    rng = numpy.random.default_rng(0)
    for seed in range(50):
        m = random_block_matrix(rng)
        ell = int(rng.integers(1, 6))
        sketch = krp_sketch.sketch.streams.draw_krp(m.col_dims, ell, krp_sketch.sketch.streams.SketchConfig(seed=seed))
        expected = blocks.materialize_block(m) @ sketch.materialize()
        numpy.testing.assert_allclose(blocks.structured_sketch(m, sketch), expected, rtol=1e-12, atol=1e-12)


def test_as_pattern_forms():
    dense = numpy.array([[1, 0], [0, 1]])
    coords = blocks.as_pattern([(0, 0), (1, 1)], shape=(2, 2))
    sparse = blocks.as_pattern(scipy.sparse.eye(2))
    for pattern in (blocks.as_pattern(dense), coords, sparse):
        numpy.testing.assert_array_equal(pattern.toarray(), dense)
    with pytest.raises(krp_sketch.errors.ParameterError):
        blocks.as_pattern(numpy.array([[2.0, 0.0]]))
    with pytest.raises(krp_sketch.errors.ShapeError):
        blocks.as_pattern([(0, 1)])


def test_constructor_checks_shapes():
    with pytest.raises(krp_sketch.errors.ShapeError):
        blocks.BlockStructuredMatrix([numpy.eye(2)], [], (2, 2), (3, 3))
    with pytest.raises(krp_sketch.errors.ShapeError):
        blocks.BlockStructuredMatrix([numpy.eye(2)], [numpy.ones((3, 2))], (2, 2), (3, 3))
    with pytest.raises(krp_sketch.errors.ShapeError):
        blocks.BlockStructuredMatrix.from_terms([])


def test_from_terms_and_transpose():
    rng = numpy.random.default_rng(1)
    e = numpy.array([[0, 1, 1], [1, 0, 0]])
    b = rng.standard_normal((4, 5))
    m = blocks.BlockStructuredMatrix.from_terms([(e, b)])
    assert m.shape == (8, 15) and m.terms == 1
    numpy.testing.assert_array_equal(m.materialize(), numpy.kron(e, b))
    numpy.testing.assert_array_equal(m.transpose().materialize(), numpy.kron(e, b).T)


def test_matmul_matches_materialized():
    rng = numpy.random.default_rng(2)
    m = random_block_matrix(rng, terms=3)
    x = rng.standard_normal((m.shape[1], 4))
    numpy.testing.assert_allclose(m.matmul(x), m.materialize() @ x, rtol=1e-12, atol=1e-12)
    with pytest.raises(krp_sketch.errors.ShapeError):
        m.matmul(numpy.ones((m.shape[1] + 1, 2)))


def test_sketch_rejects_mismatched_dims():
    m = blocks.BlockStructuredMatrix.from_terms([(numpy.eye(2), numpy.ones((3, 4)))])
    sketch = krp_sketch.sketch.streams.draw_krp((4, 2), 3, krp_sketch.sketch.streams.SketchConfig())
    with pytest.raises(krp_sketch.errors.ShapeError):
        blocks.structured_sketch(m, sketch)


def test_structured_sketch_flops_below_dense():
    rng = numpy.random.default_rng(3)
    m = blocks.BlockStructuredMatrix([scipy.sparse.eye(20)], [rng.standard_normal((10, 10))], (20, 20), (10, 10))
    cfg = krp_sketch.sketch.streams.SketchConfig()
    sketch = krp_sketch.sketch.streams.draw_krp(m.col_dims, 5, cfg)
    counter = krp_sketch.sketch.ledger.FlopCounter()
    blocks.structured_sketch(m, sketch, flops=counter)
    assert 0 < counter.total < blocks.dense_sketch_flops(m, 5) / 10


def test_materialize_respects_cap():
    m = blocks.BlockStructuredMatrix.from_terms([(numpy.eye(3), numpy.ones((3, 3)))])
    with pytest.raises(krp_sketch.errors.MemoryCapError):
        blocks.materialize_block(m, cap=80)
    assert blocks.materialize_block(m, cap=81).shape == (9, 9)


def random_multilevel(rng):
    level_shapes = [(2, 3), (3, 2)]
    levels = [[(rng.random(s) < 0.6).astype(float) for _ in range(2)] for s in level_shapes]
    leaves = {(0, 0): rng.standard_normal((2, 4)), (1, 0): rng.standard_normal((2, 4)), (1, 1): rng.standard_normal((2, 4))}
    return blocks.MultilevelBlockMatrix(levels, leaves, (2, 4))


def test_multilevel_sketch_and_matmul():
    rng = numpy.random.default_rng(4)
    m = random_multilevel(rng)
    assert m.row_dims == (2, 3, 2) and m.col_dims == (3, 2, 4)
    assert m.shape == (12, 24)
    dense = m.materialize()
    sketch = krp_sketch.sketch.streams.draw_krp(m.col_dims, 5, krp_sketch.sketch.streams.SketchConfig(seed=4))
    numpy.testing.assert_allclose(blocks.multilevel_sketch(m, sketch), dense @ sketch.materialize(), rtol=1e-12, atol=1e-12)
    x = rng.standard_normal((24, 3))
    numpy.testing.assert_allclose(m.matmul(x), dense @ x, rtol=1e-12, atol=1e-12)
    numpy.testing.assert_allclose(m.transpose().materialize(), dense.T)


def test_multilevel_rejects_bad_leaf():
    with pytest.raises(krp_sketch.errors.ShapeError):
        blocks.MultilevelBlockMatrix([[numpy.eye(2)]], {(1,): numpy.ones((2, 2))}, (2, 2))
    with pytest.raises(krp_sketch.errors.ShapeError):
        blocks.MultilevelBlockMatrix([], {}, (2, 2))


def low_rank_block_matrix(rng):
    g = rng.standard_normal((5, 2)) @ rng.standard_normal((2, 5))
    h = numpy.outer(rng.standard_normal(5), rng.standard_normal(5))
    e = numpy.zeros((3, 3))
    e[0, 2] = 1.0
    return blocks.BlockStructuredMatrix([numpy.ones((3, 3)), e], [g, h], (3, 3), (5, 5))


@pytest.mark.parametrize("kind", ["krp", "gaussian"])
def test_single_view_block_recovers_low_rank(kind):
    m = low_rank_block_matrix(numpy.random.default_rng(5))
    dense = m.materialize()
    t = blocks.single_view_block(m, 3, 5, 8, cfg=krp_sketch.sketch.streams.SketchConfig(seed=5), kind=kind)
    assert numpy.linalg.norm(t.full() - dense) <= 1e-8 * numpy.linalg.norm(dense)


def test_single_view_block_parameters():
    m = low_rank_block_matrix(numpy.random.default_rng(6))
    with pytest.raises(krp_sketch.errors.ParameterError):
        blocks.single_view_block(m, 2, 6, 5)
    with pytest.raises(krp_sketch.errors.ParameterError):
        blocks.single_view_block(m, 2, 4, kind="fourier")
    cfg = krp_sketch.sketch.streams.SketchConfig()
    blocks.single_view_block(m, 2, 4, cfg=cfg)
    assert cfg.ledger.total == 4 * (3 + 5) + 6 * (3 + 5)


def test_nystrom_block_recovers_psd():
    rng = numpy.random.default_rng(7)
    g = rng.standard_normal((4, 2))
    h = rng.standard_normal(4)
    m = blocks.BlockStructuredMatrix([numpy.ones((3, 3)), numpy.eye(3)], [g @ g.T, numpy.outer(h, h)], (3, 3), (4, 4))
    dense = m.materialize()
    sketch = krp_sketch.sketch.streams.draw_krp(m.col_dims, 7, krp_sketch.sketch.streams.SketchConfig(seed=7))
    approx = blocks.nystrom_block(m, sketch)
    assert numpy.linalg.norm(approx.full() - dense) <= 1e-8 * numpy.linalg.norm(dense)
