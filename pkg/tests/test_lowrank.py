import numpy
import pytest
import krp_sketch.applications.synthetic
import krp_sketch.errors
import krp_sketch.lowrank.tools as lowrank
import krp_sketch.sketch.streams
import krp_sketch.tensor.tools


def low_rank(rows, cols, r, seed):
    rng = numpy.random.default_rng(seed)
    return rng.standard_normal((rows, r)) @ rng.standard_normal((r, cols))


def best_error(m, r):
    s = numpy.linalg.svd(m, compute_uv=False)
    return float(numpy.sqrt(numpy.sum(s[r:] ** 2)))


@pytest.mark.parametrize("kind,dims", [("gaussian", None), ("krp", (5, 8))])
def test_randomized_svd_recovers_low_rank(kind, dims):
    m = low_rank(30, 40, 4, seed=1)
    cfg = krp_sketch.sketch.streams.SketchConfig(seed=2)
    t = lowrank.randomized_svd(m, 4, oversample=3, kind=kind, cfg=cfg, dims=dims)
    assert numpy.linalg.norm(t.full() - m) <= 1e-10 * numpy.linalg.norm(m)


def test_range_finder_full_rank_square():
    m = numpy.random.default_rng(3).standard_normal((12, 12))
    cfg = krp_sketch.sketch.streams.SketchConfig()
    t = lowrank.randomized_svd(m, 12, oversample=0, cfg=cfg)
    assert numpy.linalg.norm(t.full() - m) <= 1e-10 * numpy.linalg.norm(m)


def test_randomized_svd_never_beats_truncated_svd():
    rng = numpy.random.default_rng(4)
    for seed in range(30):
        m = rng.standard_normal((50, 40))
        t = lowrank.randomized_svd(m, 5, oversample=5, cfg=krp_sketch.sketch.streams.SketchConfig(seed=seed))
        assert numpy.linalg.norm(t.full() - m) >= best_error(m, 5) * (1 - 1e-12)


@pytest.mark.parametrize("kind,dims", [("gaussian", None), ("krp", (8, 8))])
def test_nested_prefixes_shrink_residual(kind, dims):
    sigma = krp_sketch.applications.synthetic.geometric_spectrum(64, 0.5)
    m = krp_sketch.applications.synthetic.spectrum_matrix(sigma, 64, 64, numpy.random.default_rng(10))
    sketch = lowrank.draw_sketch(64, 12, kind, krp_sketch.sketch.streams.SketchConfig(seed=11), dims=dims)
    previous = numpy.inf
    for ell in range(1, 13):
        q = krp_sketch.tensor.tools.orthonormal_basis(sketch.prefix(ell).apply_right(m))
        projector = q @ q.T
        assert numpy.linalg.norm(projector @ projector - projector, 2) <= 1e-12
        residual = lowrank.projection_residual(m, q)
        assert residual <= previous * (1 + 1e-10) + 1e-14
        previous = residual


def test_range_finder_rejects_oversized_sketch():
    m = numpy.ones((5, 8))
    with pytest.raises(krp_sketch.errors.ParameterError):
        lowrank.randomized_svd(m, 4, oversample=2)
    with pytest.raises(krp_sketch.errors.ParameterError):
        lowrank.randomized_svd(m, 0, oversample=2)


def test_range_finder_zero_matrix():
    t = lowrank.randomized_svd(numpy.zeros((6, 6)), 2, oversample=1)
    assert t.rank == 0


def test_unknown_sketch_kind():
    with pytest.raises(krp_sketch.errors.ParameterError):
        lowrank.draw_sketch(6, 2, "fourier", krp_sketch.sketch.streams.SketchConfig())
    with pytest.raises(krp_sketch.errors.ShapeError):
        lowrank.draw_sketch(6, 2, "krp", krp_sketch.sketch.streams.SketchConfig(), dims=(2, 2))


@pytest.mark.parametrize("kind", ["gaussian", "krp"])
def test_single_view_recovers_rank_two(kind):
    m = low_rank(20, 24, 2, seed=5)
    cfg = krp_sketch.sketch.streams.SketchConfig(seed=6)
    dims_right = (4, 6) if kind == "krp" else None
    dims_left = (4, 5) if kind == "krp" else None
    t = lowrank.single_view_svd(m, 2, 4, 6, kind, cfg, dims_right, dims_left)
    assert numpy.linalg.norm(t.full() - m) <= 1e-9 * numpy.linalg.norm(m)


def test_single_view_zero_matrix():
    m = numpy.zeros((8, 9))
    cfg = krp_sketch.sketch.streams.SketchConfig()
    psi = lowrank.draw_sketch(8, 4, "gaussian", cfg, context="psi")
    omega = lowrank.draw_sketch(9, 3, "gaussian", cfg)
    q, w = lowrank.single_view(omega.apply_right(m), psi.apply_left(m), psi)
    assert not w.any()
    assert lowrank.factored_svd(q, w, 2).rank == 0


def test_single_view_requires_ordered_sizes():
    m = low_rank(10, 10, 2, seed=7)
    with pytest.raises(krp_sketch.errors.ParameterError):
        lowrank.single_view_svd(m, 2, 5, 4)
    with pytest.raises(krp_sketch.errors.ParameterError):
        lowrank.single_view_svd(m, 2, 11, 11)


@pytest.mark.parametrize("ell_r,ell_l", [(2, 2), (4, 4)])
def test_single_view_equal_sketch_sizes(ell_r, ell_l):
    m = low_rank(20, 24, 2, seed=5)
    cfg = krp_sketch.sketch.streams.SketchConfig(seed=7)
    t = lowrank.single_view_svd(m, 2, ell_r, ell_l, cfg=cfg)
    assert numpy.linalg.norm(t.full() - m) <= 1e-8 * numpy.linalg.norm(m)


def test_single_view_warns_on_rank_deficient_projection():
    m = low_rank(10, 10, 3, seed=8)
    cfg = krp_sketch.sketch.streams.SketchConfig()
    omega = lowrank.draw_sketch(10, 3, "gaussian", cfg)
    psi = krp_sketch.sketch.streams.DenseSketch(numpy.zeros((10, 4)))
    psi.matrix[0, 0] = 1.0
    with pytest.warns(krp_sketch.errors.RankDeficiencyWarning):
        lowrank.single_view(omega.apply_right(m), psi.apply_left(m), psi)


def test_single_view_residual_close_to_randomized_svd():
    rng = numpy.random.default_rng(9)
    spectrum = krp_sketch.applications.synthetic.geometric_spectrum(60, 0.7)
    ratios = []
    for seed in range(20):
        m = krp_sketch.applications.synthetic.spectrum_matrix(spectrum, 60, 60, rng)
        cfg = krp_sketch.sketch.streams.SketchConfig(seed=seed)
        two_pass = lowrank.randomized_svd(m, 5, oversample=5, cfg=cfg)
        one_pass = lowrank.single_view_svd(m, 5, 10, 15, cfg=cfg)
        ratios.append(numpy.linalg.norm(one_pass.full() - m) / numpy.linalg.norm(two_pass.full() - m))
    assert numpy.median(ratios) <= 10.0


def test_nystrom_identity():
    cfg = krp_sketch.sketch.streams.SketchConfig()
    sketch = lowrank.draw_sketch(6, 6, "gaussian", cfg)
    approx = lowrank.nystrom_psd(numpy.eye(6), sketch)
    numpy.testing.assert_allclose(approx.full(), numpy.eye(6), atol=1e-8)


@pytest.mark.parametrize("kind,dims", [("gaussian", None), ("krp", (3, 4))])
def test_nystrom_recovers_low_rank_psd(kind, dims):
    g = numpy.random.default_rng(10).standard_normal((12, 3))
    m = g @ g.T
    cfg = krp_sketch.sketch.streams.SketchConfig(seed=11)
    approx = lowrank.nystrom_psd(m, lowrank.draw_sketch(12, 5, kind, cfg, dims=dims))
    assert numpy.linalg.norm(approx.full() - m) <= 1e-9 * numpy.linalg.norm(m)
    lam, vecs = approx.eig()
    assert numpy.all(lam >= -1e-10 * numpy.linalg.norm(m))
    assert vecs.shape == (12, approx.rank)


def test_nystrom_rejects_nonsymmetric():
    cfg = krp_sketch.sketch.streams.SketchConfig()
    with pytest.raises(krp_sketch.errors.ParameterError):
        lowrank.nystrom_psd(numpy.triu(numpy.ones((4, 4))), lowrank.draw_sketch(4, 2, "gaussian", cfg))
