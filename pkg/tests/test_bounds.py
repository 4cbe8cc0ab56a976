import math
import numpy
import pytest
from hypothesis import given, settings, strategies as st
import krp_sketch.applications.synthetic
import krp_sketch.errors
import krp_sketch.lowrank.tools
import krp_sketch.sketch.streams
import krp_sketch.tensor.tools
import krp_sketch.theory.bounds as bounds
import krp_sketch.tucker.randomized

TUCKER = ("hosvd", "hosvd-Q", "sthosvd", "sthosvd-Q")


def test_constant():
    assert bounds.c_kd(1.0, 1.0, 1) == pytest.approx(8 * math.e)
    assert bounds.c_kd(1.0, 1.0, 0) == pytest.approx(2.0)
    values = [bounds.c_kd(1.0, 1.0, d) for d in range(1, 6)]
    assert all(b > a for a, b in zip(values, values[1:]))
    assert bounds.c_kd(2.0, 1.0, 2) == pytest.approx(16 * bounds.c_kd(1.0, 1.0, 2))


def test_params_validation():
    assert bounds.BoundParams(r=3).uncalibrated
    assert bounds.BoundParams(r=3, Cs=2.0, K=1.5).uncalibrated
    for kwargs in ({"r": 0}, {"r": 1, "d": 0}, {"r": 1, "delta": 1.0}, {"r": 1, "eps": 0.0}, {"r": 1, "K": 0.5}):
        with pytest.raises(krp_sketch.errors.ParameterError):
            bounds.BoundParams(**kwargs)
    with pytest.raises(krp_sketch.errors.ParameterError):
        bounds.BoundParams(r=1, d=2, dims=(4, 4, 4))


def test_gamma_monotonicity():
    params = bounds.BoundParams(r=5, d=2)
    assert bounds.gamma_rrf(params, 10**14, 1000) < bounds.gamma_rrf(params, 10**6, 1000)
    assert bounds.gamma_rrf(params, 10**14, 1000) < 1e-6
    small_delta = bounds.BoundParams(r=5, d=2, delta=0.001)
    assert bounds.gamma_rrf(small_delta, 100, 1000) > bounds.gamma_rrf(params, 100, 1000)
    assert bounds.gamma_rrf(params, 100, 10**6) > bounds.gamma_rrf(params, 100, 1000)
    with pytest.raises(krp_sketch.errors.ParameterError):
        bounds.gamma_rrf(params, 0, 1000)


def test_gamma_single_view_and_tucker_are_positive():
    params = bounds.BoundParams(r=3, d=2)
    gamma_r, gamma_l = bounds.gamma_single_view(params, 10, 15, 64, 64)
    assert gamma_r > 0 and gamma_l > 0
    assert bounds.gamma_tucker(params, 10, 3, 400) > bounds.gamma_tucker(params, 20, 3, 400)


def test_bounds_scale_with_tail():
    assert bounds.rrf_bound(0.0, 5, 10.0) == 0.0
    assert bounds.rrf_bound(2.0, 1, 0.5) == pytest.approx(2.0 * (1 + 2 * 2.0))
    assert bounds.single_view_bound(1.0, 1, 2, 0.0, 0.0) == pytest.approx(3.0 * 5.0)


def test_tucker_bound():
    params = bounds.BoundParams(r=2, d=3, dims=(5, 5, 5))
    exact = [numpy.array([3.0, 1.0, 0.0, 0.0, 0.0])] * 3
    assert bounds.tucker_bound(exact, (2, 2, 2), (4, 4, 4), params) == 0.0
    tails = [numpy.array([3.0, 1.0, 0.5, 0.0, 0.0])] * 3
    hosvd = bounds.tucker_bound(tails, (2, 2, 2), (4, 4, 4), params, "hosvd")
    sthosvd = bounds.tucker_bound(tails, (2, 2, 2), (4, 4, 4), params, "sthosvd")
    assert hosvd >= 3 * 0.25 and sthosvd >= 3 * 0.25
    with pytest.raises(krp_sketch.errors.ParameterError):
        bounds.tucker_bound(tails, (2, 2, 2), (4, 4, 4), bounds.BoundParams(r=2, d=3))
    with pytest.raises(krp_sketch.errors.ParameterError):
        bounds.tucker_bound(tails, (2, 2, 2), (4, 4, 4), params, "cp")


def test_solver_rejects_unknown_and_incomplete():
    params = bounds.BoundParams(r=2)
    with pytest.raises(krp_sketch.errors.ParameterError):
        bounds.solve_sample_size(params, "johnson-lindenstrauss")
    with pytest.raises(krp_sketch.errors.ParameterError):
        bounds.solve_sample_size(params, "rrf-Q")
    with pytest.raises(krp_sketch.errors.ParameterError):
        bounds.solve_sample_size(params, "subspace-N")
    with pytest.raises(krp_sketch.errors.ParameterError):
        bounds.solve_sample_size(params, "hosvd-Q")


def test_infeasible_when_cap_binds():
    params = bounds.BoundParams(r=5, d=2, M=50, N=50)
    result = bounds.solve_sample_size(params, "rrf")
    assert not result.feasible and result.ell is None and result.cap == 50
    assert "cap" in result.message
    with pytest.raises(krp_sketch.errors.InfeasibleError):
        result.require()


def check_contract(params, variant):
    result = bounds.solve_sample_size(params, variant)
    if not result.feasible:
        return result
    if variant in TUCKER or variant == "single-view":
        sizes = result.ells
        assert bounds.satisfies(params, variant, sizes)
        for i, size in enumerate(sizes):
            if size > 1:
                smaller = sizes[:i] + (size - 1,) + sizes[i + 1 :]
                assert not bounds.satisfies(params, variant, smaller)
    else:
        assert result.ell <= result.cap
        assert bounds.satisfies(params, variant, result.ell)
        if result.ell > 1:
            assert not bounds.satisfies(params, variant, result.ell - 1)
    return result


@settings(max_examples=30, deadline=None)
@given(
    variant=st.sampled_from(bounds.VARIANTS),
    r=st.integers(1, 20),
    d=st.integers(1, 3),
    delta=st.floats(0.01, 0.5),
    eps=st.floats(0.1, 0.9),
    size=st.integers(10, 2**40),
    mode_size=st.integers(2, 10**4),
)
def test_solver_contract(variant, r, d, delta, eps, size, mode_size):
    params = bounds.BoundParams(r=r, d=d, delta=delta, eps=eps, dims=(mode_size,) * d, M=size, N=size)
    result = check_contract(params, variant)
    if not result.feasible and variant not in TUCKER and variant != "single-view":
        assert not bounds.satisfies(params, variant, result.cap)


def test_solver_small_feasible_case():
    result = check_contract(bounds.BoundParams(r=1, d=1, delta=0.5), "rrf")
    assert result.feasible and result.ell > 8


def test_single_view_sizes_are_ordered():
    result = check_contract(bounds.BoundParams(r=2, d=2), "single-view")
    ell_r, ell_l = result.ells
    assert result.ell == ell_r <= ell_l


def test_tucker_sizes_per_mode():
    result = check_contract(bounds.BoundParams(r=2, d=3, dims=(10**8,) * 3), "sthosvd-Q")
    assert result.feasible and len(result.ells) == 3
    assert result.ell == max(result.ells)


def test_appendix_sample_size_growth():
    sizes = {}
    for r in (32, 64, 128):
        params = bounds.BoundParams(r=r, d=1, delta=1e-8)
        sizes[r] = check_contract(params, "appendixA").require()
        assert bounds.alt_sample_size(params) >= sizes[r]
    assert sizes[64] / sizes[32] <= 4.5
    assert sizes[128] / sizes[64] <= 4.5


def test_subspace_size_scales_with_inverse_square_eps():
    coarse = bounds.solve_sample_size(bounds.BoundParams(r=5, d=1, delta=1e-6, eps=0.5), "subspace").require()
    fine = bounds.solve_sample_size(bounds.BoundParams(r=5, d=1, delta=1e-6, eps=0.25), "subspace").require()
    assert abs(fine / coarse / 4.0 - 1.0) <= 0.1


@pytest.mark.slow
def test_range_finder_quantile_below_bound():
    sigma = krp_sketch.applications.synthetic.geometric_spectrum(64, 0.5)
    m = krp_sketch.applications.synthetic.spectrum_matrix(sigma, 64, 64, numpy.random.default_rng(0))
    r, ell = 5, 10
    params = bounds.BoundParams(r=r, d=2, delta=0.05)
    errors = []
    for seed in range(200):
        cfg = krp_sketch.sketch.streams.SketchConfig(seed=seed)
        sketch = krp_sketch.sketch.streams.draw_krp((8, 8), ell, cfg)
        q = krp_sketch.tensor.tools.orthonormal_basis(sketch.apply_right(m))
        errors.append(krp_sketch.lowrank.tools.projection_residual(m, q) ** 2)
    quantile = float(numpy.quantile(errors, 0.95))
    bound = bounds.rrf_bound(float(numpy.sum(sigma[r:] ** 2)), r, bounds.gamma_rrf(params, ell, 64))
    print(f"bound / empirical 0.95-quantile: {bound / quantile:.3e}")
    assert quantile <= bound


@pytest.mark.slow
def test_single_view_quantile_below_bound():
    sigma = krp_sketch.applications.synthetic.geometric_spectrum(64, 0.5)
    m = krp_sketch.applications.synthetic.spectrum_matrix(sigma, 64, 64, numpy.random.default_rng(1))
    r, ell_r, ell_l = 5, 10, 15
    params = bounds.BoundParams(r=r, d=2, delta=0.05)
    errors = []
    for seed in range(200):
        cfg = krp_sketch.sketch.streams.SketchConfig(seed=seed)
        omega = krp_sketch.lowrank.tools.draw_sketch(64, ell_r, "krp", cfg, dims=(8, 8), context="omega")
        psi = krp_sketch.lowrank.tools.draw_sketch(64, ell_l, "krp", cfg, dims=(8, 8), context="psi")
        q, w = krp_sketch.lowrank.tools.single_view(omega.apply_right(m), psi.apply_left(m), psi)
        errors.append(float(numpy.linalg.norm(m - q @ w)) ** 2)
    quantile = float(numpy.quantile(errors, 0.95))
    gamma_r, gamma_l = bounds.gamma_single_view(params, ell_r, ell_l, 64, 64)
    bound = bounds.single_view_bound(float(numpy.sum(sigma[r:] ** 2)), r, ell_r, gamma_r, gamma_l)
    print(f"bound / empirical 0.95-quantile: {bound / quantile:.3e}")
    assert quantile <= bound


@pytest.mark.slow
@pytest.mark.parametrize(
    "algorithm,variant",
    [(krp_sketch.tucker.randomized.rhosvd_krp, "hosvd"), (krp_sketch.tucker.randomized.rsthosvd_krp, "sthosvd")],
)
def test_tucker_quantile_below_bound(algorithm, variant):
    x = krp_sketch.applications.synthetic.cauchy_tensor(20, 4, 2.0)
    ranks, ells = [3] * 4, [5] * 4
    sigmas = [
        numpy.linalg.svd(krp_sketch.tensor.tools.mode_unfold(x, i), compute_uv=False) for i in range(4)
    ]
    params = bounds.BoundParams(r=3, d=4, delta=0.05, dims=x.dims)
    errors = []
    for seed in range(200):
        t = algorithm(x, ranks, oversample=2, cfg=krp_sketch.sketch.streams.SketchConfig(seed=seed))
        errors.append(float(numpy.linalg.norm(x.data - t.full().data)) ** 2)
    quantile = float(numpy.quantile(errors, 0.95))
    bound = bounds.tucker_bound(sigmas, ranks, ells, params, variant)
    print(f"{variant}: bound / empirical 0.95-quantile: {bound / quantile:.3e}")
    assert quantile <= bound
