import numpy
import pytest
import krp_sketch.applications.era as era
import krp_sketch.errors
import krp_sketch.sketch.streams


def preset_problem(name, system_seed=0):
    preset = era.era_preset(name)
    truth = era.random_stable_system(preset.order, preset.outputs, preset.inputs, seed=system_seed)
    return preset, truth, era.MarkovSequence.from_system(truth, preset.s)


def test_markov_parameters():
    system = era.EraSystem(numpy.array([[0.5]]), numpy.array([[2.0]]), numpy.array([[3.0]]), numpy.array([[1.0]]))
    numpy.testing.assert_allclose(era.markov_parameters(system, 4)[:, 0, 0], [1.0, 6.0, 3.0, 1.5])


def test_system_shapes_are_checked():
    with pytest.raises(krp_sketch.errors.ShapeError):
        era.EraSystem(numpy.eye(2), numpy.ones((3, 1)), numpy.ones((1, 2)), numpy.ones((1, 1)))
    with pytest.raises(krp_sketch.errors.ParameterError):
        era.EraSystem(numpy.array([[numpy.nan]]), numpy.ones((1, 1)), numpy.ones((1, 1)), numpy.ones((1, 1)))


def test_build_hankel_matches_dense():
    rng = numpy.random.default_rng(0)
    seq = era.MarkovSequence(rng.standard_normal((8, 2, 3)), s=4)
    g = seq.s - 1
    for shift in (0, 1):
        dense = numpy.block([[seq.blocks[i + j + 1 + shift] for j in range(g)] for i in range(g)])
        hankel = era.build_hankel(seq, shift=shift)
        assert hankel.terms == 2 * g - 1
        numpy.testing.assert_array_equal(hankel.materialize(), dense)


def test_markov_sequence_validation():
    with pytest.raises(krp_sketch.errors.ShapeError):
        era.MarkovSequence(numpy.ones((4, 2, 2)), s=3)
    with pytest.raises(krp_sketch.errors.ParameterError):
        era.MarkovSequence(numpy.ones((4, 2, 2)), s=1)
    with pytest.raises(krp_sketch.errors.ShapeError):
        era.build_hankel(era.MarkovSequence(numpy.ones((5, 2, 2)), s=3), shift=2)


def test_markov_tensor_round_trip():
    seq = era.MarkovSequence(numpy.random.default_rng(1).standard_normal((7, 3, 2)), s=4)
    x = seq.as_tensor()
    assert x.dims == (3, 2, 7)
    back = era.MarkovSequence.from_tensor(x)
    assert back.s == 4
    numpy.testing.assert_array_equal(back.blocks, seq.blocks)


def test_hausdorff_eigs():
    assert era.hausdorff_eigs([0.0], [3.0, 4.0j]) == pytest.approx(4.0)
    assert era.hausdorff_eigs([1.0, 2.0], [2.0, 1.0]) == 0.0
    with pytest.raises(krp_sketch.errors.ParameterError):
        era.hausdorff_eigs([], [1.0])


def test_dense_identification_reproduces_markov_parameters():
    truth = era.random_stable_system(4, 3, 2, seed=3)
    seq = era.MarkovSequence.from_system(truth, 6)
    system = era.era_identify(seq, 4, method="dense-svd")
    assert system.order == 4 and system.outputs == 3 and system.inputs == 2
    assert era.markov_error(system, seq) <= 1e-8
    numpy.testing.assert_array_equal(system.d, truth.d)


def test_desk_dense_svd_eigenvalues():
    preset, truth, seq = preset_problem("desk")
    system = era.era_identify(seq, preset.r, method="dense-svd")
    assert era.hausdorff_eigs(system.eigenvalues(), truth.eigenvalues()) <= 1e-8


def test_desk_krp_single_view_eigenvalues():
    preset, truth, seq = preset_problem("desk")
    distances = []
    for seed in range(10):
        cfg = krp_sketch.sketch.streams.SketchConfig(seed=seed)
        system = era.era_identify(seq, preset.r, preset.oversample, "krp-single-view", cfg)
        distances.append(era.hausdorff_eigs(system.eigenvalues(), truth.eigenvalues()))
    assert numpy.median(distances) <= 1e-6


def test_krp_ledger_is_small_fraction_of_gaussian():
    preset, _, seq = preset_problem("wide")
    krp = krp_sketch.sketch.streams.SketchConfig(seed=1)
    era.era_identify(seq, preset.r, preset.oversample, "krp-single-view", krp)
    gauss = krp_sketch.sketch.streams.SketchConfig(seed=1)
    era.era_identify(seq, preset.r, preset.oversample, "gaussian-single-view", gauss)
    assert krp.ledger.total == 2772
    assert gauss.ledger.total == 30240
    assert krp.ledger.total < 0.1 * gauss.ledger.total


def test_order_beyond_numerical_rank_warns():
    _, _, seq = preset_problem("desk")
    with pytest.warns(krp_sketch.errors.OrderWarning):
        era.era_identify(seq, 7, method="dense-svd")


def test_invalid_order_and_method():
    _, _, seq = preset_problem("desk")
    with pytest.raises(krp_sketch.errors.ParameterError):
        era.era_identify(seq, 0)
    with pytest.raises(krp_sketch.errors.ParameterError):
        era.era_identify(seq, 3, method="qr")


def test_presets():
    assert era.era_preset("desk") == era.EraPreset(6, 4, 25, 5, 5, 20)
    assert era.era_preset("full").s == 200
    with pytest.raises(krp_sketch.errors.ParameterError):
        era.era_preset("huge")


@pytest.mark.parametrize("method", era.METHODS)
def test_zero_markov_parameters_give_zero_system(method):
    seq = era.MarkovSequence(numpy.zeros((9, 2, 2)), 5)
    with pytest.warns(krp_sketch.errors.OrderWarning):
        system = era.era_identify(seq, 1, 2, method, krp_sketch.sketch.streams.SketchConfig(seed=0))
    assert system.order == 1
    assert not system.a.any() and not system.b.any() and not system.c.any()
    assert era.markov_error(system, seq) == 0.0


def test_order_above_rank_pads_with_disconnected_states():
    truth = era.random_stable_system(4, 3, 2, seed=3)
    seq = era.MarkovSequence.from_system(truth, 6)
    with pytest.warns(krp_sketch.errors.OrderWarning):
        system = era.era_identify(seq, 6, method="dense-svd")
    assert system.order == 6
    assert numpy.all(numpy.isfinite(system.a))
    assert era.markov_error(system, seq) <= 1e-8
    expected = numpy.concatenate([truth.eigenvalues(), [0.0]])
    assert era.hausdorff_eigs(system.eigenvalues(), expected) <= 1e-8
