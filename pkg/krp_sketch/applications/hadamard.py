"""
Randomized HOSVD of the Hadamard (elementwise) product of two order-3 Tucker tensors.

With X = F x_1 A x_2 B x_3 C and Y = G x_1 U x_2 V x_3 W, the product is
X * Y = (F kron G) x_1 (A tkr U) x_2 (B tkr V) x_3 (C tkr W), where row k of
A tkr U is a_k kron u_k. The mode sketches and the final core are
contracted through this form; X * Y and the row-wise Khatri-Rao matrices are
never formed.
"""

import logging
import numpy
import krp_sketch.errors
import krp_sketch.sketch.streams
import krp_sketch.tensor.tools
import krp_sketch.tucker.format
import krp_sketch.tucker.randomized

logger = logging.getLogger(__name__)


def _check_pair(x: krp_sketch.tucker.format.TuckerTensor, y: krp_sketch.tucker.format.TuckerTensor) -> None:
    if x.order != 3 or y.order != 3:
        raise krp_sketch.errors.ShapeError(
            f"Hadamard recompression needs order-3 inputs, got orders {x.order} and {y.order}"
        )
    if x.dims != y.dims:
        raise krp_sketch.errors.ShapeError(f"ambient dims differ: {x.dims} and {y.dims}")


def _project_rows(a: numpy.ndarray, u: numpy.ndarray, omega: numpy.ndarray) -> numpy.ndarray:
    """(A tkr U)^T Omega, of shape (r_A r_U) x l."""
    return numpy.einsum("ia,ib,ik->abk", a, u, omega).reshape(a.shape[1] * u.shape[1], omega.shape[1])


def _expand_rows(a: numpy.ndarray, u: numpy.ndarray, m: numpy.ndarray) -> numpy.ndarray:
    """(A tkr U) M for an (r_A r_U) x k matrix M."""
    return numpy.einsum("ia,ib,abk->ik", a, u, m.reshape(a.shape[1], u.shape[1], m.shape[1]))


def structured_mode_sketch(
    x: krp_sketch.tucker.format.TuckerTensor,
    y: krp_sketch.tucker.format.TuckerTensor,
    omegas: list,
    mode: int,
    core: krp_sketch.tensor.tools.DenseTensor | None = None,
) -> numpy.ndarray:
    """
    (X * Y)_(mode) times the Khatri-Rao product of `omegas` (the two factors
    for the other modes, ascending), computed through the Tucker structure.

    :param TuckerTensor x: first operand
    :param TuckerTensor y: second operand
    :param list omegas: n_j x l factors for the two modes other than `mode`
    :param int mode: 0-based mode
    :param DenseTensor core: precomputed F kron G
    :rtype: numpy.ndarray
    """
    _check_pair(x, y)
    if core is None:
        core = krp_sketch.tensor.tools.kron_tensor(x.core, y.core)
    others = [j for j in range(3) if j != mode]
    projected = [_project_rows(x.factors[j], y.factors[j], w) for j, w in zip(others, omegas)]
    inner = krp_sketch.tensor.tools.mttkrp(core, projected, mode)
    return _expand_rows(x.factors[mode], y.factors[mode], inner)


def dense_product(
    x: krp_sketch.tucker.format.TuckerTensor, y: krp_sketch.tucker.format.TuckerTensor
) -> krp_sketch.tensor.tools.DenseTensor:
    """X * Y formed densely; for oracles and small problems."""
    _check_pair(x, y)
    return krp_sketch.tensor.tools.hadamard(x.full(), y.full())


def structured_product(
    x: krp_sketch.tucker.format.TuckerTensor, y: krp_sketch.tucker.format.TuckerTensor
) -> krp_sketch.tucker.format.TuckerTensor:
    """X * Y as an uncompressed Tucker tensor with core F kron G and row-wise Khatri-Rao factors."""
    _check_pair(x, y)
    factors = [
        krp_sketch.tensor.tools.transposed_khatri_rao(a, u) for a, u in zip(x.factors, y.factors)
    ]
    return krp_sketch.tucker.format.TuckerTensor(
        krp_sketch.tensor.tools.kron_tensor(x.core, y.core), factors
    )


def hadamard_recompress(
    x: krp_sketch.tucker.format.TuckerTensor,
    y: krp_sketch.tucker.format.TuckerTensor,
    ranks,
    oversample: int = 0,
    cfg: krp_sketch.sketch.streams.SketchConfig | None = None,
    recompress_ranks: bool = False,
) -> krp_sketch.tucker.format.TuckerTensor:
    """
    Randomized HOSVD with Khatri-Rao sketches of X * Y.

    :param TuckerTensor x: first order-3 operand
    :param TuckerTensor y: second order-3 operand with the same ambient dims
    :param ranks: target multilinear rank
    :param int oversample: oversampling p
    :param SketchConfig cfg: random configuration and counters
    :param bool recompress_ranks: truncate the result back to the target ranks
    :rtype: TuckerTensor
    """
    _check_pair(x, y)
    cfg = cfg or krp_sketch.sketch.streams.SketchConfig()
    spec = krp_sketch.tucker.format.RankSpec.coerce(ranks, 3, oversample)
    ells = spec.sketch_sizes(x.dims)
    core = krp_sketch.tensor.tools.kron_tensor(x.core, y.core)

    bases = []
    for i, ell in enumerate(ells):
        omegas = [
            krp_sketch.sketch.streams.draw(cfg, n, ell, f"sketch-{i}", j)
            for j, n in enumerate(x.dims)
            if j != i
        ]
        sketch = structured_mode_sketch(x, y, omegas, i, core=core)
        q, _ = krp_sketch.tensor.tools.thin_qr(sketch, flops=cfg.flops)
        bases.append(q)

    # core of the result: (F kron G) x_i Q_i^T (A_i tkr U_i)
    projections = {
        i: numpy.einsum("ik,ia,ib->kab", q, a, u).reshape(q.shape[1], a.shape[1] * u.shape[1])
        for i, (q, a, u) in enumerate(zip(bases, x.factors, y.factors))
    }
    small = krp_sketch.tensor.tools.multi_ttm(core, projections, flops=cfg.flops)
    t = krp_sketch.tucker.format.TuckerTensor(small, bases, [True] * 3)
    logger.info("Hadamard recompression to ranks %s", t.ranks)
    if recompress_ranks:
        return krp_sketch.tucker.randomized.recompress(t, spec.ranks)
    return t
