"""
Deterministic Tucker compression: HOSVD and sequentially truncated HOSVD.
"""

import logging
import typing
import numpy
import scipy.linalg
import krp_sketch.errors
import krp_sketch.sketch.ledger
import krp_sketch.tensor.tools
import krp_sketch.tucker.format

logger = logging.getLogger(__name__)

METHODS = ("gram", "svd")


def leading_left_singular_vectors(
    a: numpy.ndarray,
    r: int,
    method: str = "gram",
    flops: krp_sketch.sketch.ledger.FlopCounter | None = None,
) -> numpy.ndarray:
    """
    Leading r left singular vectors of a matrix.

    The "gram" method takes the top eigenvectors of A A^T, which is cheap
    for short, wide unfoldings but only accurate to about the square root of
    machine precision on small singular values. The "svd" method uses a thin
    SVD.

    :param numpy.ndarray a: matrix, typically an unfolding
    :param int r: number of vectors
    :param str method: "gram" or "svd"
    :param FlopCounter flops: optional counter of multiply-adds
    :rtype: numpy.ndarray
    """
    rows = a.shape[0]
    if not 1 <= r <= rows:
        raise krp_sketch.errors.ShapeError(f"cannot take {r} singular vectors of a {rows}-row matrix")
    if method == "gram":
        gram = a @ a.T
        krp_sketch.sketch.ledger.count(flops, "gram", rows * a.size)
        _, vecs = scipy.linalg.eigh(gram, subset_by_index=[rows - r, rows - 1])
        return vecs[:, ::-1]
    if method == "svd":
        return krp_sketch.tensor.tools.thin_svd(a).U[:, :r]
    raise krp_sketch.errors.ParameterError(f"unknown method {method!r}, expected one of {METHODS}")


def hosvd(
    x: krp_sketch.tensor.tools.DenseTensor,
    ranks: krp_sketch.tucker.format.RankSpec | typing.Sequence[int] | int,
    method: str = "gram",
    flops: krp_sketch.sketch.ledger.FlopCounter | None = None,
) -> krp_sketch.tucker.format.TuckerTensor:
    """
    Higher-order SVD: factor i holds the leading r_i left singular vectors of
    X_(i); the core is X multiplied by every Q_i^T.

    :param DenseTensor x: tensor to compress
    :param ranks: target multilinear rank
    :param str method: "gram" or "svd"
    :param FlopCounter flops: optional counter of multiply-adds
    :rtype: TuckerTensor
    """
    spec = krp_sketch.tucker.format.RankSpec.coerce(ranks, x.order)
    spec.validate(x.dims)
    logger.debug("HOSVD (%s) of dims %s at ranks %s", method, x.dims, spec.ranks)
    factors = [
        leading_left_singular_vectors(krp_sketch.tensor.tools.mode_unfold(x, i), r, method, flops)
        for i, r in enumerate(spec.ranks)
    ]
    core = krp_sketch.tensor.tools.multi_ttm(x, dict(enumerate(factors)), transpose=True, flops=flops)
    return krp_sketch.tucker.format.TuckerTensor(core, factors, [True] * x.order)


def mode_order(order: typing.Sequence[int] | None, d: int) -> list:
    if order is None:
        return list(range(d))
    order = [int(i) for i in order]
    if sorted(order) != list(range(d)):
        raise krp_sketch.errors.ParameterError(f"mode order {order} is not a permutation of 0..{d - 1}")
    return order


def sthosvd_steps(
    x: krp_sketch.tensor.tools.DenseTensor,
    ranks: krp_sketch.tucker.format.RankSpec | typing.Sequence[int] | int,
    order: typing.Sequence[int] | None = None,
    method: str = "gram",
    flops: krp_sketch.sketch.ledger.FlopCounter | None = None,
) -> typing.Iterator[tuple]:
    """
    Runs ST-HOSVD one mode at a time.

    :rtype: Iterator[tuple]
    :return: (mode, factor, core after truncating that mode) per processed mode
    """
    spec = krp_sketch.tucker.format.RankSpec.coerce(ranks, x.order)
    spec.validate(x.dims)
    core = x
    for i in mode_order(order, x.order):
        q = leading_left_singular_vectors(
            krp_sketch.tensor.tools.mode_unfold(core, i), spec.ranks[i], method, flops
        )
        core = krp_sketch.tensor.tools.ttm(core, q, i, transpose=True, flops=flops)
        yield i, q, core


def sthosvd(
    x: krp_sketch.tensor.tools.DenseTensor,
    ranks: krp_sketch.tucker.format.RankSpec | typing.Sequence[int] | int,
    order: typing.Sequence[int] | None = None,
    method: str = "gram",
    flops: krp_sketch.sketch.ledger.FlopCounter | None = None,
) -> krp_sketch.tucker.format.TuckerTensor:
    """
    Sequentially truncated HOSVD: the core is updated after each mode, so later
    modes work on a smaller tensor.

    :param DenseTensor x: tensor to compress
    :param ranks: target multilinear rank
    :param order: mode processing order, ascending by default
    :param str method: "gram" or "svd"
    :param FlopCounter flops: optional counter of multiply-adds
    :rtype: TuckerTensor
    """
    factors = [None] * x.order
    core = x
    for i, q, core in sthosvd_steps(x, ranks, order, method, flops):
        factors[i] = q
    return krp_sketch.tucker.format.TuckerTensor(core, factors, [True] * x.order)
