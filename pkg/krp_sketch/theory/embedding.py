"""
Monte Carlo check of the oblivious subspace embedding property of KRP sketches.
"""

import logging
import typing
import numpy
import krp_sketch.errors
import krp_sketch.sketch.streams
import krp_sketch.tensor.tools

logger = logging.getLogger(__name__)


def embedding_distortion(sketch: krp_sketch.sketch.streams.KrpSketch, w: numpy.ndarray) -> float:
    """
    Largest relative deviation of ||Omega^T W z||^2 / l from ||z||^2 over unit z,
    for W with orthonormal columns.
    """
    sigma = krp_sketch.tensor.tools.thin_svd(sketch.apply_left(w)).S / numpy.sqrt(sketch.ell)
    return float(numpy.max(numpy.abs(sigma**2 - 1.0)))


def embedding_check(
    r: int,
    dims: typing.Sequence[int],
    ell: int,
    eps: float,
    trials: int,
    cfg: krp_sketch.sketch.streams.SketchConfig | None = None,
) -> float:
    """
    Fraction of trials in which a fresh KRP sketch embeds a fixed r-dimensional subspace of R^N, N = prod(dims):

        (1 - eps) ||W z||^2 <= ||Omega^T W z||^2 / l <= (1 + eps) ||W z||^2 for all z.

    The subspace W is drawn once from the stream "embedding-basis"; trial t
    draws its sketch with counter t. Sample sizes l > N are allowed.

    :param int r: subspace dimension, at most N
    :param Sequence[int] dims: KRP mode sizes n_1..n_d
    :param int ell: sketch size
    :param float eps: distortion, eps >= 0
    :param int trials: number of independent sketches
    :param SketchConfig cfg: random configuration
    :rtype: float
    """
    cfg = cfg or krp_sketch.sketch.streams.SketchConfig()
    dims = tuple(int(n) for n in dims)
    n = int(numpy.prod(dims))
    if not 1 <= r <= n:
        raise krp_sketch.errors.ParameterError(f"subspace dimension {r} outside 1..{n}")
    if ell < 1 or trials < 1:
        raise krp_sketch.errors.ParameterError(f"need ell >= 1 and trials >= 1, got {ell} and {trials}")
    if eps < 0:
        raise krp_sketch.errors.ParameterError(f"eps must be nonnegative, got {eps}")

    basis = krp_sketch.sketch.streams.draw(cfg, n, r, "embedding-basis", 0, distribution="gaussian")
    w, _ = krp_sketch.tensor.tools.thin_qr(basis)
    hits = 0
    for t in range(trials):
        sketch = krp_sketch.sketch.streams.draw_krp(dims, ell, cfg, context="embedding", counter=t)
        if embedding_distortion(sketch, w) <= eps:
            hits += 1
    frequency = hits / trials
    logger.info("embedding of dimension %d into %d KRP rows: success %.3f over %d trials", r, ell, frequency, trials)
    return frequency
