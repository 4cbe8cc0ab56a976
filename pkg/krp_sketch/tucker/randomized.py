"""
Randomized Tucker compression with Khatri-Rao product sketches (RHOSVD-KRP,
its memoized variant and RSTHOSVD-KRP) and the dense Gaussian baselines.

Each mode sketch is an MTTKRP, X_(i) times a Khatri-Rao product of d-1 small
random factors, so the N x l sketch is never formed. Outputs have multilinear
rank (l_1, ..., l_d) unless `recompress_ranks` truncates them back to the targets.
"""

import logging
import math
import typing
import krp_sketch.errors
import krp_sketch.sketch.streams
import krp_sketch.tensor.tools
import krp_sketch.tucker.deterministic
import krp_sketch.tucker.format

logger = logging.getLogger(__name__)

Ranks = krp_sketch.tucker.format.RankSpec | typing.Sequence[int] | int


def _setup(x, ranks, oversample, cfg):
    spec = krp_sketch.tucker.format.RankSpec.coerce(ranks, x.order, oversample)
    ells = spec.sketch_sizes(x.dims)
    return spec, ells, cfg or krp_sketch.sketch.streams.SketchConfig()


def recompress(
    t: krp_sketch.tucker.format.TuckerTensor,
    ranks: Ranks,
    method: str = "svd",
) -> krp_sketch.tucker.format.TuckerTensor:
    """
    Truncates a Tucker tensor with orthonormal factors to smaller ranks by an
    HOSVD of its core.

    :param TuckerTensor t: tensor to truncate
    :param ranks: new multilinear rank, at most the current one per mode
    :param str method: HOSVD method for the core
    :rtype: TuckerTensor
    """
    inner = krp_sketch.tucker.deterministic.hosvd(t.core, ranks, method=method)
    factors = [f @ u for f, u in zip(t.factors, inner.factors)]
    return krp_sketch.tucker.format.TuckerTensor(inner.core, factors, list(t.orthonormal))


def _finish(x, factors, spec, do_recompress, cfg, name):
    core = krp_sketch.tensor.tools.multi_ttm(x, dict(enumerate(factors)), transpose=True, flops=cfg.flops)
    t = krp_sketch.tucker.format.TuckerTensor(core, factors, [True] * x.order)
    logger.info("%s: ranks %s, %d random scalars", name, t.ranks, cfg.ledger.total)
    return recompress(t, spec.ranks) if do_recompress else t


def rhosvd_krp(
    x: krp_sketch.tensor.tools.DenseTensor,
    ranks: Ranks,
    oversample: int = 0,
    cfg: krp_sketch.sketch.streams.SketchConfig | None = None,
    memoize: bool = False,
    recompress_ranks: bool = False,
) -> krp_sketch.tucker.format.TuckerTensor:
    """
    Randomized HOSVD with Khatri-Rao sketches.

    Mode i is sketched as Y_i = X_(i) (Omega_d kr ... kr Omega_1) with the
    i-th factor left out, then Q_i is the thin-QR basis of Y_i. Fresh factors
    for mode i come from streams ("sketch-i", j); with `memoize` all modes
    share one pool of d-1 random matrices.

    :param DenseTensor x: tensor to compress
    :param ranks: target multilinear rank
    :param int oversample: oversampling p, l_i = r_i + p
    :param SketchConfig cfg: random configuration and counters
    :param bool memoize: reuse one set of random factors across modes
    :param bool recompress_ranks: truncate the result back to the target ranks
    :rtype: TuckerTensor
    """
    spec, ells, cfg = _setup(x, ranks, oversample, cfg)
    pool = None
    if memoize and x.order > 1:
        pool = krp_sketch.sketch.streams.memoized_streams(x.dims, max(ells), cfg)
    factors = []
    for i, ell in enumerate(ells):
        if pool is not None:
            omegas = [f[:, :ell] for f in pool.for_mode(i)]
        else:
            omegas = [
                krp_sketch.sketch.streams.draw(cfg, n, ell, f"sketch-{i}", j)
                for j, n in enumerate(x.dims)
                if j != i
            ]
        y = krp_sketch.tensor.tools.mttkrp(x, omegas, i, ell=ell, flops=cfg.flops)
        q, _ = krp_sketch.tensor.tools.thin_qr(y, flops=cfg.flops)
        factors.append(q)
    name = "rhosvd-krp-memo" if memoize else "rhosvd-krp"
    return _finish(x, factors, spec, recompress_ranks, cfg, name)


def rhosvd_gaussian(
    x: krp_sketch.tensor.tools.DenseTensor,
    ranks: Ranks,
    oversample: int = 0,
    cfg: krp_sketch.sketch.streams.SketchConfig | None = None,
    recompress_ranks: bool = False,
) -> krp_sketch.tucker.format.TuckerTensor:
    """
    Randomized HOSVD with a dense Gaussian sketch of prod(other sizes) x l_i rows per mode.
    """
    spec, ells, cfg = _setup(x, ranks, oversample, cfg)
    factors = []
    for i, ell in enumerate(ells):
        unfolded = krp_sketch.tensor.tools.mode_unfold(x, i)
        omega = krp_sketch.sketch.streams.draw_gaussian_dense(
            unfolded.shape[1], ell, cfg, context=f"gaussian-{i}"
        )
        cfg.flops.add("dense-sketch", unfolded.size * ell)
        q, _ = krp_sketch.tensor.tools.thin_qr(unfolded @ omega, flops=cfg.flops)
        factors.append(q)
    return _finish(x, factors, spec, recompress_ranks, cfg, "rhosvd-gauss")


def _sequential(x, ranks, oversample, cfg, order, recompress_ranks, sketch_mode, name):
    spec, ells, cfg = _setup(x, ranks, oversample, cfg)
    order = krp_sketch.tucker.deterministic.mode_order(order, x.order)
    core = x
    factors = [None] * x.order
    for i in order:
        y = sketch_mode(core, i, ells[i], cfg)
        q, _ = krp_sketch.tensor.tools.thin_qr(y, flops=cfg.flops)
        factors[i] = q
        core = krp_sketch.tensor.tools.ttm(core, q, i, transpose=True, flops=cfg.flops)
    t = krp_sketch.tucker.format.TuckerTensor(core, factors, [True] * x.order)
    logger.info("%s: ranks %s, %d random scalars", name, t.ranks, cfg.ledger.total)
    return recompress(t, spec.ranks) if recompress_ranks else t


def _krp_mode_sketch(core, i, ell, cfg):
    # modes already processed have size l_j, the others still n_j
    omegas = [
        krp_sketch.sketch.streams.draw(cfg, n, ell, f"sketch-{i}", j)
        for j, n in enumerate(core.dims)
        if j != i
    ]
    return krp_sketch.tensor.tools.mttkrp(core, omegas, i, ell=ell, flops=cfg.flops)


def _gaussian_mode_sketch(core, i, ell, cfg):
    unfolded = krp_sketch.tensor.tools.mode_unfold(core, i)
    omega = krp_sketch.sketch.streams.draw_gaussian_dense(
        unfolded.shape[1], ell, cfg, context=f"gaussian-{i}"
    )
    cfg.flops.add("dense-sketch", unfolded.size * ell)
    return unfolded @ omega


def rsthosvd_krp(
    x: krp_sketch.tensor.tools.DenseTensor,
    ranks: Ranks,
    oversample: int = 0,
    cfg: krp_sketch.sketch.streams.SketchConfig | None = None,
    order: typing.Sequence[int] | None = None,
    recompress_ranks: bool = False,
) -> krp_sketch.tucker.format.TuckerTensor:
    """
    Randomized ST-HOSVD with Khatri-Rao sketches.

    The mode-i sketch is an MTTKRP on the current core, so its random factors
    are l_j x l_i for modes already processed and n_j x l_i for the rest.

    :param DenseTensor x: tensor to compress
    :param ranks: target multilinear rank
    :param int oversample: oversampling p
    :param SketchConfig cfg: random configuration and counters
    :param order: mode processing order, ascending by default
    :param bool recompress_ranks: truncate the result back to the target ranks
    :rtype: TuckerTensor
    """
    return _sequential(x, ranks, oversample, cfg, order, recompress_ranks, _krp_mode_sketch, "rsthosvd-krp")


def rsthosvd_gaussian(
    x: krp_sketch.tensor.tools.DenseTensor,
    ranks: Ranks,
    oversample: int = 0,
    cfg: krp_sketch.sketch.streams.SketchConfig | None = None,
    order: typing.Sequence[int] | None = None,
    recompress_ranks: bool = False,
) -> krp_sketch.tucker.format.TuckerTensor:
    """Randomized ST-HOSVD with dense Gaussian sketches of the current core."""
    return _sequential(
        x, ranks, oversample, cfg, order, recompress_ranks, _gaussian_mode_sketch, "rsthosvd-gauss"
    )


def expected_ledger(algorithm: str, dims: typing.Sequence[int], ells: typing.Sequence[int]) -> int:
    """
    Random scalars an algorithm draws for the given mode sizes and sketch sizes
    (ascending mode order).

    :param str algorithm: a randomized name from ALGORITHMS
    :rtype: int
    """
    d = len(dims)
    if algorithm == "rhosvd-krp":
        return sum(ells[i] * (sum(dims) - dims[i]) for i in range(d))
    if algorithm == "rhosvd-krp-memo":
        return max(ells) * sum(max(dims[k], dims[k + 1]) for k in range(d - 1))
    if algorithm == "rhosvd-gauss":
        return sum(ells[i] * math.prod(dims) // dims[i] for i in range(d))
    if algorithm == "rsthosvd-krp":
        return sum(ells[i] * (sum(ells[:i]) + sum(dims[i + 1 :])) for i in range(d))
    if algorithm == "rsthosvd-gauss":
        return sum(ells[i] * math.prod(ells[:i]) * math.prod(dims[i + 1 :]) for i in range(d))
    raise krp_sketch.errors.ParameterError(f"no ledger formula for {algorithm!r}")


def _hosvd(x, ranks, oversample=0, cfg=None):
    return krp_sketch.tucker.deterministic.hosvd(x, ranks, flops=cfg.flops if cfg else None)


def _sthosvd(x, ranks, oversample=0, cfg=None):
    return krp_sketch.tucker.deterministic.sthosvd(x, ranks, flops=cfg.flops if cfg else None)


def _rhosvd_krp_memo(x, ranks, oversample=0, cfg=None):
    return rhosvd_krp(x, ranks, oversample, cfg, memoize=True)


ALGORITHMS: dict[str, typing.Callable] = {
    "hosvd": _hosvd,
    "sthosvd": _sthosvd,
    "rhosvd-krp": rhosvd_krp,
    "rhosvd-krp-memo": _rhosvd_krp_memo,
    "rsthosvd-krp": rsthosvd_krp,
    "rhosvd-gauss": rhosvd_gaussian,
    "rsthosvd-gauss": rsthosvd_gaussian,
}
