"""
Randomized low-rank matrix approximation with either dense Gaussian or KRP
sketches: range finder, randomized SVD, single-view (one-pass) approximation
and the Nystrom approximation of PSD matrices.

Sketch operators are passed around as callables or sketch objects, so that
structured callers (block-structured matrices, tensors) can apply them
without forming M or Omega.
"""

import dataclasses
import logging
import typing
import warnings
import numpy
import scipy.linalg
import krp_sketch.errors
import krp_sketch.settings
import krp_sketch.sketch.ledger
import krp_sketch.sketch.streams
import krp_sketch.tensor.tools

logger = logging.getLogger(__name__)

SKETCH_KINDS = ("gaussian", "krp")


def _as_matrix(m: numpy.ndarray) -> numpy.ndarray:
    m = numpy.asarray(m, dtype=numpy.float64)
    if m.ndim != 2 or m.size == 0:
        raise krp_sketch.errors.ShapeError(f"expected a nonempty matrix, got shape {m.shape}")
    return m


def draw_sketch(
    rows: int,
    ell: int,
    kind: str,
    cfg: krp_sketch.sketch.streams.SketchConfig,
    dims: typing.Sequence[int] | None = None,
    context: str = "omega",
) -> krp_sketch.sketch.streams.KrpSketch | krp_sketch.sketch.streams.DenseSketch:
    """
    Draws a sketch with `rows` rows and `ell` columns.

    :param int rows: row count N of the sketch
    :param int ell: column count
    :param str kind: "gaussian" for a dense Gaussian sketch, "krp" for a Khatri-Rao sketch
    :param SketchConfig cfg: random configuration
    :param Sequence[int] dims: KRP mode sizes with product `rows`; defaults to (rows,)
    :param str context: stream context tag
    :rtype: KrpSketch | DenseSketch
    """
    if kind == "gaussian":
        return krp_sketch.sketch.streams.DenseSketch(
            krp_sketch.sketch.streams.draw_gaussian_dense(rows, ell, cfg, context=context)
        )
    if kind != "krp":
        raise krp_sketch.errors.ParameterError(
            f"unknown sketch kind {kind!r}, expected one of {SKETCH_KINDS}"
        )
    dims = tuple(dims) if dims is not None else (rows,)
    if int(numpy.prod(dims)) != rows:
        raise krp_sketch.errors.ShapeError(
            f"KRP dims {dims} do not multiply to the {rows} sketch rows"
        )
    return krp_sketch.sketch.streams.draw_krp(dims, ell, cfg, context=context)


def range_finder(
    apply_sketch: typing.Callable[[int], numpy.ndarray],
    shape: tuple,
    r: int,
    oversample: int = krp_sketch.settings.DEFAULT_OVERSAMPLE,
    flops: krp_sketch.sketch.ledger.FlopCounter | None = None,
) -> numpy.ndarray:
    """
    Randomized range finder: Q = orth(M Omega) with l = r + oversample columns.

    :param Callable apply_sketch: maps l to the rows x l product M Omega
    :param tuple shape: (rows, cols) of M
    :param int r: target rank
    :param int oversample: oversampling parameter
    :param FlopCounter flops: optional counter of multiply-adds
    :rtype: numpy.ndarray
    :return: orthonormal basis with l columns, fewer if M Omega is rank deficient
    """
    rows, cols = shape
    ell = r + oversample
    if r < 1 or oversample < 0:
        raise krp_sketch.errors.ParameterError(
            f"need r >= 1 and oversample >= 0, got r={r}, oversample={oversample}"
        )
    if ell > min(rows, cols):
        raise krp_sketch.errors.ParameterError(
            f"sketch size {ell} exceeds the smaller dimension of a {rows} x {cols} matrix"
        )
    y = apply_sketch(ell)
    if y.shape != (rows, ell):
        raise krp_sketch.errors.ShapeError(
            f"sketch operator returned shape {y.shape}, expected {(rows, ell)}"
        )
    q = krp_sketch.tensor.tools.orthonormal_basis(y, flops=flops)
    if q.shape[1] < ell:
        logger.debug("range of a %d x %d sketch has rank %d", rows, ell, q.shape[1])
    return q


def projection_residual(m: numpy.ndarray, q: numpy.ndarray) -> float:
    """Frobenius norm of M - Q Q^T M."""
    return float(numpy.linalg.norm(m - q @ (q.T @ m)))


def randomized_svd(
    m: numpy.ndarray,
    r: int,
    oversample: int = krp_sketch.settings.DEFAULT_OVERSAMPLE,
    kind: str = "gaussian",
    cfg: krp_sketch.sketch.streams.SketchConfig | None = None,
    dims: typing.Sequence[int] | None = None,
) -> krp_sketch.tensor.tools.SvdTriplet:
    """
    Rank-r randomized SVD: range finder, then the SVD of the small matrix Q^T M.

    :param numpy.ndarray m: matrix to approximate
    :param int r: target rank
    :param int oversample: oversampling parameter
    :param str kind: sketch kind, "gaussian" or "krp"
    :param SketchConfig cfg: random configuration
    :param Sequence[int] dims: KRP mode sizes with product equal to the column count
    :rtype: SvdTriplet
    """
    m = _as_matrix(m)
    cfg = cfg or krp_sketch.sketch.streams.SketchConfig()

    def apply_sketch(ell: int) -> numpy.ndarray:
        sketch = draw_sketch(m.shape[1], ell, kind, cfg, dims=dims)
        return sketch.apply_right(m, flops=cfg.flops)

    q = range_finder(apply_sketch, m.shape, r, oversample, flops=cfg.flops)
    if q.shape[1] == 0:
        return krp_sketch.tensor.tools.SvdTriplet(
            numpy.zeros((m.shape[0], 0)), numpy.zeros(0), numpy.zeros((m.shape[1], 0))
        )
    b = q.T @ m
    u_b, s, v = krp_sketch.tensor.tools.thin_svd(b)
    triplet = krp_sketch.tensor.tools.SvdTriplet(q @ u_b, s, v)
    return krp_sketch.tensor.tools.truncate_svd(triplet, min(r, triplet.rank))


def single_view(
    y: numpy.ndarray,
    z: numpy.ndarray,
    psi: krp_sketch.sketch.streams.KrpSketch | krp_sketch.sketch.streams.DenseSketch,
    flops: krp_sketch.sketch.ledger.FlopCounter | None = None,
) -> tuple:
    """
    Single-view approximation M ~ Q W from the two sketches Y = M Omega and
    Z = Psi^T M, with W the least-squares solution of (Psi^T Q) W = Z.

    The solve uses a thin QR of Psi^T Q; if its triangular factor is
    numerically singular a RankDeficiencyWarning is issued and the
    pseudo-inverse is used instead.

    :param numpy.ndarray y: right sketch, rows x l_r
    :param numpy.ndarray z: left sketch, l_l x cols
    :param psi: left sketch operator (its apply_left forms Psi^T Q)
    :param FlopCounter flops: optional counter of multiply-adds
    :rtype: tuple
    :return: (Q, W)
    """
    y, z = _as_matrix(y), _as_matrix(z)
    rows, ell_r = y.shape
    ell_l, cols = z.shape
    if psi.rows != rows or psi.ell != ell_l:
        raise krp_sketch.errors.ShapeError(
            f"left sketch of shape {(psi.rows, psi.ell)} does not match Y {y.shape} and Z {z.shape}"
        )
    if not ell_r <= ell_l <= min(rows, cols):
        raise krp_sketch.errors.ParameterError(
            f"single view needs l_r <= l_l <= min(rows, cols), got l_r={ell_r}, l_l={ell_l}, shape=({rows}, {cols})"
        )

    q = krp_sketch.tensor.tools.orthonormal_basis(y, flops=flops)
    if q.shape[1] == 0:
        return q, numpy.zeros((0, cols))
    p = psi.apply_left(q, flops=flops)
    q_p, r_p = krp_sketch.tensor.tools.thin_qr(p, flops=flops)
    diag = numpy.abs(numpy.diag(r_p))
    if diag.min() <= 1e-12 * max(p.shape) * diag.max():
        warnings.warn(
            "Psi^T Q is numerically rank deficient; using the pseudo-inverse",
            krp_sketch.errors.RankDeficiencyWarning,
            stacklevel=2,
        )
        w = krp_sketch.tensor.tools.pinv(p) @ z
    else:
        w = scipy.linalg.solve_triangular(r_p, q_p.T @ z)
    krp_sketch.sketch.ledger.count(flops, "single-view", p.size * cols)
    return q, w


def factored_svd(q: numpy.ndarray, w: numpy.ndarray, r: int) -> krp_sketch.tensor.tools.SvdTriplet:
    """
    Rank-r SVD of the product Q W with orthonormal Q: SVD of W, then U = Q U_W.

    :param numpy.ndarray q: orthonormal basis, rows x k
    :param numpy.ndarray w: coefficient matrix, k x cols
    :param int r: target rank, truncated to k
    :rtype: SvdTriplet
    """
    if r < 0:
        raise krp_sketch.errors.ParameterError(f"rank must be nonnegative, got {r}")
    if q.shape[1] == 0 or r == 0:
        return krp_sketch.tensor.tools.SvdTriplet(
            numpy.zeros((q.shape[0], 0)), numpy.zeros(0), numpy.zeros((w.shape[1], 0))
        )
    u_w, s, v = krp_sketch.tensor.tools.thin_svd(w)
    triplet = krp_sketch.tensor.tools.SvdTriplet(q @ u_w, s, v)
    return krp_sketch.tensor.tools.truncate_svd(triplet, min(r, triplet.rank))


def single_view_svd(
    m: numpy.ndarray,
    r: int,
    ell_r: int,
    ell_l: int,
    kind: str = "gaussian",
    cfg: krp_sketch.sketch.streams.SketchConfig | None = None,
    dims_right: typing.Sequence[int] | None = None,
    dims_left: typing.Sequence[int] | None = None,
) -> krp_sketch.tensor.tools.SvdTriplet:
    """
    Rank-r single-view SVD of an explicit matrix: draws Omega over the columns
    and Psi over the rows, sketches once from each side and factors Q W.
    """
    m = _as_matrix(m)
    cfg = cfg or krp_sketch.sketch.streams.SketchConfig()
    omega = draw_sketch(m.shape[1], ell_r, kind, cfg, dims=dims_right, context="omega")
    psi = draw_sketch(m.shape[0], ell_l, kind, cfg, dims=dims_left, context="psi")
    y = omega.apply_right(m, flops=cfg.flops)
    z = psi.apply_left(m, flops=cfg.flops)
    q, w = single_view(y, z, psi, flops=cfg.flops)
    return factored_svd(q, w, r)


@dataclasses.dataclass
class NystromFactor:
    """
    PSD approximation F F^T; F has one column per retained eigenvalue of Omega^T M Omega.
    """

    factor: numpy.ndarray

    @property
    def rank(self) -> int:
        return self.factor.shape[1]

    def full(self) -> numpy.ndarray:
        return self.factor @ self.factor.T

    def eig(self) -> tuple:
        """
        Nonzero eigenpairs of F F^T, eigenvalues nonincreasing.

        :rtype: tuple
        :return: (eigenvalues, orthonormal eigenvectors)
        """
        if self.rank == 0:
            return numpy.zeros(0), numpy.zeros((self.factor.shape[0], 0))
        u, s, _ = krp_sketch.tensor.tools.thin_svd(self.factor)
        return s**2, u


def nystrom_from_sketch(
    y: numpy.ndarray,
    sketch: krp_sketch.sketch.streams.KrpSketch | krp_sketch.sketch.streams.DenseSketch,
    rtol: float = 1e-12,
) -> NystromFactor:
    """
    Nystrom approximation (M Omega)(Omega^T M Omega)^+ (M Omega)^T from Y = M Omega.

    Eigenvalues of the symmetrized core at or below rtol * lambda_max are
    dropped, which also removes negative rounding noise.

    :param numpy.ndarray y: sketch Y = M Omega
    :param sketch: the sketch Omega, applied as Omega^T Y
    :param float rtol: relative eigenvalue cutoff
    :rtype: NystromFactor
    """
    y = _as_matrix(y)
    core = sketch.apply_left(y)
    core = (core + core.T) / 2.0
    lam, vecs = scipy.linalg.eigh(core)
    if lam.size == 0 or lam[-1] <= 0.0:
        return NystromFactor(numpy.zeros((y.shape[0], 0)))
    keep = lam > rtol * lam[-1]
    lam, vecs = lam[keep][::-1], vecs[:, keep][:, ::-1]
    return NystromFactor((y @ vecs) / numpy.sqrt(lam))


def nystrom_psd(
    m: numpy.ndarray,
    sketch: krp_sketch.sketch.streams.KrpSketch | krp_sketch.sketch.streams.DenseSketch,
    flops: krp_sketch.sketch.ledger.FlopCounter | None = None,
) -> NystromFactor:
    """
    Nystrom approximation of a symmetric PSD matrix.

    :param numpy.ndarray m: symmetric PSD matrix
    :param sketch: sketch with as many rows as m
    :param FlopCounter flops: optional counter of multiply-adds
    :rtype: NystromFactor
    :raises ParameterError: if m is not symmetric to 1e-10 relative
    """
    m = _as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise krp_sketch.errors.ShapeError(f"Nystrom needs a square matrix, got {m.shape}")
    norm = numpy.linalg.norm(m)
    if numpy.linalg.norm(m - m.T) > 1e-10 * norm:
        raise krp_sketch.errors.ParameterError("Nystrom approximation needs a symmetric matrix")
    return nystrom_from_sketch(sketch.apply_right(m, flops=flops), sketch)
