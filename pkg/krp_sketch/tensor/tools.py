"""
Dense tensor and matrix kernels: unfoldings, tensor-times-matrix products,
Kronecker / Khatri-Rao / Hadamard products, MTTKRP and the factorizations
(QR, SVD, pseudo-inverse) the randomized algorithms are built from.

Tensors are linearized first-index-fastest (column-major), so the mode-i
unfolding of a multi-TTM product reads X_(i) (A_d kron ... kron A_1)^T with the
i-th factor left out. Modes are 0-based.
"""

import logging
import typing
import numpy
import scipy.linalg
import krp_sketch.errors
import krp_sketch.sketch.ledger

logger = logging.getLogger(__name__)


class DenseTensor:
    """
    Order-d dense tensor of float64 scalars.

    The underlying `numpy.ndarray` is indexed by the d mode indices; the flat
    linearization used for files and for `vector` is first-index-fastest.
    """

    def __init__(self, data: numpy.ndarray) -> None:
        data = numpy.asarray(data, dtype=numpy.float64)
        if data.ndim < 1:
            raise krp_sketch.errors.ShapeError("a tensor needs at least one mode")
        if data.size == 0:
            raise krp_sketch.errors.ShapeError(
                f"every mode size must be positive, got {data.shape}"
            )
        self.data = data

    @classmethod
    def from_vector(cls, vector: numpy.ndarray, dims: typing.Sequence[int]) -> "DenseTensor":
        """
        Builds a tensor from its first-index-fastest linearization.

        :param numpy.ndarray vector: flat data of length prod(dims)
        :param Sequence[int] dims: mode sizes
        :rtype: DenseTensor
        """
        vector = numpy.asarray(vector, dtype=numpy.float64).ravel()
        if vector.size != int(numpy.prod(dims)):
            raise krp_sketch.errors.ShapeError(
                f"data length {vector.size} does not match dims {tuple(dims)}"
            )
        return cls(numpy.reshape(vector, tuple(dims), order="F"))

    @property
    def dims(self) -> tuple:
        return self.data.shape

    @property
    def order(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def vector(self) -> numpy.ndarray:
        """First-index-fastest linearization."""
        return numpy.ravel(self.data, order="F")

    def copy(self) -> "DenseTensor":
        return DenseTensor(self.data.copy())

    def __repr__(self) -> str:
        return f"DenseTensor(dims={self.dims})"


class SvdTriplet(typing.NamedTuple):
    """Thin SVD M = U diag(S) V^T with nonincreasing S."""

    U: numpy.ndarray
    S: numpy.ndarray
    V: numpy.ndarray

    @property
    def rank(self) -> int:
        return self.S.size

    def full(self) -> numpy.ndarray:
        return (self.U * self.S) @ self.V.T


def _check_mode(order: int, mode: int) -> None:
    if not 0 <= mode < order:
        raise krp_sketch.errors.ShapeError(
            f"mode {mode} is out of range for an order-{order} tensor"
        )


def _as_matrix(m: numpy.ndarray) -> numpy.ndarray:
    m = numpy.asarray(m, dtype=numpy.float64)
    if m.ndim != 2:
        raise krp_sketch.errors.ShapeError(f"expected a matrix, got shape {m.shape}")
    return m


def mode_unfold(x: DenseTensor, mode: int) -> numpy.ndarray:
    """
    Mode-`mode` unfolding X_(mode): the mode fibers become columns, and the
    remaining indices are ordered first-index-fastest.

    :param DenseTensor x: tensor to unfold
    :param int mode: 0-based mode index
    :rtype: numpy.ndarray
    :return: matrix of shape (n_mode, prod of the other sizes)
    """
    _check_mode(x.order, mode)
    moved = numpy.moveaxis(x.data, mode, 0)
    return numpy.reshape(moved, (x.dims[mode], -1), order="F")


def mode_fold(m: numpy.ndarray, mode: int, dims: typing.Sequence[int]) -> DenseTensor:
    """
    Inverse of `mode_unfold`.

    :param numpy.ndarray m: unfolded matrix
    :param int mode: 0-based mode the matrix was unfolded along
    :param Sequence[int] dims: mode sizes of the folded tensor
    :rtype: DenseTensor
    """
    m = _as_matrix(m)
    dims = tuple(int(n) for n in dims)
    _check_mode(len(dims), mode)
    if m.shape != (dims[mode], int(numpy.prod(dims)) // dims[mode]):
        raise krp_sketch.errors.ShapeError(
            f"matrix of shape {m.shape} cannot be folded along mode {mode} into {dims}"
        )
    moved_dims = (dims[mode],) + dims[:mode] + dims[mode + 1 :]
    moved = numpy.reshape(m, moved_dims, order="F")
    return DenseTensor(numpy.moveaxis(moved, 0, mode))


def ttm(
    x: DenseTensor,
    a: numpy.ndarray,
    mode: int,
    transpose: bool = False,
    flops: krp_sketch.sketch.ledger.FlopCounter | None = None,
) -> DenseTensor:
    """
    Tensor-times-matrix product Y = X x_mode A, i.e. Y_(mode) = A X_(mode).

    :param DenseTensor x: input tensor
    :param numpy.ndarray a: matrix with n_mode columns (rows when `transpose`)
    :param int mode: 0-based mode
    :param bool transpose: multiply by A^T instead of A
    :param FlopCounter flops: optional counter of multiply-adds
    :rtype: DenseTensor
    """
    _check_mode(x.order, mode)
    a = _as_matrix(a)
    if transpose:
        a = a.T
    if a.shape[1] != x.dims[mode]:
        raise krp_sketch.errors.ShapeError(
            f"matrix with {a.shape[1]} columns cannot multiply mode {mode} of size {x.dims[mode]}"
        )
    product = numpy.tensordot(a, x.data, axes=(1, mode))
    krp_sketch.sketch.ledger.count(flops, "ttm", a.shape[0] * x.size)
    return DenseTensor(numpy.moveaxis(product, 0, mode))


def multi_ttm(
    x: DenseTensor,
    mats: typing.Mapping[int, numpy.ndarray] | typing.Sequence[tuple],
    transpose: bool = False,
    flops: krp_sketch.sketch.ledger.FlopCounter | None = None,
) -> DenseTensor:
    """
    Applies several TTM products, one per listed mode.

    The contraction order is greedy: at each step the mode whose product gives
    the smallest intermediate tensor goes first (ties: lowest mode). The result
    equals the sequential product in any order up to rounding.

    :param DenseTensor x: input tensor
    :param mats: mapping (or sequence of pairs) from mode to matrix
    :param bool transpose: multiply by the transposes
    :param FlopCounter flops: optional counter of multiply-adds
    :rtype: DenseTensor
    """
    pairs = list(mats.items()) if isinstance(mats, typing.Mapping) else list(mats)
    modes = [mode for mode, _ in pairs]
    if len(set(modes)) != len(modes):
        raise krp_sketch.errors.ParameterError(f"duplicate modes in multi-TTM: {modes}")
    pending = {}
    for mode, a in pairs:
        _check_mode(x.order, mode)
        a = _as_matrix(a)
        pending[mode] = a.T if transpose else a
        if pending[mode].shape[1] != x.dims[mode]:
            raise krp_sketch.errors.ShapeError(
                f"matrix for mode {mode} has {pending[mode].shape[1]} columns, expected {x.dims[mode]}"
            )

    y = x
    while pending:
        mode = min(
            pending,
            key=lambda m: (y.size // y.dims[m] * pending[m].shape[0], m),
        )
        y = ttm(y, pending.pop(mode), mode, flops=flops)
    return y


def kron(a: numpy.ndarray, b: numpy.ndarray) -> numpy.ndarray:
    """Matrix Kronecker product with the block layout [a_ij B]."""
    return numpy.kron(_as_matrix(a), _as_matrix(b))


def kron_tensor(f: DenseTensor, g: DenseTensor) -> DenseTensor:
    """
    Tensor Kronecker product H = F kron G with H[A, B, ...] = F[a, b, ...] G[alpha, beta, ...],
    A = alpha + a * q (0-based), where q is the size of G along that mode.

    Tensors of different order are padded with trailing singleton modes.

    :param DenseTensor f: outer (slow-index) tensor
    :param DenseTensor g: inner (fast-index) tensor
    :rtype: DenseTensor
    """
    order = max(f.order, g.order)
    a = numpy.reshape(f.data, f.dims + (1,) * (order - f.order))
    b = numpy.reshape(g.data, g.dims + (1,) * (order - g.order))
    return DenseTensor(numpy.kron(a, b))


def khatri_rao(*mats: numpy.ndarray) -> numpy.ndarray:
    """
    Column-wise Kronecker product A_1 kr A_2 kr ... (first factor slowest).

    :param numpy.ndarray mats: matrices sharing a column count
    :rtype: numpy.ndarray
    """
    if not mats:
        raise krp_sketch.errors.ShapeError("khatri_rao needs at least one matrix")
    mats = [_as_matrix(m) for m in mats]
    columns = {m.shape[1] for m in mats}
    if len(columns) != 1:
        raise krp_sketch.errors.ShapeError(
            f"Khatri-Rao factors need equal column counts, got {[m.shape for m in mats]}"
        )
    result = mats[0]
    for m in mats[1:]:
        result = scipy.linalg.khatri_rao(result, m)
    return result


def transposed_khatri_rao(a: numpy.ndarray, u: numpy.ndarray) -> numpy.ndarray:
    """
    Row-wise Kronecker product (A^T kr U^T)^T: row i is a_i kron u_i.
    """
    a, u = _as_matrix(a), _as_matrix(u)
    if a.shape[0] != u.shape[0]:
        raise krp_sketch.errors.ShapeError(
            f"transposed Khatri-Rao needs equal row counts, got {a.shape} and {u.shape}"
        )
    return khatri_rao(a.T, u.T).T


def contract_khatri_rao(
    data: numpy.ndarray,
    factors: typing.Mapping[int, numpy.ndarray],
    flops: krp_sketch.sketch.ledger.FlopCounter | None = None,
) -> numpy.ndarray:
    """
    Contracts the listed axes of `data` against the columns of a Khatri-Rao
    product without forming it.

    Axis j is contracted with factors[j] (n_j x l); the l columns are shared.
    Factors are applied one at a time in ascending axis order, so the
    summation order is fixed.

    :param numpy.ndarray data: n-d array
    :param Mapping[int, numpy.ndarray] factors: axis -> factor matrix
    :param FlopCounter flops: optional counter of multiply-adds
    :rtype: numpy.ndarray
    :return: array over the uncontracted axes (in order) with a trailing axis of length l
    """
    axes = sorted(factors)
    if not axes:
        raise krp_sketch.errors.ShapeError("no axes to contract")
    ell = {factors[a].shape[1] for a in axes}
    if len(ell) != 1:
        raise krp_sketch.errors.ShapeError("Khatri-Rao factors need equal column counts")
    for axis in axes:
        if factors[axis].shape[0] != data.shape[axis]:
            raise krp_sketch.errors.ShapeError(
                f"factor for axis {axis} has {factors[axis].shape[0]} rows, expected {data.shape[axis]}"
            )

    first = axes[0]
    out = numpy.tensordot(data, factors[first], axes=(first, 0))
    krp_sketch.sketch.ledger.count(flops, "mttkrp", out.size * data.shape[first])
    remaining = [a for a in range(data.ndim) if a != first]
    for axis in axes[1:]:
        pos = remaining.index(axis)
        labels = list(range(out.ndim))
        rank_label = out.ndim - 1
        krp_sketch.sketch.ledger.count(flops, "mttkrp", out.size)
        out = numpy.einsum(
            out,
            labels,
            factors[axis],
            [pos, rank_label],
            [label for label in labels if label != pos],
        )
        remaining.pop(pos)
    return out


def mttkrp(
    x: DenseTensor,
    factors: typing.Sequence[numpy.ndarray | None],
    mode: int,
    ell: int | None = None,
    flops: krp_sketch.sketch.ledger.FlopCounter | None = None,
) -> numpy.ndarray:
    """
    Matricized tensor times Khatri-Rao product
    X_(mode) (W_d kr ... kr W_{mode+1} kr W_{mode-1} kr ... kr W_1).

    :param DenseTensor x: input tensor
    :param factors: d-1 matrices for the modes other than `mode` in ascending
        order, or d entries whose `mode` entry is ignored
    :param int mode: 0-based mode kept as rows
    :param int ell: column count, only needed for an order-1 tensor
    :param FlopCounter flops: optional counter of multiply-adds
    :rtype: numpy.ndarray
    :return: matrix of shape (n_mode, l)
    """
    _check_mode(x.order, mode)
    factors = list(factors)
    if len(factors) == x.order:
        factors = factors[:mode] + factors[mode + 1 :]
    if len(factors) != x.order - 1:
        raise krp_sketch.errors.ShapeError(
            f"MTTKRP on an order-{x.order} tensor needs {x.order - 1} factors, got {len(factors)}"
        )
    if x.order == 1:
        if ell is None:
            raise krp_sketch.errors.ShapeError("an order-1 MTTKRP needs the column count")
        return numpy.repeat(x.data[:, None], ell, axis=1)

    others = [j for j in range(x.order) if j != mode]
    by_axis = {j: _as_matrix(f) for j, f in zip(others, factors)}
    return contract_khatri_rao(x.data, by_axis, flops=flops)


def hadamard(x: DenseTensor, y: DenseTensor) -> DenseTensor:
    """Elementwise product of two tensors of equal dims."""
    if x.dims != y.dims:
        raise krp_sketch.errors.ShapeError(
            f"Hadamard product needs equal dims, got {x.dims} and {y.dims}"
        )
    return DenseTensor(x.data * y.data)


def fro_norm(x: DenseTensor | numpy.ndarray) -> float:
    data = x.data if isinstance(x, DenseTensor) else numpy.asarray(x)
    return float(numpy.linalg.norm(data.ravel()))


def _check_nonempty(m: numpy.ndarray) -> numpy.ndarray:
    m = _as_matrix(m)
    if m.size == 0:
        raise krp_sketch.errors.ShapeError("empty matrix")
    return m


def thin_qr(
    m: numpy.ndarray, flops: krp_sketch.sketch.ledger.FlopCounter | None = None
) -> tuple:
    """
    Householder thin QR of a tall matrix.

    :param numpy.ndarray m: matrix with rows >= cols
    :param FlopCounter flops: optional counter of multiply-adds
    :rtype: tuple
    :return: (Q, R) with Q of the same shape as m
    """
    m = _check_nonempty(m)
    rows, cols = m.shape
    if rows < cols:
        raise krp_sketch.errors.ShapeError(
            f"thin QR needs rows >= cols, got {m.shape}"
        )
    q, r = scipy.linalg.qr(m, mode="economic")
    krp_sketch.sketch.ledger.count(flops, "qr", 2 * rows * cols * cols)
    return q, r


def orthonormal_basis(
    y: numpy.ndarray,
    rtol: float = 1e-12,
    flops: krp_sketch.sketch.ledger.FlopCounter | None = None,
) -> numpy.ndarray:
    """
    Orthonormal basis for range(Y) from a column-pivoted thin QR. Trailing
    columns with |R_ii| <= rtol |R_11| are dropped instead of padded, so a
    rank-deficient sketch yields fewer columns.

    :param numpy.ndarray y: sketch matrix
    :param float rtol: relative diagonal threshold
    :param FlopCounter flops: optional counter of multiply-adds
    :rtype: numpy.ndarray
    """
    y = _check_nonempty(y)
    q, r, _ = scipy.linalg.qr(y, mode="economic", pivoting=True)
    krp_sketch.sketch.ledger.count(flops, "qr", 2 * y.shape[0] * y.shape[1] ** 2)
    diag = numpy.abs(numpy.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        return q[:, :0]
    keep = int(numpy.count_nonzero(diag > rtol * diag[0]))
    if keep < y.shape[1]:
        logger.debug("sketch of %d columns has numerical rank %d", y.shape[1], keep)
    return q[:, :keep]


def thin_svd(m: numpy.ndarray) -> SvdTriplet:
    """
    Thin SVD, falling back from the divide-and-conquer driver to the QR
    iteration driver if the former fails to converge.
    """
    m = _check_nonempty(m)
    try:
        u, s, vt = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesdd")
    except numpy.linalg.LinAlgError:
        logger.warning("gesdd did not converge on a %s matrix, retrying with gesvd", m.shape)
        u, s, vt = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")
    return SvdTriplet(u, s, vt.T)


def truncate_svd(t: SvdTriplet, r: int) -> SvdTriplet:
    """Keeps the leading r singular triplets (the first r in computed order on ties)."""
    if not 0 <= r <= t.rank:
        raise krp_sketch.errors.ParameterError(
            f"cannot truncate a rank-{t.rank} SVD to rank {r}"
        )
    return SvdTriplet(t.U[:, :r], t.S[:r], t.V[:, :r])


def pinv(m: numpy.ndarray, tol: float | None = None) -> numpy.ndarray:
    """
    Moore-Penrose pseudo-inverse. Singular values at or below tol * sigma_1
    are treated as zero.

    :param numpy.ndarray m: matrix
    :param float tol: relative cutoff; defaults to 1e-12 * max(rows, cols)
    :rtype: numpy.ndarray
    """
    m = _check_nonempty(m)
    if tol is None:
        tol = 1e-12 * max(m.shape)
    u, s, v = thin_svd(m)
    if s[0] == 0.0:
        return numpy.zeros(m.T.shape)
    keep = s > tol * s[0]
    return (v[:, keep] / s[keep]) @ u[:, keep].T
