"""
Block-structured matrices M = sum_j E_j kron M_j with 0/1 placement patterns,
their multilevel generalization, and KRP-sketched single-view compression
that never forms M or the sketch.
"""

import dataclasses
import functools
import logging
import math
import typing
import numpy
import scipy.sparse
import krp_sketch.errors
import krp_sketch.lowrank.tools
import krp_sketch.settings
import krp_sketch.sketch.ledger
import krp_sketch.sketch.streams
import krp_sketch.tensor.tools

logger = logging.getLogger(__name__)


def as_pattern(e, shape: tuple | None = None) -> scipy.sparse.csr_matrix:
    """
    Converts a dense 0/1 array, a sparse matrix or a list of (row, col)
    tuples into a CSR pattern.

    :param e: pattern in any of the accepted forms
    :param tuple shape: required when `e` is a coordinate list
    :rtype: scipy.sparse.csr_matrix
    :raises ParameterError: when an entry is not 0 or 1
    """
    if isinstance(e, list) and (not e or isinstance(e[0], tuple)):
        if shape is None:
            raise krp_sketch.errors.ShapeError("a coordinate-list pattern needs its shape")
        coords = numpy.asarray(e, dtype=numpy.int64).reshape(-1, 2)
        pattern = scipy.sparse.coo_matrix(
            (numpy.ones(len(coords)), (coords[:, 0], coords[:, 1])), shape=shape
        ).tocsr()
    else:
        pattern = scipy.sparse.csr_matrix(e, dtype=numpy.float64)
    pattern.sum_duplicates()
    pattern.eliminate_zeros()
    if numpy.any(pattern.data != 1.0):
        raise krp_sketch.errors.ParameterError("placement patterns must contain only zeros and ones")
    return pattern


def _apply_kron(
    mats: typing.Sequence,
    x: numpy.ndarray,
    flops: krp_sketch.sketch.ledger.FlopCounter | None = None,
) -> numpy.ndarray:
    """
    (A_1 kron ... kron A_K) X for a k-column X, one factor at a time.
    Factors may be dense arrays or sparse matrices.
    """
    cols = [a.shape[1] for a in mats]
    k = x.shape[1]
    data = numpy.reshape(x, tuple(cols) + (k,))
    for axis, a in enumerate(mats):
        moved = numpy.moveaxis(data, axis, 0)
        rest = moved.shape[1:]
        product = a @ numpy.reshape(moved, (moved.shape[0], -1))
        product = numpy.asarray(product)
        nnz = a.nnz if scipy.sparse.issparse(a) else a.size
        krp_sketch.sketch.ledger.count(flops, "block-matmul", nnz * product.shape[1])
        data = numpy.moveaxis(numpy.reshape(product, (a.shape[0],) + rest), 0, axis)
    return numpy.reshape(data, (-1, k))


@dataclasses.dataclass
class BlockStructuredMatrix:
    """
    M = sum_j E_j kron M_j with p x q patterns E_j and m x n dense blocks M_j;
    overall shape (m p) x (n q).
    """

    patterns: list
    blocks: list
    pattern_shape: tuple
    block_shape: tuple

    def __post_init__(self) -> None:
        if len(self.patterns) != len(self.blocks):
            raise krp_sketch.errors.ShapeError(
                f"{len(self.patterns)} patterns but {len(self.blocks)} blocks"
            )
        self.pattern_shape = tuple(int(v) for v in self.pattern_shape)
        self.block_shape = tuple(int(v) for v in self.block_shape)
        self.patterns = [as_pattern(e, self.pattern_shape) for e in self.patterns]
        self.blocks = [numpy.asarray(b, dtype=numpy.float64) for b in self.blocks]
        for e in self.patterns:
            if e.shape != self.pattern_shape:
                raise krp_sketch.errors.ShapeError(
                    f"pattern of shape {e.shape}, expected {self.pattern_shape}"
                )
        for b in self.blocks:
            if b.shape != self.block_shape:
                raise krp_sketch.errors.ShapeError(
                    f"block of shape {b.shape}, expected {self.block_shape}"
                )

    @classmethod
    def from_terms(cls, terms: typing.Sequence[tuple]) -> "BlockStructuredMatrix":
        """
        Builds the matrix from a nonempty list of (pattern, block) pairs with dense or sparse patterns.
        """
        if not terms:
            raise krp_sketch.errors.ShapeError("from_terms needs at least one term to infer shapes")
        patterns = [as_pattern(e) for e, _ in terms]
        blocks = [numpy.asarray(b, dtype=numpy.float64) for _, b in terms]
        return cls(patterns, blocks, patterns[0].shape, blocks[0].shape)

    @property
    def terms(self) -> int:
        return len(self.blocks)

    @property
    def shape(self) -> tuple:
        (p, q), (m, n) = self.pattern_shape, self.block_shape
        return (m * p, n * q)

    @property
    def row_dims(self) -> tuple:
        return (self.pattern_shape[0], self.block_shape[0])

    @property
    def col_dims(self) -> tuple:
        return (self.pattern_shape[1], self.block_shape[1])

    def transpose(self) -> "BlockStructuredMatrix":
        return BlockStructuredMatrix(
            [e.T.tocsr() for e in self.patterns],
            [b.T for b in self.blocks],
            self.pattern_shape[::-1],
            self.block_shape[::-1],
        )

    def sketch(
        self,
        factors: typing.Sequence[numpy.ndarray],
        flops: krp_sketch.sketch.ledger.FlopCounter | None = None,
    ) -> numpy.ndarray:
        """
        Y = sum_j (E_j Omega_1) kr (M_j Omega_2) for the KRP sketch Omega_1 kr Omega_2.

        :param Sequence[numpy.ndarray] factors: (q x l, n x l) KRP factors
        :param FlopCounter flops: optional counter of multiply-adds
        :rtype: numpy.ndarray
        """
        if len(factors) != 2:
            raise krp_sketch.errors.ShapeError(f"expected 2 KRP factors, got {len(factors)}")
        omega_e, omega_m = (numpy.asarray(f, dtype=numpy.float64) for f in factors)
        if omega_e.shape[0] != self.pattern_shape[1] or omega_m.shape[0] != self.block_shape[1]:
            raise krp_sketch.errors.ShapeError(
                f"KRP factors of shapes {omega_e.shape}, {omega_m.shape} do not match column dims {self.col_dims}"
            )
        if omega_e.shape[1] != omega_m.shape[1]:
            raise krp_sketch.errors.ShapeError("KRP factors need equal column counts")
        ell = omega_e.shape[1]
        (p, _), (m, n) = self.pattern_shape, self.block_shape
        y = numpy.zeros((p * m, ell))
        for e, b in zip(self.patterns, self.blocks):
            y += krp_sketch.tensor.tools.khatri_rao(e @ omega_e, b @ omega_m)
            krp_sketch.sketch.ledger.count(flops, "structured-sketch", e.nnz * ell + m * n * ell + p * m * ell)
        return y

    def matmul(
        self, x: numpy.ndarray, flops: krp_sketch.sketch.ledger.FlopCounter | None = None
    ) -> numpy.ndarray:
        """M X for a dense X with n q rows, term by term."""
        x = numpy.asarray(x, dtype=numpy.float64)
        if x.ndim != 2 or x.shape[0] != self.shape[1]:
            raise krp_sketch.errors.ShapeError(
                f"cannot multiply a {self.shape} block matrix by shape {x.shape}"
            )
        out = numpy.zeros((self.shape[0], x.shape[1]))
        for e, b in zip(self.patterns, self.blocks):
            out += _apply_kron([e, b], x, flops=flops)
        return out

    def materialize(self, cap: int = krp_sketch.settings.MEMORY_CAP) -> numpy.ndarray:
        rows, cols = self.shape
        krp_sketch.errors.check_memory(rows * cols, cap, "a block-structured matrix")
        out = numpy.zeros((rows, cols))
        for e, b in zip(self.patterns, self.blocks):
            out += numpy.kron(e.toarray(), b)
        return out


@dataclasses.dataclass
class MultilevelBlockMatrix:
    """
    M = sum over (i_1..i_L) of E^(1)_{i_1} kron ... kron E^(L)_{i_L} kron M^(i_1..i_L).

    `level_patterns[j]` lists the patterns of level j (each p_j x q_j); `leaves`
    maps an index tuple to its m x n leaf block. Index tuples absent from
    `leaves` contribute nothing.
    """

    level_patterns: list
    leaves: dict
    block_shape: tuple

    def __post_init__(self) -> None:
        if not self.level_patterns:
            raise krp_sketch.errors.ShapeError("a multilevel matrix needs at least one level")
        self.level_patterns = [[as_pattern(e) for e in level] for level in self.level_patterns]
        for j, level in enumerate(self.level_patterns):
            if not level or len({e.shape for e in level}) != 1:
                raise krp_sketch.errors.ShapeError(f"level {j} needs patterns of one common shape")
        self.block_shape = tuple(int(v) for v in self.block_shape)
        self.leaves = {tuple(k): numpy.asarray(v, dtype=numpy.float64) for k, v in self.leaves.items()}
        for index, block in self.leaves.items():
            if len(index) != self.levels or any(
                not 0 <= i < len(level) for i, level in zip(index, self.level_patterns)
            ):
                raise krp_sketch.errors.ShapeError(f"leaf index {index} does not address the levels")
            if block.shape != self.block_shape:
                raise krp_sketch.errors.ShapeError(
                    f"leaf {index} has shape {block.shape}, expected {self.block_shape}"
                )

    @property
    def levels(self) -> int:
        return len(self.level_patterns)

    @property
    def row_dims(self) -> tuple:
        return tuple(level[0].shape[0] for level in self.level_patterns) + (self.block_shape[0],)

    @property
    def col_dims(self) -> tuple:
        return tuple(level[0].shape[1] for level in self.level_patterns) + (self.block_shape[1],)

    @property
    def shape(self) -> tuple:
        return (math.prod(self.row_dims), math.prod(self.col_dims))

    def _term_factors(self, index: tuple) -> list:
        return [self.level_patterns[j][i] for j, i in enumerate(index)]

    def transpose(self) -> "MultilevelBlockMatrix":
        return MultilevelBlockMatrix(
            [[e.T.tocsr() for e in level] for level in self.level_patterns],
            {k: v.T for k, v in self.leaves.items()},
            self.block_shape[::-1],
        )

    def sketch(
        self,
        factors: typing.Sequence[numpy.ndarray],
        flops: krp_sketch.sketch.ledger.FlopCounter | None = None,
    ) -> numpy.ndarray:
        """
        Y = sum over leaves of (E^(1) Omega_1) kr ... kr (E^(L) Omega_L) kr (M^(i) Omega_{L+1}).

        Level products E^(j)_i Omega_j are computed once per distinct pattern.

        :param Sequence[numpy.ndarray] factors: L + 1 factors, q_j x l then n x l
        :param FlopCounter flops: optional counter of multiply-adds
        :rtype: numpy.ndarray
        """
        factors = [numpy.asarray(f, dtype=numpy.float64) for f in factors]
        if tuple(f.shape[0] for f in factors) != self.col_dims:
            raise krp_sketch.errors.ShapeError(
                f"KRP factor rows {[f.shape[0] for f in factors]} do not match column dims {self.col_dims}"
            )
        if len({f.shape[1] for f in factors}) != 1:
            raise krp_sketch.errors.ShapeError("KRP factors need equal column counts")
        ell = factors[0].shape[1]
        projected = []
        for j, level in enumerate(self.level_patterns):
            projected.append([e @ factors[j] for e in level])
            krp_sketch.sketch.ledger.count(flops, "structured-sketch", sum(e.nnz for e in level) * ell)
        y = numpy.zeros((self.shape[0], ell))
        m, n = self.block_shape
        for index in sorted(self.leaves):
            parts = [projected[j][i] for j, i in enumerate(index)]
            parts.append(self.leaves[index] @ factors[-1])
            y += krp_sketch.tensor.tools.khatri_rao(*parts)
            krp_sketch.sketch.ledger.count(flops, "structured-sketch", m * n * ell + self.shape[0] * ell)
        return y

    def matmul(
        self, x: numpy.ndarray, flops: krp_sketch.sketch.ledger.FlopCounter | None = None
    ) -> numpy.ndarray:
        x = numpy.asarray(x, dtype=numpy.float64)
        if x.ndim != 2 or x.shape[0] != self.shape[1]:
            raise krp_sketch.errors.ShapeError(
                f"cannot multiply a {self.shape} multilevel matrix by shape {x.shape}"
            )
        out = numpy.zeros((self.shape[0], x.shape[1]))
        for index in sorted(self.leaves):
            out += _apply_kron(self._term_factors(index) + [self.leaves[index]], x, flops=flops)
        return out

    def materialize(self, cap: int = krp_sketch.settings.MEMORY_CAP) -> numpy.ndarray:
        rows, cols = self.shape
        krp_sketch.errors.check_memory(rows * cols, cap, "a multilevel block matrix")
        out = numpy.zeros((rows, cols))
        for index in sorted(self.leaves):
            dense = [e.toarray() for e in self._term_factors(index)] + [self.leaves[index]]
            out += functools.reduce(numpy.kron, dense)
        return out


BlockMatrix = BlockStructuredMatrix | MultilevelBlockMatrix


def structured_sketch(
    m: BlockMatrix,
    sketch: krp_sketch.sketch.streams.KrpSketch,
    flops: krp_sketch.sketch.ledger.FlopCounter | None = None,
) -> numpy.ndarray:
    """
    M Omega for a KRP sketch over the column dims of M, without forming M or Omega.

    :param BlockMatrix m: block-structured or multilevel matrix
    :param KrpSketch sketch: sketch with dims (q, n), or (q_1..q_L, n)
    :param FlopCounter flops: optional counter of multiply-adds
    :rtype: numpy.ndarray
    """
    if sketch.dims != m.col_dims:
        raise krp_sketch.errors.ShapeError(
            f"sketch over {sketch.dims} does not match the column dims {m.col_dims}"
        )
    return m.sketch(sketch.factors, flops=flops)


def multilevel_sketch(
    m: MultilevelBlockMatrix,
    sketch: krp_sketch.sketch.streams.KrpSketch,
    flops: krp_sketch.sketch.ledger.FlopCounter | None = None,
) -> numpy.ndarray:
    """Structured sketch of a multilevel matrix with an (L+1)-factor KRP."""
    return structured_sketch(m, sketch, flops=flops)


def materialize_block(m: BlockMatrix, cap: int = krp_sketch.settings.MEMORY_CAP) -> numpy.ndarray:
    """
    Explicit matrix, for test oracles and small problems.

    :raises MemoryCapError: when the matrix has more than `cap` entries
    """
    return m.materialize(cap)


def dense_sketch_flops(m: BlockMatrix, ell: int) -> int:
    """Multiply-adds of sketching the materialized matrix with an explicit sketch."""
    rows, cols = m.shape
    return rows * cols * ell


def single_view_block(
    m: BlockMatrix,
    r: int,
    ell_r: int,
    ell_l: int | None = None,
    cfg: krp_sketch.sketch.streams.SketchConfig | None = None,
    kind: str = "krp",
) -> krp_sketch.tensor.tools.SvdTriplet:
    """
    Rank-r single-view randomized SVD of a block-structured matrix.

    With kind="krp" both sketches are Khatri-Rao products over the block
    dims (Omega over the column dims, Psi over the row dims) and Y = M Omega,
    Z = Psi^T M are formed through the structure of M and M^T. With
    kind="gaussian" the sketches are dense and applied term by term.

    :param BlockMatrix m: matrix to compress
    :param int r: target rank
    :param int ell_r: right sketch size
    :param int ell_l: left sketch size, defaults to ceil(1.5 * ell_r)
    :param SketchConfig cfg: random configuration
    :param str kind: "krp" or "gaussian"
    :rtype: SvdTriplet
    """
    cfg = cfg or krp_sketch.sketch.streams.SketchConfig()
    if ell_l is None:
        ell_l = math.ceil(1.5 * ell_r)
    if r < 0:
        raise krp_sketch.errors.ParameterError(f"rank must be nonnegative, got {r}")
    rows, cols = m.shape
    if not 1 <= ell_r <= ell_l <= min(rows, cols):
        raise krp_sketch.errors.ParameterError(
            f"need 1 <= l_r <= l_l <= {min(rows, cols)}, got l_r={ell_r}, l_l={ell_l}"
        )
    mt = m.transpose()
    if kind == "krp":
        omega = krp_sketch.sketch.streams.draw_krp(m.col_dims, ell_r, cfg, context="omega")
        psi = krp_sketch.sketch.streams.draw_krp(m.row_dims, ell_l, cfg, context="psi")
        y = structured_sketch(m, omega, flops=cfg.flops)
        z = structured_sketch(mt, psi, flops=cfg.flops).T
    elif kind == "gaussian":
        omega = krp_sketch.sketch.streams.DenseSketch(
            krp_sketch.sketch.streams.draw_gaussian_dense(cols, ell_r, cfg, context="omega")
        )
        psi = krp_sketch.sketch.streams.DenseSketch(
            krp_sketch.sketch.streams.draw_gaussian_dense(rows, ell_l, cfg, context="psi")
        )
        y = m.matmul(omega.matrix, flops=cfg.flops)
        z = mt.matmul(psi.matrix, flops=cfg.flops).T
    else:
        raise krp_sketch.errors.ParameterError(f"unknown sketch kind {kind!r}")
    logger.debug("single-view %s sketches of a %s block matrix: l_r=%d, l_l=%d", kind, m.shape, ell_r, ell_l)
    q, w = krp_sketch.lowrank.tools.single_view(y, z, psi, flops=cfg.flops)
    return krp_sketch.lowrank.tools.factored_svd(q, w, r)


def nystrom_block(
    m: BlockMatrix,
    sketch: krp_sketch.sketch.streams.KrpSketch,
    flops: krp_sketch.sketch.ledger.FlopCounter | None = None,
) -> krp_sketch.lowrank.tools.NystromFactor:
    """
    Nystrom approximation of a symmetric PSD block-structured matrix from its
    structured KRP sketch. Symmetry is not checked.
    """
    return krp_sketch.lowrank.tools.nystrom_from_sketch(structured_sketch(m, sketch, flops=flops), sketch)
