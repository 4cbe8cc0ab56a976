"""
Eigensystem realization algorithm (ERA) on block-Hankel matrices of Markov
parameters, with the Hankel SVD computed densely or by single-view sketching
of the block-structured Hankel matrix.
"""

import dataclasses
import logging
import math
import warnings
import numpy
import krp_sketch.blocks.structured
import krp_sketch.errors
import krp_sketch.settings
import krp_sketch.sketch.streams
import krp_sketch.tensor.tools

logger = logging.getLogger(__name__)

METHODS = ("krp-single-view", "gaussian-single-view", "dense-svd")


@dataclasses.dataclass
class EraSystem:
    """
    Discrete-time state-space model x_{k+1} = A x_k + B u_k, y_k = C x_k + D u_k.
    """

    a: numpy.ndarray
    b: numpy.ndarray
    c: numpy.ndarray
    d: numpy.ndarray

    def __post_init__(self) -> None:
        r = self.a.shape[0]
        if (
            self.a.shape != (r, r)
            or self.b.shape[0] != r
            or self.c.shape[1] != r
            or self.d.shape != (self.c.shape[0], self.b.shape[1])
        ):
            raise krp_sketch.errors.ShapeError(
                f"inconsistent system shapes A{self.a.shape} B{self.b.shape} C{self.c.shape} D{self.d.shape}"
            )
        if not numpy.all(numpy.isfinite(self.a)):
            raise krp_sketch.errors.ParameterError("state matrix has non-finite entries")

    @property
    def order(self) -> int:
        return self.a.shape[0]

    @property
    def outputs(self) -> int:
        return self.c.shape[0]

    @property
    def inputs(self) -> int:
        return self.b.shape[1]

    def eigenvalues(self) -> numpy.ndarray:
        return numpy.linalg.eigvals(self.a)


def markov_parameters(system: EraSystem, count: int) -> numpy.ndarray:
    """
    H_0 = D and H_k = C A^(k-1) B for k = 1..count-1.

    :param EraSystem system: state-space model
    :param int count: number of blocks
    :rtype: numpy.ndarray
    :return: array of shape (count, m, n)
    """
    blocks = numpy.empty((count, system.outputs, system.inputs))
    blocks[0] = system.d
    state = system.b
    for k in range(1, count):
        blocks[k] = system.c @ state
        state = system.a @ state
    return blocks


@dataclasses.dataclass
class MarkovSequence:
    """
    Markov parameters H_0..H_K of uniform shape m x n with time horizon s;
    at least 2s - 1 blocks are needed to fill the shifted Hankel matrix.
    """

    blocks: numpy.ndarray
    s: int

    def __post_init__(self) -> None:
        self.blocks = numpy.asarray(self.blocks, dtype=numpy.float64)
        if self.blocks.ndim != 3:
            raise krp_sketch.errors.ShapeError(f"Markov blocks must be a 3-d array, got {self.blocks.shape}")
        if self.s < 2:
            raise krp_sketch.errors.ParameterError(f"time horizon s must be at least 2, got {self.s}")
        if self.blocks.shape[0] < 2 * self.s - 1:
            raise krp_sketch.errors.ShapeError(
                f"horizon s={self.s} needs {2 * self.s - 1} Markov blocks, got {self.blocks.shape[0]}"
            )

    @classmethod
    def from_system(cls, system: EraSystem, s: int) -> "MarkovSequence":
        return cls(markov_parameters(system, 2 * s), s)

    @property
    def block_shape(self) -> tuple:
        return self.blocks.shape[1:]

    def as_tensor(self) -> krp_sketch.tensor.tools.DenseTensor:
        """Blocks stacked as an m x n x count tensor."""
        return krp_sketch.tensor.tools.DenseTensor(numpy.moveaxis(self.blocks, 0, -1))

    @classmethod
    def from_tensor(cls, x: krp_sketch.tensor.tools.DenseTensor, s: int | None = None) -> "MarkovSequence":
        """
        Inverse of `as_tensor`; s defaults to the largest horizon the blocks support.
        """
        if x.order != 3:
            raise krp_sketch.errors.ShapeError(f"Markov tensors have order 3, got {x.order}")
        count = x.dims[2]
        return cls(numpy.moveaxis(x.data, -1, 0), s if s is not None else (count + 1) // 2)


def build_hankel(seq: MarkovSequence, shift: int = 0) -> krp_sketch.blocks.structured.BlockStructuredMatrix:
    """
    Block-Hankel matrix with (s-1) x (s-1) blocks; block (i, j) (1-based) is
    H_{i+j-1+shift}. Term k = 1..2s-3 pairs the Hankel pattern with ones where
    i + j - 1 = k and the block H_{k+shift}.

    :param MarkovSequence seq: Markov parameters
    :param int shift: 0 for the Hankel matrix, 1 for the one-step shifted one
    :rtype: BlockStructuredMatrix
    """
    g = seq.s - 1
    terms = 2 * g - 1
    if terms + shift >= seq.blocks.shape[0]:
        raise krp_sketch.errors.ShapeError(
            f"shift {shift} needs Markov blocks up to H_{terms + shift}, have {seq.blocks.shape[0]}"
        )
    patterns = []
    for k in range(1, terms + 1):
        coords = [(i, k - 1 - i) for i in range(g) if 0 <= k - 1 - i < g]
        patterns.append(coords)
    blocks = [seq.blocks[k + shift] for k in range(1, terms + 1)]
    return krp_sketch.blocks.structured.BlockStructuredMatrix(patterns, blocks, (g, g), seq.block_shape)


def hausdorff_eigs(a, b) -> float:
    """
    Hausdorff distance max(max_a min_b |a - b|, max_b min_a |a - b|) between finite sets of complex numbers.
    """
    a = numpy.asarray(a, dtype=numpy.complex128).ravel()
    b = numpy.asarray(b, dtype=numpy.complex128).ravel()
    if a.size == 0 or b.size == 0:
        raise krp_sketch.errors.ParameterError("Hausdorff distance needs nonempty sets")
    dist = numpy.abs(a[:, None] - b[None, :])
    return float(max(dist.min(axis=1).max(), dist.min(axis=0).max()))


def hankel_svd(
    hankel: krp_sketch.blocks.structured.BlockStructuredMatrix,
    r: int,
    oversample: int,
    method: str,
    cfg: krp_sketch.sketch.streams.SketchConfig,
) -> krp_sketch.tensor.tools.SvdTriplet:
    """
    Rank-r SVD of a block-Hankel matrix by the chosen method. Single-view
    methods use l_r = r + oversample and l_l = ceil(1.5 l_r), both clipped to
    the smaller dimension.
    """
    if method == "dense-svd":
        dense = hankel.materialize(cfg.memory_cap)
        return krp_sketch.tensor.tools.truncate_svd(krp_sketch.tensor.tools.thin_svd(dense), r)
    if method not in METHODS:
        raise krp_sketch.errors.ParameterError(f"unknown ERA method {method!r}, expected one of {METHODS}")
    limit = min(hankel.shape)
    ell_r = min(r + oversample, limit)
    ell_l = min(math.ceil(1.5 * ell_r), limit)
    kind = "krp" if method == "krp-single-view" else "gaussian"
    return krp_sketch.blocks.structured.single_view_block(hankel, r, ell_r, ell_l, cfg, kind=kind)


def era_identify(
    seq: MarkovSequence,
    r: int,
    oversample: int = krp_sketch.settings.DEFAULT_OVERSAMPLE,
    method: str = "krp-single-view",
    cfg: krp_sketch.sketch.streams.SketchConfig | None = None,
) -> EraSystem:
    """
    Identifies an order-r system from Markov parameters.

    With the rank-r Hankel SVD U S V^T and the shifted Hankel matrix H1:
    A = S^-1/2 U^T (H1 V) S^-1/2, B = S^1/2 V^T[:, :n], C = U[:m] S^1/2, D = H_0.
    H1 V is formed through the block structure of H1.

    Orders above the numerical rank k of the Hankel matrix issue an
    OrderWarning; states k+1..r are then disconnected and sit at eigenvalue 0.

    :param MarkovSequence seq: Markov parameters
    :param int r: system order
    :param int oversample: oversampling for the single-view methods
    :param str method: krp-single-view, gaussian-single-view or dense-svd
    :param SketchConfig cfg: random configuration and counters
    :rtype: EraSystem
    """
    cfg = cfg or krp_sketch.sketch.streams.SketchConfig()
    hankel = build_hankel(seq)
    if not 1 <= r <= min(hankel.shape):
        raise krp_sketch.errors.ParameterError(
            f"order {r} outside 1..{min(hankel.shape)} for a {hankel.shape} Hankel matrix"
        )
    triplet = hankel_svd(hankel, r, oversample, method, cfg)
    s_all = numpy.asarray(triplet.S)
    tol = 1e-12 * s_all[0] if s_all.size else 0.0
    k = int(numpy.count_nonzero(s_all > tol)) if s_all.size and s_all[0] > 0 else 0
    if k < r:
        warnings.warn(
            f"requested order {r} exceeds the numerical rank {k} of the Hankel matrix",
            krp_sketch.errors.OrderWarning,
            stacklevel=2,
        )
    m, n = seq.block_shape
    # states beyond the numerical rank are left disconnected: zero rows of A and B, zero columns of C
    a = numpy.zeros((r, r))
    b = numpy.zeros((r, n))
    c = numpy.zeros((m, r))
    if k > 0:
        u, s, v = triplet.U[:, :k], s_all[:k], triplet.V[:, :k]
        root = numpy.sqrt(s)
        shifted = build_hankel(seq, shift=1)
        a[:k, :k] = (u.T @ shifted.matmul(v, flops=cfg.flops)) / numpy.outer(root, root)
        b[:k] = (v[:n] * root).T
        c[:, :k] = u[:m] * root
    logger.info("ERA (%s): order %d (numerical rank %d) from %s Hankel matrix", method, r, k, hankel.shape)
    return EraSystem(a, b, c, seq.blocks[0].copy())


def markov_error(system: EraSystem, seq: MarkovSequence) -> float:
    """
    Largest relative Markov-parameter mismatch ||H_k(system) - H_k|| / ||H_k|| over k = 1..2s-2.
    """
    count = 2 * seq.s - 1
    predicted = markov_parameters(system, count)
    errors = []
    for k in range(1, count):
        norm = numpy.linalg.norm(seq.blocks[k])
        errors.append(numpy.linalg.norm(predicted[k] - seq.blocks[k]) / (norm if norm > 0 else 1.0))
    return float(max(errors))


def random_stable_system(order: int, outputs: int, inputs: int, seed: int = 0) -> EraSystem:
    """
    Random system whose state matrix is symmetric with eigenvalues of magnitude
    in [0.3, 0.9] and random sign.
    """
    rng = numpy.random.default_rng(seed)
    q, _ = krp_sketch.tensor.tools.thin_qr(rng.standard_normal((order, order)))
    lam = rng.uniform(0.3, 0.9, order) * rng.choice([-1.0, 1.0], order)
    return EraSystem(
        (q * lam) @ q.T,
        rng.standard_normal((order, inputs)),
        rng.standard_normal((outputs, order)),
        rng.standard_normal((outputs, inputs)),
    )


@dataclasses.dataclass(frozen=True)
class EraPreset:
    outputs: int
    inputs: int
    s: int
    order: int
    r: int
    oversample: int


PRESETS = {
    "full": EraPreset(outputs=155, inputs=50, s=200, order=155, r=155, oversample=20),
    "desk": EraPreset(outputs=6, inputs=4, s=25, order=5, r=5, oversample=20),
    "wide": EraPreset(outputs=20, inputs=20, s=25, order=5, r=5, oversample=20),
}


def era_preset(name: str) -> EraPreset:
    """
    Named ERA problem sizes: "full" (full scale), "desk" and "wide" (desk
    scale with square blocks).
    """
    try:
        return PRESETS[name]
    except KeyError:
        raise krp_sketch.errors.ParameterError(f"unknown ERA preset {name!r}, expected one of {sorted(PRESETS)}")
