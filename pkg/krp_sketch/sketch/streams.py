"""
Seeded random sketches: Khatri-Rao product (KRP) sketches, dense Gaussian
sketches and the memoized factor pool shared across mode sketches.

Every column of every factor comes from its own Philox substream keyed by
(seed, context, mode, counter, column). Draws are therefore independent of
the order in which modes are processed, and both column prefixes (smaller l)
and row prefixes (smaller n) of a draw are bitwise nested.
"""

import dataclasses
import logging
import typing
import zlib
import numpy
import krp_sketch.errors
import krp_sketch.settings
import krp_sketch.sketch.ledger
import krp_sketch.tensor.tools

logger = logging.getLogger(__name__)

DISTRIBUTIONS = ("gaussian", "rademacher")


@dataclasses.dataclass
class SketchConfig:
    """
    Random-number configuration shared by every draw of an algorithm run.

    :param str distribution: entry distribution of KRP factors, gaussian or rademacher
    :param int seed: 64-bit unsigned root seed
    :param RngLedger ledger: counter of scalars drawn
    :param FlopCounter flops: counter of multiply-adds
    :param int memory_cap: largest explicit materialization, in scalars
    """

    distribution: str = krp_sketch.settings.DEFAULT_DISTRIBUTION
    seed: int = krp_sketch.settings.DEFAULT_SEED
    ledger: krp_sketch.sketch.ledger.RngLedger = dataclasses.field(
        default_factory=krp_sketch.sketch.ledger.RngLedger
    )
    flops: krp_sketch.sketch.ledger.FlopCounter = dataclasses.field(
        default_factory=krp_sketch.sketch.ledger.FlopCounter
    )
    memory_cap: int = krp_sketch.settings.MEMORY_CAP

    def __post_init__(self) -> None:
        if self.distribution not in DISTRIBUTIONS:
            raise krp_sketch.errors.ParameterError(
                f"unknown distribution {self.distribution!r}, expected one of {DISTRIBUTIONS}"
            )
        if not 0 <= self.seed < 2**64:
            raise krp_sketch.errors.ParameterError("seed must be a 64-bit unsigned integer")

    def reset_counters(self) -> None:
        self.ledger.reset()
        self.flops.reset()


def _generator(cfg: SketchConfig, context: str, mode: int, counter: int, column: int) -> numpy.random.Generator:
    key = (zlib.crc32(context.encode("utf-8")), mode, counter, column)
    sequence = numpy.random.SeedSequence(cfg.seed, spawn_key=key)
    return numpy.random.Generator(numpy.random.Philox(sequence))


def _sample(rng: numpy.random.Generator, distribution: str, size: int) -> numpy.ndarray:
    if distribution == "gaussian":
        return rng.standard_normal(size)
    return rng.integers(0, 2, size=size).astype(numpy.float64) * 2.0 - 1.0


def draw(
    cfg: SketchConfig,
    rows: int,
    cols: int,
    context: str,
    mode: int,
    counter: int = 0,
    distribution: str | None = None,
) -> numpy.ndarray:
    """
    Draws a rows x cols matrix of i.i.d. entries from the stream (context, mode, counter)
    and records rows * cols scalars in the ledger.

    :param SketchConfig cfg: configuration carrying seed and ledger
    :param int rows: row count
    :param int cols: column count
    :param str context: stream context tag
    :param int mode: stream mode label
    :param int counter: draw counter, for repeated draws under one label
    :param str distribution: overrides cfg.distribution
    :rtype: numpy.ndarray
    """
    if rows < 1 or cols < 1:
        raise krp_sketch.errors.ParameterError(
            f"random draws need positive sizes, got {rows} x {cols}"
        )
    distribution = distribution or cfg.distribution
    out = numpy.empty((rows, cols))
    for column in range(cols):
        rng = _generator(cfg, context, mode, counter, column)
        out[:, column] = _sample(rng, distribution, rows)
    cfg.ledger.add(context, mode, rows * cols)
    return out


@dataclasses.dataclass
class KrpSketch:
    """
    Implicit Khatri-Rao sketch Omega = Omega_1 kr ... kr Omega_d with factor j of shape n_j x l.

    Row index of Omega is the row-major index over (n_1, ..., n_d), matching
    the Kronecker block layout of `numpy.kron`.
    """

    factors: list

    def __post_init__(self) -> None:
        if not self.factors:
            raise krp_sketch.errors.ShapeError("a KRP sketch needs at least one factor")
        self.factors = [numpy.asarray(f, dtype=numpy.float64) for f in self.factors]
        if len({f.shape[1] for f in self.factors}) != 1:
            raise krp_sketch.errors.ShapeError(
                f"KRP factors need equal column counts, got {[f.shape for f in self.factors]}"
            )

    @property
    def ell(self) -> int:
        return self.factors[0].shape[1]

    @property
    def dims(self) -> tuple:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def rows(self) -> int:
        return int(numpy.prod(self.dims))

    def apply_right(
        self, m: numpy.ndarray, flops: krp_sketch.sketch.ledger.FlopCounter | None = None
    ) -> numpy.ndarray:
        """
        M Omega without forming Omega.

        :param numpy.ndarray m: matrix with N = prod(dims) columns
        :param FlopCounter flops: optional counter of multiply-adds
        :rtype: numpy.ndarray
        """
        m = numpy.asarray(m, dtype=numpy.float64)
        if m.ndim != 2 or m.shape[1] != self.rows:
            raise krp_sketch.errors.ShapeError(
                f"cannot sketch a matrix of shape {m.shape} with a KRP over {self.dims}"
            )
        data = numpy.reshape(m, (m.shape[0],) + self.dims)
        factors = {j + 1: f for j, f in enumerate(self.factors)}
        return krp_sketch.tensor.tools.contract_khatri_rao(data, factors, flops=flops)

    def apply_left(
        self, w: numpy.ndarray, flops: krp_sketch.sketch.ledger.FlopCounter | None = None
    ) -> numpy.ndarray:
        """Omega^T W without forming Omega."""
        w = numpy.asarray(w, dtype=numpy.float64)
        if w.ndim != 2:
            raise krp_sketch.errors.ShapeError(f"expected a matrix, got shape {w.shape}")
        return self.apply_right(w.T, flops=flops).T

    def materialize(self, cap: int = krp_sketch.settings.MEMORY_CAP) -> numpy.ndarray:
        krp_sketch.errors.check_memory(self.rows * self.ell, cap, "a KRP sketch")
        return krp_sketch.tensor.tools.khatri_rao(*self.factors)

    def prefix(self, ell: int) -> "KrpSketch":
        """Sketch made of the first `ell` columns of every factor."""
        if not 1 <= ell <= self.ell:
            raise krp_sketch.errors.ParameterError(f"prefix {ell} outside 1..{self.ell}")
        return KrpSketch([f[:, :ell] for f in self.factors])


@dataclasses.dataclass
class DenseSketch:
    """Explicit sketch matrix, the dense Gaussian baseline."""

    matrix: numpy.ndarray

    @property
    def ell(self) -> int:
        return self.matrix.shape[1]

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    def apply_right(
        self, m: numpy.ndarray, flops: krp_sketch.sketch.ledger.FlopCounter | None = None
    ) -> numpy.ndarray:
        m = numpy.asarray(m, dtype=numpy.float64)
        if m.ndim != 2 or m.shape[1] != self.rows:
            raise krp_sketch.errors.ShapeError(
                f"cannot sketch a matrix of shape {m.shape} with {self.rows} sketch rows"
            )
        krp_sketch.sketch.ledger.count(flops, "dense-sketch", m.size * self.ell)
        return m @ self.matrix

    def apply_left(
        self, w: numpy.ndarray, flops: krp_sketch.sketch.ledger.FlopCounter | None = None
    ) -> numpy.ndarray:
        w = numpy.asarray(w, dtype=numpy.float64)
        return self.apply_right(w.T, flops=flops).T

    def materialize(self, cap: int = krp_sketch.settings.MEMORY_CAP) -> numpy.ndarray:
        return self.matrix

    def prefix(self, ell: int) -> "DenseSketch":
        if not 1 <= ell <= self.ell:
            raise krp_sketch.errors.ParameterError(f"prefix {ell} outside 1..{self.ell}")
        return DenseSketch(self.matrix[:, :ell])


Sketch = KrpSketch | DenseSketch


def draw_krp(
    dims: typing.Sequence[int],
    ell: int,
    cfg: SketchConfig,
    context: str = "krp",
    counter: int = 0,
) -> KrpSketch:
    """
    Draws the d independent factors of a KRP sketch; factor j uses stream (context, j).

    :param Sequence[int] dims: mode sizes n_1..n_d
    :param int ell: column count l
    :param SketchConfig cfg: random configuration
    :param str context: stream context tag
    :param int counter: draw counter
    :rtype: KrpSketch
    :return: sketch whose draw added sum(n_j) * l to the ledger
    """
    if ell < 1:
        raise krp_sketch.errors.ParameterError(f"sketch size must be positive, got {ell}")
    if not dims or min(dims) < 1:
        raise krp_sketch.errors.ShapeError(f"mode sizes must be positive, got {tuple(dims)}")
    factors = [draw(cfg, n, ell, context, j, counter) for j, n in enumerate(dims)]
    logger.debug("drew KRP sketch over %s with %d columns", tuple(dims), ell)
    return KrpSketch(factors)


def materialize(sketch: KrpSketch | DenseSketch, cap: int = krp_sketch.settings.MEMORY_CAP) -> numpy.ndarray:
    """
    Explicit sketch matrix; column k of a KRP is Omega_1[:, k] kron ... kron Omega_d[:, k].

    :raises MemoryCapError: when N * l exceeds `cap`
    """
    return sketch.materialize(cap)


def draw_gaussian_dense(
    rows: int,
    ell: int,
    cfg: SketchConfig,
    context: str = "gaussian",
    mode: int = 0,
    counter: int = 0,
) -> numpy.ndarray:
    """
    Dense standard Gaussian sketch, whatever cfg.distribution says.

    :param int rows: row count
    :param int ell: column count
    :param SketchConfig cfg: random configuration
    :rtype: numpy.ndarray
    """
    krp_sketch.errors.check_memory(rows * ell, cfg.memory_cap, "a dense Gaussian sketch")
    return draw(cfg, rows, ell, context, mode, counter, distribution="gaussian")


class MemoPool:
    """
    One set of d-1 random matrices reused by all d mode sketches of a Tucker run.

    Slot k has max(n_k, n_{k+1}) rows. The mode-i sketch takes slot j for the
    modes j < i and slot j-1 for the modes j > i, truncated to n_j rows, so
    no mode sketch draws new scalars.
    """

    def __init__(self, dims: typing.Sequence[int], slots: list) -> None:
        self.dims = tuple(dims)
        self.slots = slots

    @property
    def ell(self) -> int:
        return self.slots[0].shape[1]

    def for_mode(self, mode: int) -> list:
        """
        Factors for the modes other than `mode`, ascending.

        :param int mode: 0-based mode being sketched
        :rtype: list
        """
        if not 0 <= mode < len(self.dims):
            raise krp_sketch.errors.ShapeError(f"mode {mode} out of range for dims {self.dims}")
        factors = []
        for j, n in enumerate(self.dims):
            if j == mode:
                continue
            slot = self.slots[j if j < mode else j - 1]
            factors.append(slot[:n])
        return factors

    def sketch_for_mode(self, mode: int) -> KrpSketch:
        return KrpSketch(self.for_mode(mode))


def memoized_streams(
    dims: typing.Sequence[int],
    ell: int,
    cfg: SketchConfig,
    context: str = "sketch-0",
) -> MemoPool:
    """
    Draws the shared factor pool for memoized randomized HOSVD.

    Slot k uses stream (context, k + 1), the stream the fresh mode-0 sketch
    uses for mode k + 1, so the mode-0 factors coincide with the fresh ones
    (row prefixes are nested). The ledger grows by sum_k max(n_k, n_{k+1}) * l,
    i.e. (d-1) n l for uniform sizes.

    :param Sequence[int] dims: mode sizes, at least two modes
    :param int ell: column count
    :param SketchConfig cfg: random configuration
    :rtype: MemoPool
    """
    dims = tuple(int(n) for n in dims)
    if len(dims) < 2:
        raise krp_sketch.errors.ShapeError("memoization needs a tensor of order at least 2")
    if ell < 1 or min(dims) < 1:
        raise krp_sketch.errors.ParameterError(f"invalid pool sizes dims={dims}, ell={ell}")
    slots = [
        draw(cfg, max(dims[k], dims[k + 1]), ell, context, k + 1)
        for k in range(len(dims) - 1)
    ]
    return MemoPool(dims, slots)
