"""
Tucker-format tensors, target-rank specifications and approximation error.
"""

import dataclasses
import math
import typing
import numpy
import krp_sketch.errors
import krp_sketch.tensor.tools


@dataclasses.dataclass
class TuckerTensor:
    """
    X ~ core x_1 factors[0] x_2 ... x_d factors[d-1].

    :param DenseTensor core: r_1 x ... x r_d core
    :param list factors: n_i x r_i factor matrices
    :param list orthonormal: per-factor flag; flagged factors are checked on construction
    """

    core: krp_sketch.tensor.tools.DenseTensor
    factors: list
    orthonormal: list | None = None

    def __post_init__(self) -> None:
        self.factors = [numpy.asarray(f, dtype=numpy.float64) for f in self.factors]
        if len(self.factors) != self.core.order:
            raise krp_sketch.errors.ShapeError(
                f"{len(self.factors)} factors for an order-{self.core.order} core"
            )
        for i, (f, r) in enumerate(zip(self.factors, self.core.dims)):
            if f.ndim != 2 or f.shape[1] != r:
                raise krp_sketch.errors.ShapeError(
                    f"factor {i} has shape {f.shape}, core size along mode {i} is {r}"
                )
        if self.orthonormal is None:
            self.orthonormal = [False] * len(self.factors)
        for i, (f, flagged) in enumerate(zip(self.factors, self.orthonormal)):
            if flagged:
                r = f.shape[1]
                if numpy.linalg.norm(f.T @ f - numpy.eye(r)) > 1e-10 * r:
                    raise krp_sketch.errors.ShapeError(f"factor {i} is flagged orthonormal but is not")

    @property
    def order(self) -> int:
        return self.core.order

    @property
    def dims(self) -> tuple:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def ranks(self) -> tuple:
        return self.core.dims

    @property
    def storage(self) -> int:
        """Number of stored scalars."""
        return self.core.size + sum(f.size for f in self.factors)

    def full(self) -> krp_sketch.tensor.tools.DenseTensor:
        """Dense reconstruction by multi-TTM."""
        return krp_sketch.tensor.tools.multi_ttm(self.core, dict(enumerate(self.factors)))


@dataclasses.dataclass(frozen=True)
class RankSpec:
    """
    Target multilinear rank and oversampling.

    Sketch sizes are l_i = r_i + p, clipped to min(n_i, product of the other mode sizes).
    """

    ranks: tuple
    oversample: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        if not self.ranks or min(self.ranks) < 1:
            raise krp_sketch.errors.ParameterError(f"target ranks must be positive, got {self.ranks}")
        if self.oversample < 0:
            raise krp_sketch.errors.ParameterError(f"oversampling must be nonnegative, got {self.oversample}")

    @classmethod
    def coerce(cls, ranks: "RankSpec | typing.Sequence[int] | int", order: int, oversample: int = 0) -> "RankSpec":
        """
        Builds a RankSpec from a spec, a sequence or a single integer broadcast to all modes.
        """
        if isinstance(ranks, RankSpec):
            return ranks
        if isinstance(ranks, int):
            ranks = (ranks,) * order
        return cls(tuple(ranks), oversample)

    def validate(self, dims: typing.Sequence[int]) -> None:
        if len(self.ranks) != len(dims):
            raise krp_sketch.errors.ShapeError(
                f"{len(self.ranks)} target ranks for an order-{len(dims)} tensor"
            )
        for i, (r, n) in enumerate(zip(self.ranks, dims)):
            if r > n:
                raise krp_sketch.errors.ShapeError(
                    f"target rank {r} exceeds the size {n} of mode {i}"
                )

    def sketch_sizes(self, dims: typing.Sequence[int]) -> tuple:
        """
        :param Sequence[int] dims: mode sizes
        :rtype: tuple
        :return: per-mode sketch sizes l_i
        """
        self.validate(dims)
        total = math.prod(dims)
        return tuple(
            min(r + self.oversample, n, total // n) for r, n in zip(self.ranks, dims)
        )


def tucker_error(x: krp_sketch.tensor.tools.DenseTensor, t: TuckerTensor) -> float:
    """
    Relative error ||X - reconstruct(t)||_F / ||X||_F; the absolute error when X is zero.

    :param DenseTensor x: reference tensor
    :param TuckerTensor t: approximation
    :rtype: float
    """
    if t.dims != x.dims:
        raise krp_sketch.errors.ShapeError(f"Tucker dims {t.dims} do not match tensor dims {x.dims}")
    residual = krp_sketch.tensor.tools.fro_norm(x.data - t.full().data)
    norm = krp_sketch.tensor.tools.fro_norm(x)
    return residual / norm if norm > 0.0 else residual
