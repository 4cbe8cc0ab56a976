"""
Synthetic test data: the Cauchy tensor, tensors of exact multilinear rank,
matrices with prescribed spectra and spatio-temporal snapshot fields.
"""

import dataclasses
import math
import typing
import numpy
import krp_sketch.errors
import krp_sketch.settings
import krp_sketch.tensor.tools


def cauchy_entry(index: typing.Sequence[int], alpha: float) -> float:
    """
    Single Cauchy-tensor entry (i_1^alpha + ... + i_d^alpha)^(-1/alpha), 1-based indices.
    """
    if alpha <= 0:
        raise krp_sketch.errors.ParameterError(f"alpha must be positive, got {alpha}")
    total = math.fsum(float(i) ** alpha for i in index)
    return total ** (-1.0 / alpha)


def cauchy_tensor(
    n: int, d: int, alpha: float, cap: int = krp_sketch.settings.MEMORY_CAP
) -> krp_sketch.tensor.tools.DenseTensor:
    """
    Order-d Cauchy tensor of mode size n with entries (i_1^alpha + ... + i_d^alpha)^(-1/alpha).
    n=250, d=4 holds about 3.9e9 scalars and needs a cap raised above the default.

    :param int n: mode size
    :param int d: order
    :param float alpha: positive exponent
    :param int cap: memory cap in scalars
    :rtype: DenseTensor
    """
    if n < 1 or d < 1:
        raise krp_sketch.errors.ParameterError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    if alpha <= 0:
        raise krp_sketch.errors.ParameterError(f"alpha must be positive, got {alpha}")
    krp_sketch.errors.check_memory(n**d, cap, "a Cauchy tensor")
    powers = numpy.arange(1, n + 1, dtype=numpy.float64) ** alpha
    total = sum(numpy.ix_(*([powers] * d)))
    return krp_sketch.tensor.tools.DenseTensor(numpy.asarray(total) ** (-1.0 / alpha))


def random_orthonormal(rows: int, cols: int, rng: numpy.random.Generator) -> numpy.ndarray:
    q, _ = krp_sketch.tensor.tools.thin_qr(rng.standard_normal((rows, cols)))
    return q


def exact_rank_tensor(
    dims: typing.Sequence[int],
    ranks: typing.Sequence[int],
    rng: numpy.random.Generator,
) -> krp_sketch.tensor.tools.DenseTensor:
    """
    Tensor of exact multilinear rank: a Gaussian core times random orthonormal factors.
    """
    core = krp_sketch.tensor.tools.DenseTensor(rng.standard_normal(tuple(ranks)))
    factors = {i: random_orthonormal(n, r, rng) for i, (n, r) in enumerate(zip(dims, ranks))}
    return krp_sketch.tensor.tools.multi_ttm(core, factors)


def spectrum_matrix(
    singular_values: typing.Sequence[float],
    rows: int,
    cols: int,
    rng: numpy.random.Generator,
) -> numpy.ndarray:
    """
    U diag(sigma) V^T with random orthonormal U, V.
    """
    sigma = numpy.asarray(singular_values, dtype=numpy.float64)
    k = sigma.size
    if k > min(rows, cols):
        raise krp_sketch.errors.ShapeError(f"{k} singular values for a {rows} x {cols} matrix")
    return (random_orthonormal(rows, k, rng) * sigma) @ random_orthonormal(cols, k, rng).T


def geometric_spectrum(size: int, ratio: float) -> numpy.ndarray:
    return ratio ** numpy.arange(size, dtype=numpy.float64)


@dataclasses.dataclass
class SyntheticFlow:
    """
    Spatio-temporal field of exact spatial multilinear rank: a sum of separable
    smooth spatial modes with random temporal coefficients, plus optional
    Gaussian noise.

    :param tuple spatial_dims: grid sizes N_1..N_d
    :param tuple ranks: spatial multilinear rank
    :param int snapshots: training snapshot count T
    :param int held_out: number of test snapshots drawn from the same span
    :param float noise: standard deviation of additive noise on training data
    :param int seed: seed of the generator
    """

    spatial_dims: tuple
    ranks: tuple
    snapshots: int
    held_out: int = 5
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.spatial_dims) != len(self.ranks):
            raise krp_sketch.errors.ShapeError("one rank per spatial mode is needed")
        for n, r in zip(self.spatial_dims, self.ranks):
            if not 1 <= r <= n:
                raise krp_sketch.errors.ShapeError(f"rank {r} invalid for a grid of size {n}")

    def modes(self) -> list:
        """
        Orthonormal spatial modes per grid direction: low-frequency cosines,
        randomly rotated within their span.
        """
        rng = numpy.random.default_rng(self.seed)
        modes = []
        for n, r in zip(self.spatial_dims, self.ranks):
            grid = (numpy.arange(n) + 0.5) / n
            waves = numpy.cos(numpy.pi * numpy.outer(grid, numpy.arange(r)))
            basis, _ = krp_sketch.tensor.tools.thin_qr(waves)
            rotation = random_orthonormal(r, r, rng)
            modes.append(basis @ rotation)
        return modes

    def _fields(self, count: int, rng: numpy.random.Generator) -> krp_sketch.tensor.tools.DenseTensor:
        decay = [1.0 / (1.0 + numpy.arange(r)) for r in self.ranks]
        scale = decay[0]
        for w in decay[1:]:
            scale = numpy.multiply.outer(scale, w)
        core = rng.standard_normal(tuple(self.ranks) + (count,)) * scale[..., None]
        factors = dict(enumerate(self.modes()))
        return krp_sketch.tensor.tools.multi_ttm(krp_sketch.tensor.tools.DenseTensor(core), factors)

    def generate(self) -> tuple:
        """
        :rtype: tuple
        :return: (training snapshots N_1 x ... x N_d x T, held-out snapshots N_1 x ... x N_d x held_out)
        """
        rng = numpy.random.default_rng([self.seed, 1])
        train = self._fields(self.snapshots, rng)
        if self.noise > 0.0:
            train = krp_sketch.tensor.tools.DenseTensor(
                train.data + self.noise * rng.standard_normal(train.dims)
            )
        test = self._fields(self.held_out, rng)
        return train, test
