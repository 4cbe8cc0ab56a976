"""
Computable forms of the KRP sketching guarantees: the constant C_{K,d}, the
Gamma terms of the error bounds, the bound right-hand sides and a solver for
the smallest sample size satisfying each implicit sample-size inequality.

All powers ln^d are evaluated in log space.
"""

import dataclasses
import logging
import math
import typing
import numpy
import krp_sketch.errors

logger = logging.getLogger(__name__)

VARIANTS = (
    "rrf",
    "rrf-Q",
    "hosvd",
    "hosvd-Q",
    "sthosvd",
    "sthosvd-Q",
    "subspace",
    "subspace-N",
    "appendixA",
    "single-view",
)

MAX_ITERATIONS = 10**6
# sample sizes above this are not represented exactly by the float right-hand sides
MAX_SAMPLE = 2**53


@dataclasses.dataclass(frozen=True)
class BoundParams:
    """
    Parameters shared by the bounds.

    :param int r: target rank
    :param int d: number of KRP factors (tensor order for the Tucker bounds)
    :param float delta: failure probability in (0, 1)
    :param float eps: embedding distortion in (0, 1)
    :param float K: subgaussian norm bound, at least 1
    :param float Cs: absolute constant of the subgaussian moment bound, uncalibrated
    :param tuple dims: mode sizes, for the Tucker variants
    :param int M: row count of the sketched matrix
    :param int N: column count of the sketched matrix (row count of the sketch)
    """

    r: int
    d: int = 1
    delta: float = 0.05
    eps: float = 0.5
    K: float = 1.0
    Cs: float = 1.0
    dims: tuple | None = None
    M: int | None = None
    N: int | None = None

    def __post_init__(self) -> None:
        if self.r < 1:
            raise krp_sketch.errors.ParameterError(f"r must be at least 1, got {self.r}")
        if self.d < 1:
            raise krp_sketch.errors.ParameterError(f"d must be at least 1, got {self.d}")
        if not 0.0 < self.delta < 1.0:
            raise krp_sketch.errors.ParameterError(f"delta must lie in (0, 1), got {self.delta}")
        if not 0.0 < self.eps < 1.0:
            raise krp_sketch.errors.ParameterError(f"eps must lie in (0, 1), got {self.eps}")
        if self.K < 1.0:
            raise krp_sketch.errors.ParameterError(f"K must be at least 1, got {self.K}")
        if self.Cs <= 0.0:
            raise krp_sketch.errors.ParameterError(f"Cs must be positive, got {self.Cs}")
        if self.dims is not None:
            object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))
            if len(self.dims) != self.d:
                raise krp_sketch.errors.ParameterError(f"{len(self.dims)} mode sizes for d={self.d}")

    @property
    def uncalibrated(self) -> bool:
        # Cs is never pinned
        return True


def log_c_kd(K: float, Cs: float, d: int) -> float:
    """ln C_{K,d} = ln 2 + d ln(2e) + 2d ln(Cs K sqrt 2)."""
    return math.log(2.0) + d * (math.log(2.0) + 1.0) + 2 * d * math.log(Cs * K * math.sqrt(2.0))


def c_kd(K: float, Cs: float, d: int) -> float:
    """
    C_{K,d} = 2 (2e)^d (Cs K sqrt 2)^(2d).

    :param float K: subgaussian norm bound
    :param float Cs: absolute constant
    :param int d: number of factors, d >= 0
    :rtype: float
    """
    return math.exp(log_c_kd(K, Cs, d))


def _c_log_power(K: float, Cs: float, d: int, x: float) -> float:
    """C_{K,d} ln^d(x) for x > 1, computed in log space."""
    if d == 0:
        return c_kd(K, Cs, 0)
    return math.exp(log_c_kd(K, Cs, d) + d * math.log(math.log(x)))


def _log_count(count: float, scale: float, delta: float) -> float:
    # counts such as N - r can reach zero for tiny problems; the log argument is floored at 1
    return math.log(max(scale * max(count, 1.0) / delta, 1.0))


def gamma_rrf(params: BoundParams, ell: int, N: int) -> float:
    """
    Gamma = (1/l)(1 + C_{K,d} ln^d(8l/delta)) ln(4(N - r)/delta) of the range-finder bound.

    :param BoundParams params: parameters
    :param int ell: sample size
    :param int N: column count of the sketched matrix
    :rtype: float
    """
    if ell < 1:
        raise krp_sketch.errors.ParameterError(f"sample size must be positive, got {ell}")
    head = 1.0 + _c_log_power(params.K, params.Cs, params.d, 8.0 * ell / params.delta)
    return head * _log_count(N - params.r, 4.0, params.delta) / ell


def gamma_single_view(params: BoundParams, ell_r: int, ell_l: int, M: int, N: int) -> tuple:
    """
    (Gamma_r, Gamma_l) of the two-sided single-view bound.

    :rtype: tuple
    """
    c = lambda ell: 1.0 + _c_log_power(params.K, params.Cs, params.d, 16.0 * ell / params.delta)
    gamma_r = c(ell_r) * _log_count(N - params.r, 8.0, params.delta) / ell_r
    gamma_l = c(ell_l) * _log_count(M - ell_r, 8.0, params.delta) / ell_l
    return gamma_r, gamma_l


def gamma_tucker(params: BoundParams, ell: int, r: int, n_other: int) -> float:
    """
    Gamma_i = (1/l_i)(1 + C_{K,d-1} ln^{d-1}(8 d l_i/delta)) ln(4 d (n_other - r_i)/delta),
    with n_other the product of the other mode sizes (randomized HOSVD) or
    l^{<} n^{>} (randomized ST-HOSVD).
    """
    d = params.d
    head = 1.0 + _c_log_power(params.K, params.Cs, d - 1, 8.0 * d * ell / params.delta)
    return head * _log_count(n_other - r, 4.0 * d, params.delta) / ell


def rrf_bound(tail_sq: float, r: int, gamma: float) -> float:
    """(1 + 2r(1 + 2 Gamma)) ||Sigma_perp||_F^2."""
    return (1.0 + 2.0 * r * (1.0 + 2.0 * gamma)) * tail_sq


def single_view_bound(tail_sq: float, r: int, ell_r: int, gamma_r: float, gamma_l: float) -> float:
    """(1 + 2r(1 + 2 Gamma_r))(1 + 2 l_r(1 + Gamma_l)) ||Sigma_perp||_F^2."""
    return (1.0 + 2.0 * r * (1.0 + 2.0 * gamma_r)) * (1.0 + 2.0 * ell_r * (1.0 + gamma_l)) * tail_sq


def tucker_bound(
    singular_values: typing.Sequence[numpy.ndarray],
    ranks: typing.Sequence[int],
    ells: typing.Sequence[int],
    params: BoundParams,
    variant: str = "hosvd",
) -> float:
    """
    sum_i (1 + 2 r_i (1 + 2 Gamma_i)) sum_{j > r_i} sigma_j^2(X_(i)).

    :param singular_values: per mode, the singular values of X_(i)
    :param ranks: target ranks r_i
    :param ells: sample sizes l_i
    :param BoundParams params: parameters; params.dims gives the mode sizes
    :param str variant: "hosvd" or "sthosvd" (ascending mode order)
    :rtype: float
    """
    if params.dims is None:
        raise krp_sketch.errors.ParameterError("the Tucker bounds need the mode sizes")
    dims = params.dims
    if not len(singular_values) == len(ranks) == len(ells) == len(dims):
        raise krp_sketch.errors.ShapeError("one singular-value list, rank and sample size per mode")
    total = 0.0
    for i, (sigma, r, ell) in enumerate(zip(singular_values, ranks, ells)):
        tail = float(numpy.sum(numpy.asarray(sigma, dtype=numpy.float64)[r:] ** 2))
        if variant == "hosvd":
            n_other = math.prod(dims) // dims[i]
        elif variant == "sthosvd":
            n_other = math.prod(ells[:i]) * math.prod(dims[i + 1 :])
        else:
            raise krp_sketch.errors.ParameterError(f"unknown Tucker bound variant {variant!r}")
        gamma = gamma_tucker(params, ell, r, n_other)
        total += (1.0 + 2.0 * r * (1.0 + 2.0 * gamma)) * tail
    return total


@dataclasses.dataclass
class SampleSize:
    """
    Result of the sample-size solver.

    :param str variant: inequality solved
    :param bool feasible: whether a size within the cap exists
    :param int ell: smallest satisfying size (the largest over modes for Tucker variants)
    :param tuple ells: per-mode sizes for Tucker variants, (l_r, l_l) for single-view
    :param int cap: feasibility ceiling used
    :param int iterations: fixed-point iterations performed
    :param str message: diagnostic when infeasible
    """

    variant: str
    feasible: bool
    ell: int | None = None
    ells: tuple = ()
    cap: int | None = None
    iterations: int = 0
    message: str = ""

    def require(self) -> int:
        if not self.feasible:
            raise krp_sketch.errors.InfeasibleError(self.message)
        return self.ell


def _minimal(rhs: typing.Callable[[int], float], start: float, cap: int) -> tuple:
    """
    Smallest integer l >= 1 with l >= rhs(l), for rhs nondecreasing.

    Fixed-point iteration l <- ceil(rhs(l)) from ceil(start), then a downward
    scan. Returns (l, iterations) or (None, iterations) past the cap.
    """
    ell = max(1, math.ceil(start))
    iterations = 0
    while ell < rhs(ell):
        iterations += 1
        if iterations > MAX_ITERATIONS:
            return None, iterations
        ell = max(ell + 1, math.ceil(rhs(ell)))
        if ell > cap:
            return None, iterations
    if ell > cap:
        return None, iterations
    while ell > 1 and ell - 1 >= rhs(ell - 1):
        ell -= 1
    return ell, iterations


def _cap(*limits) -> int:
    known = [int(v) for v in limits if v is not None]
    return min(known + [MAX_SAMPLE])


def _rrf_rhs(params: BoundParams, fixed_arg: float | None = None, factor: float = 8.0) -> typing.Callable:
    r, delta = params.r, params.delta
    log_r = math.log(4.0 * r / delta)

    def rhs(ell: int) -> float:
        arg = fixed_arg if fixed_arg is not None else 8.0 * ell / delta
        return factor * (r + r * _c_log_power(params.K, params.Cs, params.d, arg)) * log_r

    return rhs


def _tucker_rhs(params: BoundParams, r: int, fixed_q: int | None) -> typing.Callable:
    d, delta = params.d, params.delta
    log_r = math.log(4.0 * r * d / delta)

    def rhs(ell: int) -> float:
        arg = 8.0 * d * (fixed_q if fixed_q is not None else ell) / delta
        return 8.0 * (r + r * _c_log_power(params.K, params.Cs, d - 1, arg)) * log_r

    return rhs


def appendix_coefficients(params: BoundParams) -> tuple:
    """
    (alpha, beta) of the N-independent inequality l >= alpha + beta sqrt(l).
    """
    r, d, delta = params.r, params.d, params.delta
    c = c_kd(params.K, params.Cs, d)
    scale = 8.0 / params.eps**2 * math.log(4.0 * r / delta)
    alpha = scale * (r + 2**d * r * c * math.log(8.0 / delta) ** d)
    beta = scale * r * (2 * d) ** d * c
    return alpha, beta


def alt_sample_size(params: BoundParams) -> int:
    """Closed-form sufficient size 4 max(alpha, beta^2) of the N-independent bound."""
    alpha, beta = appendix_coefficients(params)
    return math.ceil(4.0 * max(alpha, beta**2))


def _infeasible(variant: str, cap: int, iterations: int, what: str = "l") -> SampleSize:
    message = (
        f"{variant}: no {what} up to the cap {cap} satisfies the inequality"
        if iterations <= MAX_ITERATIONS
        else f"{variant}: no convergence after {MAX_ITERATIONS} iterations"
    )
    logger.info(message)
    return SampleSize(variant, False, cap=cap, iterations=iterations, message=message)


def _solve_tucker(params: BoundParams, variant: str) -> SampleSize:
    d = params.d
    dims = params.dims
    ells = []
    iterations = 0
    for i in range(d):
        if dims is None:
            q = None
        elif variant.startswith("hosvd"):
            q = min(dims[i], math.prod(dims) // dims[i])
        else:
            q = min(dims[i], math.prod(ells[:i]) * math.prod(dims[i + 1 :]))
        if variant.endswith("-Q") and q is None:
            raise krp_sketch.errors.ParameterError(f"{variant} needs the mode sizes")
        cap = _cap(q)
        rhs = _tucker_rhs(params, params.r, q if variant.endswith("-Q") else None)
        ell, steps = _minimal(rhs, rhs(params.r), cap)
        iterations += steps
        if ell is None:
            return _infeasible(variant, cap, steps, f"l_{i}")
        ells.append(ell)
    return SampleSize(variant, True, max(ells), tuple(ells), None, iterations)


def solve_sample_size(params: BoundParams, variant: str) -> SampleSize:
    """
    Smallest integer sample size satisfying the selected inequality.

    :param BoundParams params: parameters
    :param str variant: one of VARIANTS
    :rtype: SampleSize
    """
    if variant not in VARIANTS:
        raise krp_sketch.errors.ParameterError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    if variant in ("hosvd", "hosvd-Q", "sthosvd", "sthosvd-Q"):
        return _solve_tucker(params, variant)

    if variant == "single-view":
        cap = _cap(params.M, params.N)
        r, delta = params.r, params.delta
        cr = lambda ell: 1.0 + _c_log_power(params.K, params.Cs, params.d, 16.0 * ell / delta)
        rhs_r = lambda ell: r * cr(ell) * math.log(8.0 * r / delta)
        ell_r, steps_r = _minimal(rhs_r, rhs_r(r), cap)
        if ell_r is None:
            return _infeasible(variant, cap, steps_r, "l_r")
        rhs_l = lambda ell: ell_r * cr(ell) * math.log(8.0 * ell_r / delta)
        ell_l, steps_l = _minimal(rhs_l, rhs_l(ell_r), cap)
        if ell_l is None:
            return _infeasible(variant, cap, steps_l, "l_l")
        return SampleSize(variant, True, ell_r, (ell_r, ell_l), cap, steps_r + steps_l)

    if variant == "rrf":
        cap = _cap(params.M, params.N)
        rhs = _rrf_rhs(params)
    elif variant == "rrf-Q":
        if params.M is None or params.N is None:
            raise krp_sketch.errors.ParameterError("rrf-Q needs M and N")
        cap = _cap(params.M, params.N)
        rhs = _rrf_rhs(params, fixed_arg=8.0 * cap / params.delta)
    elif variant == "subspace":
        cap = _cap(params.N)
        rhs = _rrf_rhs(params, factor=2.6 / params.eps**2)
    elif variant == "subspace-N":
        if params.N is None:
            raise krp_sketch.errors.ParameterError("subspace-N needs N")
        cap = _cap(params.N)
        rhs = _rrf_rhs(params, fixed_arg=8.0 * params.N / params.delta, factor=2.6 / params.eps**2)
    else:
        cap = _cap(params.M, params.N)
        alpha, beta = appendix_coefficients(params)
        rhs = lambda ell: alpha + beta * math.sqrt(ell)

    ell, steps = _minimal(rhs, rhs(params.r), cap)
    if ell is None:
        return _infeasible(variant, cap, steps)
    return SampleSize(variant, True, ell, (ell,), cap, steps)


def satisfies(params: BoundParams, variant: str, ell: int | tuple) -> bool:
    """
    Whether a sample size satisfies the selected inequality (cap excluded).
    For Tucker variants pass the per-mode tuple; for single-view pass (l_r, l_l).
    """
    if variant in ("hosvd", "hosvd-Q", "sthosvd", "sthosvd-Q"):
        dims = params.dims
        ok = True
        for i, ell_i in enumerate(ell):
            q = None
            if dims is not None:
                if variant.startswith("hosvd"):
                    q = min(dims[i], math.prod(dims) // dims[i])
                else:
                    q = min(dims[i], math.prod(ell[:i]) * math.prod(dims[i + 1 :]))
            rhs = _tucker_rhs(params, params.r, q if variant.endswith("-Q") else None)
            ok = ok and ell_i >= rhs(ell_i)
        return ok
    if variant == "single-view":
        ell_r, ell_l = ell
        r, delta = params.r, params.delta
        cr = lambda e: 1.0 + _c_log_power(params.K, params.Cs, params.d, 16.0 * e / delta)
        return ell_r >= r * cr(ell_r) * math.log(8.0 * r / delta) and ell_l >= ell_r * cr(ell_l) * math.log(
            8.0 * ell_r / delta
        )
    if variant == "rrf":
        rhs = _rrf_rhs(params)
    elif variant == "rrf-Q":
        rhs = _rrf_rhs(params, fixed_arg=8.0 * _cap(params.M, params.N) / params.delta)
    elif variant == "subspace":
        rhs = _rrf_rhs(params, factor=2.6 / params.eps**2)
    elif variant == "subspace-N":
        rhs = _rrf_rhs(params, fixed_arg=8.0 * params.N / params.delta, factor=2.6 / params.eps**2)
    else:
        alpha, beta = appendix_coefficients(params)
        rhs = lambda e: alpha + beta * math.sqrt(e)
    return ell >= rhs(ell)
