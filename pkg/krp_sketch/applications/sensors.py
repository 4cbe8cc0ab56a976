"""
Sensor placement and field reconstruction from a Tucker model of snapshot data.

The spatial factors of a Tucker compression define, per grid direction, the
sensor coordinates (first pivots of a column-pivoted QR of Q_i^T) and the
interpolation matrix A_i = Q_i (P_i^T Q_i)^-1. Sensors sit on the Cartesian
product of the coordinate sets.
"""

import dataclasses
import logging
import typing
import numpy
import scipy.linalg
import krp_sketch.errors
import krp_sketch.sketch.streams
import krp_sketch.tensor.tools
import krp_sketch.tucker.randomized

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class SensorModel:
    """
    :param list indices: per spatial mode, the selected grid indices (0-based, distinct)
    :param list interpolators: per spatial mode, A_i = Q_i (P_i^T Q_i)^-1 of shape N_i x l_i
    """

    indices: list
    interpolators: list

    @property
    def grid(self) -> tuple:
        return tuple(a.shape[0] for a in self.interpolators)

    @property
    def sensor_shape(self) -> tuple:
        return tuple(len(i) for i in self.indices)

    @property
    def sensor_count(self) -> int:
        return int(numpy.prod(self.sensor_shape))


def select_sensors(q: numpy.ndarray) -> tuple:
    """
    Sensor coordinates and interpolation matrix for one orthonormal basis.

    :param numpy.ndarray q: N x l basis with orthonormal columns
    :rtype: tuple
    :return: (indices, A) with A = Q (Q[indices])^-1
    :raises SingularSensorError: if Q[indices] is singular to 1e-10 ||Q||
    """
    ell = q.shape[1]
    _, _, pivots = scipy.linalg.qr(q.T, pivoting=True, mode="economic")
    indices = pivots[:ell]
    selected = q[indices]
    sigma = scipy.linalg.svdvals(selected)
    if sigma[-1] <= 1e-10 * numpy.linalg.norm(q, 2):
        raise krp_sketch.errors.SingularSensorError(
            f"selected rows are singular (smallest singular value {sigma[-1]:.3e})"
        )
    interpolator = scipy.linalg.solve(selected.T, q.T).T
    return indices, interpolator


def train_sensors(
    snapshots: krp_sketch.tensor.tools.DenseTensor,
    ranks: typing.Sequence[int],
    compressor: str = "sthosvd",
    oversample: int = 0,
    cfg: krp_sketch.sketch.streams.SketchConfig | None = None,
) -> SensorModel:
    """
    Trains a sensor model from snapshots N_1 x ... x N_d x T. The snapshot
    (last) mode is kept at full size T.

    :param DenseTensor snapshots: training data, snapshots along the last mode
    :param Sequence[int] ranks: sensor counts l_1..l_d per spatial mode
    :param str compressor: Tucker algorithm name
    :param int oversample: oversampling for randomized compressors
    :param SketchConfig cfg: random configuration
    :rtype: SensorModel
    """
    if snapshots.order < 2:
        raise krp_sketch.errors.ShapeError("snapshots need at least one spatial mode and a snapshot mode")
    if len(ranks) != snapshots.order - 1:
        raise krp_sketch.errors.ShapeError(
            f"{len(ranks)} ranks for {snapshots.order - 1} spatial modes"
        )
    if compressor not in krp_sketch.tucker.randomized.ALGORITHMS:
        raise krp_sketch.errors.ParameterError(f"unknown compressor {compressor!r}")
    cfg = cfg or krp_sketch.sketch.streams.SketchConfig()
    tucker_ranks = tuple(ranks) + (snapshots.dims[-1],)
    t = krp_sketch.tucker.randomized.ALGORITHMS[compressor](snapshots, tucker_ranks, oversample, cfg)
    if t.ranks != tucker_ranks:
        t = krp_sketch.tucker.randomized.recompress(t, tucker_ranks)
    indices, interpolators = [], []
    for q in t.factors[:-1]:
        idx, a = select_sensors(q)
        indices.append(idx)
        interpolators.append(a)
    model = SensorModel(indices, interpolators)
    logger.info("placed %d sensors on a %s grid", model.sensor_count, model.grid)
    return model


def measure(model: SensorModel, field: krp_sketch.tensor.tools.DenseTensor) -> krp_sketch.tensor.tools.DenseTensor:
    """
    Field values at the sensors; trailing modes beyond the grid (e.g. snapshots) are kept.
    """
    d = len(model.indices)
    if field.dims[:d] != model.grid:
        raise krp_sketch.errors.ShapeError(f"field of dims {field.dims} does not live on grid {model.grid}")
    trailing = [numpy.arange(n) for n in field.dims[d:]]
    return krp_sketch.tensor.tools.DenseTensor(field.data[numpy.ix_(*model.indices, *trailing)])


def reconstruct_field(
    model: SensorModel, measured: krp_sketch.tensor.tools.DenseTensor
) -> krp_sketch.tensor.tools.DenseTensor:
    """
    Reconstruction measured x_1 A_1 x_2 ... x_d A_d. Trailing modes beyond the
    sensor grid are carried through, so a batch of snapshots reconstructs at once.

    :param SensorModel model: trained model
    :param DenseTensor measured: sensor readings l_1 x ... x l_d (x batch)
    :rtype: DenseTensor
    """
    d = len(model.indices)
    if measured.dims[:d] != model.sensor_shape:
        raise krp_sketch.errors.ShapeError(
            f"measurements of dims {measured.dims} do not match sensor shape {model.sensor_shape}"
        )
    return krp_sketch.tensor.tools.multi_ttm(measured, dict(enumerate(model.interpolators)))
