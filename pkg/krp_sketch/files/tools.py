"""
Tools for reading and writing tensors, Tucker decompositions, sensor models
and run reports.

Tensor files ("KTEN"): 4-byte magic, then u8 version (1), u8 dtype (0 for
little-endian float64), u8 order d, u8 reserved, d little-endian u64 mode
sizes and the entries in first-index-fastest order.
"""

import dataclasses
import datetime
import json
import math
import os
import tempfile
import numpy
import pandas
import krp_sketch.applications.era
import krp_sketch.applications.sensors
import krp_sketch.errors
import krp_sketch.tensor.tools
import krp_sketch.tucker.format

MAGIC = b"KTEN"
VERSION = 1
DTYPE_F64 = 0
HEADER_BYTES = 8


def atomic_write(path: str, data: bytes | str) -> None:
    """
    Writes `data` to a temporary file next to `path` and renames it into place.

    :param str path: destination file
    :param (bytes | str) data: file contents; text is encoded as UTF-8
    :rtype: None
    """
    if isinstance(data, str):
        data = data.encode("utf-8")
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def encode_tensor(x: krp_sketch.tensor.tools.DenseTensor) -> bytes:
    if x.order > 255:
        raise krp_sketch.errors.ShapeError(f"tensor files hold order at most 255, got {x.order}")
    header = MAGIC + bytes([VERSION, DTYPE_F64, x.order, 0])
    dims = numpy.asarray(x.dims, dtype="<u8").tobytes()
    payload = numpy.asarray(x.vector(), dtype="<f8").tobytes()
    return header + dims + payload


def decode_tensor(data: bytes) -> krp_sketch.tensor.tools.DenseTensor:
    """
    Parses the bytes of a tensor file.

    :raises TensorFileError: on a bad magic, version, dtype or payload length
    """
    if len(data) < HEADER_BYTES or data[:4] != MAGIC:
        raise krp_sketch.errors.TensorFileError("not a KTEN tensor file")
    version, dtype, order = data[4], data[5], data[6]
    if version != VERSION:
        raise krp_sketch.errors.TensorFileError(f"unsupported tensor file version {version}")
    if dtype != DTYPE_F64:
        raise krp_sketch.errors.TensorFileError(f"unsupported dtype code {dtype}")
    if order == 0:
        raise krp_sketch.errors.TensorFileError("tensor file of order 0")
    end = HEADER_BYTES + 8 * order
    if len(data) < end:
        raise krp_sketch.errors.TensorFileError("tensor file truncated inside the dims")
    dims = tuple(int(n) for n in numpy.frombuffer(data[HEADER_BYTES:end], dtype="<u8"))
    if min(dims) < 1:
        raise krp_sketch.errors.TensorFileError(f"tensor file with empty mode, dims {dims}")
    if len(data) - end != 8 * math.prod(dims):
        raise krp_sketch.errors.TensorFileError(
            f"payload of {len(data) - end} bytes does not match dims {dims}"
        )
    vector = numpy.frombuffer(data[end:], dtype="<f8").astype(numpy.float64)
    return krp_sketch.tensor.tools.DenseTensor.from_vector(vector, dims)


def write_tensor(x: krp_sketch.tensor.tools.DenseTensor, path: str) -> None:
    atomic_write(path, encode_tensor(x))


def read_tensor(path: str) -> krp_sketch.tensor.tools.DenseTensor:
    with open(path, "rb") as f:
        return decode_tensor(f.read())


def write_tucker(t: krp_sketch.tucker.format.TuckerTensor, path: str) -> None:
    """
    Saves a Tucker decomposition as a .npz archive with arrays core, factor_0, factor_1, ...
    """
    arrays = {"core": t.core.data}
    arrays.update({f"factor_{i}": f for i, f in enumerate(t.factors)})
    _write_npz(path, arrays)


def read_tucker(path: str) -> krp_sketch.tucker.format.TuckerTensor:
    arrays = _read_npz(path)
    if "core" not in arrays:
        raise krp_sketch.errors.TensorFileError(f"{path} holds no Tucker core")
    core = krp_sketch.tensor.tools.DenseTensor(arrays["core"])
    factors = [arrays[f"factor_{i}"] for i in range(core.order) if f"factor_{i}" in arrays]
    if len(factors) != core.order:
        raise krp_sketch.errors.TensorFileError(f"{path} holds {len(factors)} factors for a core of order {core.order}")
    return krp_sketch.tucker.format.TuckerTensor(core, factors)


def write_sensor_model(model: krp_sketch.applications.sensors.SensorModel, path: str) -> None:
    arrays = {f"indices_{i}": numpy.asarray(idx, dtype=numpy.int64) for i, idx in enumerate(model.indices)}
    arrays.update({f"interpolator_{i}": a for i, a in enumerate(model.interpolators)})
    _write_npz(path, arrays)


def read_sensor_model(path: str) -> krp_sketch.applications.sensors.SensorModel:
    arrays = _read_npz(path)
    d = sum(1 for key in arrays if key.startswith("indices_"))
    try:
        indices = [arrays[f"indices_{i}"] for i in range(d)]
        interpolators = [arrays[f"interpolator_{i}"] for i in range(d)]
    except KeyError as e:
        raise krp_sketch.errors.TensorFileError(f"{path} is not a sensor model: missing {e}")
    return krp_sketch.applications.sensors.SensorModel(indices, interpolators)


def write_system(system: krp_sketch.applications.era.EraSystem, path: str) -> None:
    _write_npz(path, {"a": system.a, "b": system.b, "c": system.c, "d": system.d})


def read_system(path: str) -> krp_sketch.applications.era.EraSystem:
    arrays = _read_npz(path)
    try:
        return krp_sketch.applications.era.EraSystem(arrays["a"], arrays["b"], arrays["c"], arrays["d"])
    except KeyError as e:
        raise krp_sketch.errors.TensorFileError(f"{path} is not a state-space model: missing {e}")


def _write_npz(path: str, arrays: dict) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".npz")
    os.close(fd)
    try:
        numpy.savez(tmp, **arrays)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def _read_npz(path: str) -> dict:
    try:
        with numpy.load(path, allow_pickle=False) as archive:
            return {key: archive[key] for key in archive.files}
    except ValueError as e:
        raise krp_sketch.errors.TensorFileError(f"{path} is not a .npz archive: {e}")


@dataclasses.dataclass
class RunReport:
    """
    One algorithm run: the quantities compared across compression methods.

    :param str algorithm: algorithm name
    :param str ranks: comma-separated target ranks
    :param int seed: root seed
    :param float relative_error: relative Frobenius error of the result
    :param int flops: multiply-adds reported by the kernels
    :param int rng_scalars: random scalars drawn
    :param float elapsed: wall-clock seconds
    :param dict extra: further named numeric or text columns
    """

    algorithm: str
    ranks: str
    seed: int
    relative_error: float
    flops: int = 0
    rng_scalars: int = 0
    elapsed: float = 0.0
    oversample: int = 0
    distribution: str = "gaussian"
    dims: str = ""
    extra: dict = dataclasses.field(default_factory=dict)
    details: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self) -> None:
        values = [self.relative_error, self.flops, self.rng_scalars, self.elapsed]
        values += [v for v in self.extra.values() if isinstance(v, (int, float))]
        if not all(math.isfinite(v) for v in values):
            raise krp_sketch.errors.ParameterError(f"report for {self.algorithm} has non-finite fields")

    def row(self) -> dict:
        row = dataclasses.asdict(self)
        row.pop("details")
        row.update(row.pop("extra"))
        return row

    def to_frame(self) -> pandas.DataFrame:
        return pandas.DataFrame([self.row()])


def ranks_label(ranks) -> str:
    return ",".join(str(int(r)) for r in ranks)


def default_report_path(report_dir: str, algorithm: str) -> str:
    return f"{report_dir}/{algorithm}_{datetime.datetime.now().strftime('%Y-%m-%d-%H-%M-%S-%f')}.csv"


def write_report(report: RunReport, path: str) -> str:
    """
    Writes the report as a one-row CSV (17 significant digits) and a JSON
    sidecar with the per-stream ledger and per-kernel flop counts.

    :param RunReport report: report to save
    :param str path: CSV path; the sidecar replaces the suffix with .json
    :rtype: str
    :return: path of the sidecar
    """
    csv_text = report.to_frame().to_csv(index=False, float_format="%.17g")
    atomic_write(path, csv_text)
    sidecar = os.path.splitext(path)[0] + ".json"
    atomic_write(sidecar, json.dumps({**report.row(), "details": report.details}, indent=2, default=str))
    return sidecar


def read_report(path: str) -> pandas.DataFrame:
    return pandas.read_csv(path)
