import numpy
import pytest
import krp_sketch.__main__ as cli
import krp_sketch.applications.synthetic
import krp_sketch.errors
import krp_sketch.files.tools
import krp_sketch.tensor.tools
import krp_sketch.theory.bounds
import krp_sketch.tucker.format


@pytest.fixture
def cauchy_file(tmp_path):
    path = str(tmp_path / "cauchy.kten")
    assert cli.main(["gen-cauchy", "--n", "10", "--d", "3", "--out", path]) == cli.EXIT_OK
    return path


def test_parse_ranks():
    assert cli.parse_ranks("5", 3) == (5, 5, 5)
    assert cli.parse_ranks("2,3", 2) == (2, 3)
    with pytest.raises(krp_sketch.errors.ShapeError):
        cli.parse_ranks("2,3", 3)
    with pytest.raises(krp_sketch.errors.ParameterError):
        cli.parse_ranks("two", 3)


def test_compress_and_report(cauchy_file, tmp_path):
    report = str(tmp_path / "run.csv")
    out = str(tmp_path / "t.npz")
    code = cli.main(["rhosvd-krp", "--in", cauchy_file, "--ranks", "5", "--seed", "7", "--report", report, "--out", out])
    assert code == cli.EXIT_OK
    row = krp_sketch.files.tools.read_report(report).iloc[0]
    assert row["algorithm"] == "rhosvd-krp" and row["ranks"] == "5,5,5" and row["seed"] == 7
    assert 0.0 < row["relative_error"] < 1.0
    assert row["rng_scalars"] == 3 * 5 * 20
    t = krp_sketch.files.tools.read_tucker(out)
    x = krp_sketch.files.tools.read_tensor(cauchy_file)
    assert krp_sketch.tucker.format.tucker_error(x, t) == pytest.approx(row["relative_error"], rel=1e-12)


def test_same_seed_same_report(cauchy_file, tmp_path):
    rows = []
    for name in ("a.csv", "b.csv"):
        path = str(tmp_path / name)
        assert cli.main(["rsthosvd-gauss", "--in", cauchy_file, "--ranks", "4", "--seed", "3", "--report", path]) == 0
        rows.append(krp_sketch.files.tools.read_report(path).iloc[0])
    for column in ("relative_error", "flops", "rng_scalars"):
        assert rows[0][column] == rows[1][column]


def test_usage_errors(cauchy_file):
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["compress-everything"])
    assert excinfo.value.code == cli.EXIT_USAGE
    assert cli.main(["hosvd", "--in", cauchy_file, "--ranks", "11", "--report", "unused.csv"]) == cli.EXIT_USAGE
    assert cli.main(["hosvd", "--in", cauchy_file, "--ranks", "2,2", "--report", "unused.csv"]) == cli.EXIT_USAGE
    assert cli.main(["embed-check", "--r", "2", "--dims", "8,x", "--ell", "4", "--eps", "0.5"]) == cli.EXIT_USAGE
    assert cli.main(["bounds", "--variant", "rrf", "--r", "2", "--dims", "1000,"]) == cli.EXIT_USAGE
    assert cli.main(["sweep-cauchy", "--n", "6", "--ranks", "2,two", "--seeds", "1"]) == cli.EXIT_USAGE


def test_missing_and_malformed_input(tmp_path):
    assert cli.main(["hosvd", "--in", str(tmp_path / "absent.kten"), "--ranks", "2"]) == cli.EXIT_IO
    bad = tmp_path / "bad.kten"
    bad.write_bytes(b"not a tensor")
    assert cli.main(["hosvd", "--in", str(bad), "--ranks", "2"]) == cli.EXIT_IO


def test_bounds(capsys, tmp_path):
    out = tmp_path / "bounds.csv"
    assert cli.main(["bounds", "--variant", "rrf", "subspace", "--r", "2", "--out", str(out)]) == cli.EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("variant,")
    assert len(lines) == 3
    assert out.read_text().splitlines()[0] == lines[0]
    assert cli.main(["bounds", "--variant", "rrf", "--r", "5", "--d", "2", "--M", "50", "--N", "50"]) == cli.EXIT_INFEASIBLE
    assert cli.main(["bounds", "--variant", "rrf", "--r", "0"]) == cli.EXIT_USAGE


def test_embed_check(capsys):
    assert cli.main(["embed-check", "--r", "2", "--dims", "4,4", "--ell", "6", "--eps", "0", "--trials", "3"]) == 0
    assert float(capsys.readouterr().out.strip()) == 0.0


def test_era_pipeline(tmp_path):
    markov, truth = str(tmp_path / "markov.kten"), str(tmp_path / "truth.npz")
    assert cli.main(["gen-markov", "--preset", "desk", "--out", markov, "--system-out", truth]) == 0
    assert krp_sketch.files.tools.read_tensor(markov).dims == (6, 4, 50)
    report, identified = str(tmp_path / "era.csv"), str(tmp_path / "identified.npz")
    code = cli.main(
        ["era", "--markov-in", markov, "--r", "5", "--method", "dense-svd", "--truth", truth, "--report", report, "--out", identified]
    )
    assert code == 0
    row = krp_sketch.files.tools.read_report(report).iloc[0]
    assert row["algorithm"] == "era-dense-svd" and row["s"] == 25
    assert row["hausdorff"] <= 1e-8
    assert krp_sketch.files.tools.read_system(identified).order == 5


def test_sensor_pipeline(tmp_path, capsys):
    train, test = krp_sketch.applications.synthetic.SyntheticFlow((12, 10, 8), (3, 3, 3), snapshots=20).generate()
    paths = {name: str(tmp_path / name) for name in ("train.kten", "test.kten", "model.npz", "field.kten")}
    krp_sketch.files.tools.write_tensor(train, paths["train.kten"])
    krp_sketch.files.tools.write_tensor(test, paths["test.kten"])
    assert cli.main(["sensors", "train", "--in", paths["train.kten"], "--ranks", "3", "--out", paths["model.npz"]]) == 0
    code = cli.main(
        [
            "sensors", "reconstruct", "--model", paths["model.npz"], "--in", paths["test.kten"],
            "--from-field", "--reference", paths["test.kten"], "--out", paths["field.kten"],
        ]
    )
    assert code == 0
    field = krp_sketch.files.tools.read_tensor(paths["field.kten"])
    error = krp_sketch.tensor.tools.fro_norm(field.data - test.data) / krp_sketch.tensor.tools.fro_norm(test)
    assert error <= 1e-8
    assert "relative error" in capsys.readouterr().out


def test_hadamard_recompress(tmp_path):
    rng = numpy.random.default_rng(0)
    paths = []
    for name in ("x.npz", "y.npz"):
        core = krp_sketch.tensor.tools.DenseTensor(rng.standard_normal((2, 2, 2)))
        factors = [krp_sketch.applications.synthetic.random_orthonormal(8, 2, rng) for _ in range(3)]
        paths.append(str(tmp_path / name))
        krp_sketch.files.tools.write_tucker(krp_sketch.tucker.format.TuckerTensor(core, factors), paths[-1])
    report = str(tmp_path / "h.csv")
    code = cli.main(
        ["hadamard-recompress", "--x", paths[0], "--y", paths[1], "--ranks", "4", "--oversample", "1",
         "--report", report, "--out", str(tmp_path / "p.npz")]
    )
    assert code == 0
    assert krp_sketch.files.tools.read_report(report).iloc[0]["relative_error"] <= 1e-10


def test_compile_reports(cauchy_file, tmp_path):
    reports = tmp_path / "reports"
    for seed in ("1", "2"):
        for algorithm in ("rhosvd-krp", "rhosvd-gauss"):
            path = str(reports / f"{algorithm}_{seed}.csv")
            assert cli.main([algorithm, "--in", cauchy_file, "--ranks", "3", "--seed", seed, "--report", path]) == 0
    out = tmp_path / "compiled"
    assert cli.main(["compile-reports", "--in", str(reports), "--out", str(out), "--plots"]) == 0
    merged = [p for p in out.iterdir() if p.name.startswith("runs_")]
    assert len(merged) == 1
    assert len(krp_sketch.files.tools.read_report(str(merged[0]))) == 4
    assert "rhosvd-gauss" in (out / "summary.txt").read_text()
    assert (out / "error_by_rank.png").exists()


def test_bounds_rrf_example(capsys):
    argv = ["bounds", "--variant", "rrf", "--r", "10", "--d", "3", "--delta", "0.01", "--eps", "0.5", "--K", "1", "--Cs", "1"]
    assert cli.main(argv) == cli.EXIT_OK
    header, row = capsys.readouterr().out.strip().splitlines()
    values = dict(zip(header.split(","), row.split(",")))
    assert values["feasible"] == "True"
    params = krp_sketch.theory.bounds.BoundParams(r=10, d=3, delta=0.01)
    ell = int(float(values["ell"]))
    assert krp_sketch.theory.bounds.satisfies(params, "rrf", ell)
    assert not krp_sketch.theory.bounds.satisfies(params, "rrf", ell - 1)
