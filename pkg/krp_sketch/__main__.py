"""Main module for compressing tensors and structured matrices from the command line."""

import argparse
import logging
import math
import sys
import pandas
import krp_sketch.applications.era
import krp_sketch.applications.hadamard
import krp_sketch.applications.sensors
import krp_sketch.applications.synthetic
import krp_sketch.compile_reports
import krp_sketch.errors
import krp_sketch.files.tools
import krp_sketch.run_experiments
import krp_sketch.settings
import krp_sketch.sketch.streams
import krp_sketch.theory.bounds
import krp_sketch.theory.embedding
import krp_sketch.tensor.tools
import krp_sketch.tucker.format
import krp_sketch.tucker.randomized

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_INFEASIBLE = 4


def parse_ranks(text: str, order: int) -> tuple:
    """
    Comma-separated ranks, one per mode; a single integer broadcasts to all `order` modes.

    :param str text: e.g. "5,5,5" or "5"
    :param int order: number of modes the ranks apply to
    :rtype: tuple
    """
    try:
        ranks = tuple(int(r) for r in text.split(","))
    except ValueError:
        raise krp_sketch.errors.ParameterError(f"ranks must be comma-separated integers, got {text!r}")
    if len(ranks) == 1:
        ranks = ranks * order
    if len(ranks) != order:
        raise krp_sketch.errors.ShapeError(f"{len(ranks)} ranks given for {order} modes")
    return ranks


def _ints(text: str | None, what: str = "dims") -> tuple | None:
    if text is None:
        return None
    try:
        return tuple(int(n) for n in text.split(","))
    except ValueError:
        raise krp_sketch.errors.ParameterError(f"{what} must be comma-separated integers, got {text!r}")


def _save_report(report: krp_sketch.files.tools.RunReport, path: str | None) -> None:
    path = path or krp_sketch.files.tools.default_report_path(krp_sketch.settings.REPORT_DIR, report.algorithm)
    krp_sketch.files.tools.write_report(report, path)
    print(f"report saved to {path}")


def gen_cauchy(args: argparse.Namespace) -> int:
    x = krp_sketch.applications.synthetic.cauchy_tensor(args.n, args.d, args.alpha, cap=krp_sketch.settings.MEMORY_CAP)
    krp_sketch.files.tools.write_tensor(x, args.out)
    print(f"Cauchy tensor of dims {x.dims} saved to {args.out}")
    return EXIT_OK


def gen_markov(args: argparse.Namespace) -> int:
    preset = krp_sketch.applications.era.era_preset(args.preset)
    order = args.order or preset.order
    outputs = args.outputs or preset.outputs
    inputs = args.inputs or preset.inputs
    s = args.s or preset.s
    system = krp_sketch.applications.era.random_stable_system(order, outputs, inputs, seed=args.seed)
    seq = krp_sketch.applications.era.MarkovSequence.from_system(system, s)
    krp_sketch.files.tools.write_tensor(seq.as_tensor(), args.out)
    print(f"{seq.blocks.shape[0]} Markov parameters of shape {seq.block_shape} saved to {args.out}")
    if args.system_out:
        krp_sketch.files.tools.write_system(system, args.system_out)
        print(f"true system saved to {args.system_out}")
    return EXIT_OK


def tucker(args: argparse.Namespace) -> int:
    x = krp_sketch.files.tools.read_tensor(args.input)
    ranks = parse_ranks(args.ranks, x.order)
    t, report = krp_sketch.run_experiments.run_tucker(x, args.algorithm, ranks, args.oversample, args.seed, args.dist)
    print(f"{args.algorithm}: ranks {t.ranks}, relative error {report.relative_error:.17g}")
    print(f"random scalars {report.rng_scalars}, flops {report.flops}")
    _save_report(report, args.report)
    if args.out:
        krp_sketch.files.tools.write_tucker(t, args.out)
        print(f"Tucker tensor saved to {args.out}")
    return EXIT_OK


def era(args: argparse.Namespace) -> int:
    seq = krp_sketch.applications.era.MarkovSequence.from_tensor(
        krp_sketch.files.tools.read_tensor(args.markov_in), args.s
    )
    truth = krp_sketch.files.tools.read_system(args.truth) if args.truth else None
    system, report = krp_sketch.run_experiments.run_era(seq, args.r, args.oversample, args.method, args.seed, truth)
    print(f"ERA ({args.method}): order {system.order}, Markov error {report.relative_error:.17g}")
    if "hausdorff" in report.extra:
        print(f"Hausdorff eigenvalue distance {report.extra['hausdorff']:.17g}")
    _save_report(report, args.report)
    if args.out:
        krp_sketch.files.tools.write_system(system, args.out)
    return EXIT_OK


def sensors_train(args: argparse.Namespace) -> int:
    x = krp_sketch.files.tools.read_tensor(args.input)
    ranks = parse_ranks(args.ranks, x.order - 1)
    cfg = krp_sketch.sketch.streams.SketchConfig(seed=args.seed)
    model = krp_sketch.applications.sensors.train_sensors(x, ranks, args.compressor, args.oversample, cfg)
    krp_sketch.files.tools.write_sensor_model(model, args.out)
    print(f"{model.sensor_count} sensors on a {model.grid} grid saved to {args.out}")
    return EXIT_OK


def sensors_reconstruct(args: argparse.Namespace) -> int:
    model = krp_sketch.files.tools.read_sensor_model(args.model)
    data = krp_sketch.files.tools.read_tensor(args.input)
    if args.from_field:
        data = krp_sketch.applications.sensors.measure(model, data)
    field = krp_sketch.applications.sensors.reconstruct_field(model, data)
    krp_sketch.files.tools.write_tensor(field, args.out)
    print(f"field of dims {field.dims} saved to {args.out}")
    if args.reference:
        reference = krp_sketch.files.tools.read_tensor(args.reference)
        error = krp_sketch.tensor.tools.fro_norm(field.data - reference.data) / krp_sketch.tensor.tools.fro_norm(
            reference
        )
        print(f"relative error {error:.17g}")
    return EXIT_OK


def hadamard_recompress(args: argparse.Namespace) -> int:
    x = krp_sketch.files.tools.read_tucker(args.x)
    y = krp_sketch.files.tools.read_tucker(args.y)
    ranks = parse_ranks(args.ranks, 3)
    cfg = krp_sketch.sketch.streams.SketchConfig(seed=args.seed, distribution=args.dist)
    t = krp_sketch.applications.hadamard.hadamard_recompress(x, y, ranks, args.oversample, cfg, args.recompress)
    krp_sketch.files.tools.write_tucker(t, args.out)
    print(f"recompressed product of ranks {t.ranks} saved to {args.out}")
    if math.prod(x.dims) > krp_sketch.settings.MEMORY_CAP:
        print("product too large for a dense error check; no report written")
        return EXIT_OK
    product = krp_sketch.applications.hadamard.dense_product(x, y)
    report = krp_sketch.files.tools.RunReport(
        algorithm="hadamard-recompress",
        ranks=krp_sketch.files.tools.ranks_label(ranks),
        seed=args.seed,
        relative_error=krp_sketch.tucker.format.tucker_error(product, t),
        flops=cfg.flops.total,
        rng_scalars=cfg.ledger.total,
        oversample=args.oversample,
        distribution=args.dist,
        dims=krp_sketch.files.tools.ranks_label(x.dims),
    )
    print(f"relative error {report.relative_error:.17g}")
    _save_report(report, args.report)
    return EXIT_OK


def bounds(args: argparse.Namespace) -> int:
    params = krp_sketch.theory.bounds.BoundParams(
        r=args.r,
        d=args.d,
        delta=args.delta,
        eps=args.eps,
        K=args.K,
        Cs=args.Cs,
        dims=_ints(args.dims),
        M=args.M,
        N=args.N,
    )
    rows = []
    for variant in args.variant:
        result = krp_sketch.theory.bounds.solve_sample_size(params, variant)
        if not result.feasible:
            print(result.message, file=sys.stderr)
        rows.append(
            {
                "variant": variant,
                "r": params.r,
                "d": params.d,
                "delta": params.delta,
                "eps": params.eps,
                "K": params.K,
                "Cs": params.Cs,
                "c_kd": krp_sketch.theory.bounds.c_kd(params.K, params.Cs, params.d),
                "feasible": result.feasible,
                "ell": result.ell,
                "ells": krp_sketch.files.tools.ranks_label(result.ells),
                "cap": result.cap,
                "uncalibrated": params.uncalibrated,
            }
        )
    pandas.DataFrame(rows).to_csv(sys.stdout, index=False, float_format="%.17g")
    if args.out:
        krp_sketch.files.tools.atomic_write(args.out, pandas.DataFrame(rows).to_csv(index=False, float_format="%.17g"))
    return EXIT_OK if all(row["feasible"] for row in rows) else EXIT_INFEASIBLE


def embed_check(args: argparse.Namespace) -> int:
    cfg = krp_sketch.sketch.streams.SketchConfig(seed=args.seed, distribution=args.dist)
    frequency = krp_sketch.theory.embedding.embedding_check(args.r, _ints(args.dims), args.ell, args.eps, args.trials, cfg)
    print(f"{frequency:.17g}")
    return EXIT_OK


def compile_reports(args: argparse.Namespace) -> int:
    krp_sketch.compile_reports.output_results(args.input, args.out, include_plots=args.plots)
    return EXIT_OK


def sweep_cauchy(args: argparse.Namespace) -> int:
    krp_sketch.run_experiments.cauchy_sweep(
        args.n,
        args.d,
        args.alpha,
        list(_ints(args.ranks, "ranks")),
        args.algorithms.split(","),
        args.seeds,
        args.out,
        oversample=args.oversample,
        distribution=args.dist,
    )
    return EXIT_OK


def sweep_era(args: argparse.Namespace) -> int:
    krp_sketch.run_experiments.era_sweep(args.preset, args.methods.split(","), args.seeds, args.out)
    return EXIT_OK


def _sketch_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--oversample", type=int, default=0)
    parser.add_argument("--seed", type=int, default=krp_sketch.settings.DEFAULT_SEED)
    parser.add_argument(
        "--dist",
        choices=krp_sketch.sketch.streams.DISTRIBUTIONS,
        default=krp_sketch.settings.DEFAULT_DISTRIBUTION,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="krp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug messages")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("gen-cauchy", help="write a Cauchy tensor")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=gen_cauchy)

    p = commands.add_parser("gen-markov", help="write Markov parameters of a random stable system")
    p.add_argument("--preset", default="desk", choices=sorted(krp_sketch.applications.era.PRESETS))
    p.add_argument("--order", type=int)
    p.add_argument("--outputs", type=int)
    p.add_argument("--inputs", type=int)
    p.add_argument("--s", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--system-out")
    p.set_defaults(handler=gen_markov)

    for name in krp_sketch.tucker.randomized.ALGORITHMS:
        p = commands.add_parser(name, help=f"compress a tensor file with {name}")
        p.add_argument("--in", dest="input", required=True)
        p.add_argument("--ranks", required=True)
        _sketch_flags(p)
        p.add_argument("--report")
        p.add_argument("--out", help="save the Tucker tensor (.npz)")
        p.set_defaults(handler=tucker, algorithm=name)

    p = commands.add_parser("era", help="identify a system from Markov parameters")
    p.add_argument("--markov-in", required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--oversample", type=int, default=krp_sketch.settings.DEFAULT_OVERSAMPLE)
    p.add_argument("--method", choices=krp_sketch.applications.era.METHODS, default="krp-single-view")
    p.add_argument("--s", type=int)
    p.add_argument("--seed", type=int, default=krp_sketch.settings.DEFAULT_SEED)
    p.add_argument("--truth", help="true system (.npz) for the eigenvalue distance")
    p.add_argument("--report")
    p.add_argument("--out")
    p.set_defaults(handler=era)

    p = commands.add_parser("sensors", help="train or apply a sensor model")
    sensor_commands = p.add_subparsers(dest="sensor_command", required=True)
    q = sensor_commands.add_parser("train")
    q.add_argument("--in", dest="input", required=True)
    q.add_argument("--ranks", required=True)
    q.add_argument("--compressor", choices=sorted(krp_sketch.tucker.randomized.ALGORITHMS), default="sthosvd")
    q.add_argument("--oversample", type=int, default=0)
    q.add_argument("--seed", type=int, default=krp_sketch.settings.DEFAULT_SEED)
    q.add_argument("--out", required=True)
    q.set_defaults(handler=sensors_train)
    q = sensor_commands.add_parser("reconstruct")
    q.add_argument("--model", required=True)
    q.add_argument("--in", dest="input", required=True)
    q.add_argument("--from-field", action="store_true", help="the input is a full field to measure first")
    q.add_argument("--reference")
    q.add_argument("--out", required=True)
    q.set_defaults(handler=sensors_reconstruct)

    p = commands.add_parser("hadamard-recompress", help="recompress the product of two Tucker tensors")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--ranks", required=True)
    _sketch_flags(p)
    p.add_argument("--recompress", action="store_true")
    p.add_argument("--report")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=hadamard_recompress)

    p = commands.add_parser("bounds", help="solve sample-size inequalities")
    p.add_argument("--variant", nargs="+", choices=krp_sketch.theory.bounds.VARIANTS, default=["rrf"])
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--K", type=float, default=1.0)
    p.add_argument("--Cs", type=float, default=1.0)
    p.add_argument("--dims")
    p.add_argument("--M", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--out")
    p.set_defaults(handler=bounds)

    p = commands.add_parser("embed-check", help="Monte Carlo subspace embedding frequency")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--dims", required=True)
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=krp_sketch.settings.DEFAULT_SEED)
    p.add_argument("--dist", choices=krp_sketch.sketch.streams.DISTRIBUTIONS, default="gaussian")
    p.set_defaults(handler=embed_check)

    p = commands.add_parser("compile-reports", help="merge and summarize run reports")
    p.add_argument("--in", dest="input", default=krp_sketch.settings.REPORT_DIR)
    p.add_argument("--out", required=True)
    p.add_argument("--plots", action="store_true")
    p.set_defaults(handler=compile_reports)

    p = commands.add_parser("sweep-cauchy", help="error-versus-rank sweep on a Cauchy tensor")
    p.add_argument("--n", type=int, default=40)
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--ranks", default="5,10,15")
    p.add_argument("--algorithms", default=",".join(krp_sketch.tucker.randomized.ALGORITHMS))
    p.add_argument("--seeds", type=int, default=20)
    _sketch_flags(p)
    p.add_argument("--out", default=krp_sketch.settings.REPORT_DIR)
    p.set_defaults(handler=sweep_cauchy)

    p = commands.add_parser("sweep-era", help="ERA accuracy and random-scalar comparison")
    p.add_argument("--preset", default="desk", choices=sorted(krp_sketch.applications.era.PRESETS))
    p.add_argument("--methods", default=",".join(krp_sketch.applications.era.METHODS))
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--out", default=krp_sketch.settings.REPORT_DIR)
    p.set_defaults(handler=sweep_era)

    return parser


def main(argv: list | None = None) -> int:
    """
    Runs one subcommand. Exit codes: 0 success, 2 usage error, 3 I/O error,
    4 numerical infeasibility.
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else krp_sketch.settings.LOG_LEVEL,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return args.handler(args)
    except (
        krp_sketch.errors.InfeasibleError,
        krp_sketch.errors.SingularSensorError,
        krp_sketch.errors.MemoryCapError,
    ) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (krp_sketch.errors.ShapeError, krp_sketch.errors.ParameterError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
