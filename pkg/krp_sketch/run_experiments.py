"""
Main module for running compression experiments and writing one report per run.
"""

import logging
import os
import time
import typing
import krp_sketch.applications.era
import krp_sketch.applications.synthetic
import krp_sketch.errors
import krp_sketch.files.tools
import krp_sketch.settings
import krp_sketch.sketch.streams
import krp_sketch.tensor.tools
import krp_sketch.tucker.format
import krp_sketch.tucker.randomized

logger = logging.getLogger(__name__)


def run_tucker(
    x: krp_sketch.tensor.tools.DenseTensor,
    algorithm: str,
    ranks,
    oversample: int = 0,
    seed: int = krp_sketch.settings.DEFAULT_SEED,
    distribution: str = krp_sketch.settings.DEFAULT_DISTRIBUTION,
) -> tuple:
    """
    Runs one Tucker algorithm with fresh counters.

    :param DenseTensor x: tensor to compress
    :param str algorithm: a name from krp_sketch.tucker.randomized.ALGORITHMS
    :param ranks: target ranks, an integer broadcasts to all modes
    :param int oversample: oversampling p
    :param int seed: root seed
    :param str distribution: KRP factor distribution
    :rtype: tuple
    :return: (TuckerTensor, RunReport)
    """
    if algorithm not in krp_sketch.tucker.randomized.ALGORITHMS:
        raise krp_sketch.errors.ParameterError(
            f"unknown algorithm {algorithm!r}, expected one of {sorted(krp_sketch.tucker.randomized.ALGORITHMS)}"
        )
    spec = krp_sketch.tucker.format.RankSpec.coerce(ranks, x.order, oversample)
    cfg = krp_sketch.sketch.streams.SketchConfig(distribution=distribution, seed=seed)
    start = time.perf_counter()
    t = krp_sketch.tucker.randomized.ALGORITHMS[algorithm](x, spec.ranks, oversample, cfg)
    elapsed = time.perf_counter() - start
    logger.info("%s at ranks %s, seed %d: %.3fs", algorithm, spec.ranks, seed, elapsed)
    report = krp_sketch.files.tools.RunReport(
        algorithm=algorithm,
        ranks=krp_sketch.files.tools.ranks_label(spec.ranks),
        seed=seed,
        relative_error=krp_sketch.tucker.format.tucker_error(x, t),
        flops=cfg.flops.total,
        rng_scalars=cfg.ledger.total,
        elapsed=elapsed,
        oversample=oversample,
        distribution=distribution,
        dims=krp_sketch.files.tools.ranks_label(x.dims),
        details={"ledger": cfg.ledger.by_context(), "flops": cfg.flops.snapshot(), "output_ranks": list(t.ranks)},
    )
    return t, report


def cauchy_sweep(
    n: int,
    d: int,
    alpha: float,
    ranks: typing.Sequence[int],
    algorithms: typing.Sequence[str],
    seeds: int,
    output_dir: str,
    oversample: int = 0,
    distribution: str = "gaussian",
) -> list:
    """
    Given a Cauchy tensor size and lists of ranks and algorithms, runs every
    algorithm at every rank for `seeds` seeds and writes one report per run.

    :param int n: mode size
    :param int d: order
    :param float alpha: Cauchy exponent
    :param Sequence[int] ranks: uniform target ranks to sweep
    :param Sequence[str] algorithms: Tucker algorithm names
    :param int seeds: number of seeds per randomized run; deterministic runs use one
    :param str output_dir: directory to save the reports to
    :rtype: list
    :return: the RunReports
    """
    print(f"preparing directory for output at {output_dir}...")
    os.makedirs(output_dir, exist_ok=True)

    print(f"generating Cauchy tensor n={n}, d={d}, alpha={alpha}...")
    x = krp_sketch.applications.synthetic.cauchy_tensor(n, d, alpha)

    reports = []
    for algorithm in algorithms:
        runs = 1 if algorithm in ("hosvd", "sthosvd") else seeds
        for r in ranks:
            for seed in range(runs):
                print(f"running {algorithm} at rank {r}, seed {seed + 1} of {runs}", end="\r")
                _, report = run_tucker(x, algorithm, r, oversample, seed, distribution)
                path = f"{output_dir}/{algorithm}_r{r}_s{seed}.csv"
                krp_sketch.files.tools.write_report(report, path)
                reports.append(report)
        print()

    print(f"\n{len(reports)} reports written to {output_dir}\n")
    return reports


def run_era(
    seq: krp_sketch.applications.era.MarkovSequence,
    r: int,
    oversample: int,
    method: str,
    seed: int = krp_sketch.settings.DEFAULT_SEED,
    truth: krp_sketch.applications.era.EraSystem | None = None,
) -> tuple:
    """
    Runs ERA once with fresh counters; the report's relative error is the
    Markov-parameter mismatch, and the Hausdorff eigenvalue distance is added
    when the true system is known.

    :rtype: tuple
    :return: (EraSystem, RunReport)
    """
    cfg = krp_sketch.sketch.streams.SketchConfig(seed=seed)
    start = time.perf_counter()
    system = krp_sketch.applications.era.era_identify(seq, r, oversample, method, cfg)
    elapsed = time.perf_counter() - start
    extra = {"s": seq.s}
    if truth is not None:
        extra["hausdorff"] = krp_sketch.applications.era.hausdorff_eigs(system.eigenvalues(), truth.eigenvalues())
    report = krp_sketch.files.tools.RunReport(
        algorithm=f"era-{method}",
        ranks=str(r),
        seed=seed,
        relative_error=krp_sketch.applications.era.markov_error(system, seq),
        flops=cfg.flops.total,
        rng_scalars=cfg.ledger.total,
        elapsed=elapsed,
        oversample=oversample,
        distribution=cfg.distribution,
        dims=krp_sketch.files.tools.ranks_label(seq.block_shape),
        extra=extra,
        details={"ledger": cfg.ledger.by_context(), "flops": cfg.flops.snapshot()},
    )
    return system, report


def era_sweep(
    preset: str,
    methods: typing.Sequence[str],
    seeds: int,
    output_dir: str,
    system_seed: int = 0,
) -> list:
    """
    Identifies one random stable system of a preset size with every method for
    `seeds` sketch seeds and writes one report per run.

    :param str preset: ERA preset name
    :param Sequence[str] methods: ERA methods
    :param int seeds: number of sketch seeds per randomized method
    :param str output_dir: directory to save the reports to
    :param int system_seed: seed of the true system
    :rtype: list
    """
    cfg = krp_sketch.applications.era.era_preset(preset)
    os.makedirs(output_dir, exist_ok=True)
    truth = krp_sketch.applications.era.random_stable_system(cfg.order, cfg.outputs, cfg.inputs, seed=system_seed)
    seq = krp_sketch.applications.era.MarkovSequence.from_system(truth, cfg.s)

    reports = []
    for method in methods:
        runs = 1 if method == "dense-svd" else seeds
        for seed in range(runs):
            print(f"running ERA {method}, seed {seed + 1} of {runs}", end="\r")
            _, report = run_era(seq, cfg.r, cfg.oversample, method, seed, truth)
            krp_sketch.files.tools.write_report(report, f"{output_dir}/era_{method}_s{seed}.csv")
            reports.append(report)
        print()

    print(f"\n{len(reports)} reports written to {output_dir}\n")
    return reports
