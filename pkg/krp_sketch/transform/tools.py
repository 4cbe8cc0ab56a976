"""
Tools for merging run reports and summarizing them.
"""

import datetime
import os
import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas
import krp_sketch.files.tools

TEMPLATE = os.path.join(os.path.dirname(__file__), "summary_template.txt")


def compile_reports(input_dir: str, output_dir: str | None) -> pandas.DataFrame:
    """
    Reads the report CSV files under input_dir, merges them into one DataFrame
    and saves it to output_dir.

    :param str input_dir: directory to read the report files from
    :param str output_dir: directory to save the merged file to; if None, the frame is returned only
    :rtype: pandas.DataFrame
    :return: merged reports, one row per run
    """
    dfs_list = []

    for path, subdirs, files in os.walk(input_dir):
        for name in sorted(files):
            if name.endswith(".csv") and not name.startswith("runs_"):
                df = krp_sketch.files.tools.read_report(os.path.join(path, name))
                df["file_name"] = name
                dfs_list.append(df)

    if not dfs_list:
        raise FileNotFoundError(f"no report files found under {input_dir}")

    runs = pandas.concat(dfs_list, ignore_index=True)
    # single-rank reports parse as integers
    runs["ranks"] = runs["ranks"].astype(str)
    runs = runs.sort_values(by=["algorithm", "ranks", "seed"], ignore_index=True)

    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
        krp_sketch.files.tools.atomic_write(
            f"{output_dir}/runs_{datetime.datetime.now().strftime('%Y-%m-%d-%H-%M')}.csv",
            runs.to_csv(index=False, float_format="%.17g"),
        )

    return runs


def error_table(runs: pandas.DataFrame) -> pandas.DataFrame:
    """
    Median relative error, flops and random scalars per algorithm and target rank.

    :param pandas.DataFrame runs: merged reports
    :rtype: pandas.DataFrame
    """
    return (
        runs.groupby(["algorithm", "ranks"])[["relative_error", "flops", "rng_scalars", "elapsed"]]
        .median()
        .reset_index()
    )


def plot_error_vs_rank(runs: pandas.DataFrame, file: str) -> None:
    """
    Saves a line plot of median relative error against the first target rank,
    one line per algorithm.

    :param pandas.DataFrame runs: merged reports
    :param str file: filename of the plot
    :rtype: None
    """
    table = error_table(runs)
    table["rank"] = table["ranks"].astype(str).str.split(",").str[0].astype(int)

    fig, ax = plt.subplots()
    for algorithm, group in table.groupby("algorithm"):
        group = group.sort_values("rank")
        ax.semilogy(group["rank"], group["relative_error"], marker="o", label=algorithm)
    ax.set_xlabel("Target rank")
    ax.set_ylabel("Median relative error")
    ax.set_title("Relative error by target rank")
    ax.legend()
    fig.savefig(file)
    plt.close(fig)


def get_summary(runs: pandas.DataFrame, file: str) -> None:
    """
    Saves a text summary of the merged reports.

    :param pandas.DataFrame runs: merged reports
    :param str file: filename of the summary
    :rtype: None
    """
    with open(TEMPLATE, "r", encoding="utf-8") as f:
        text = f.read()

    table = error_table(runs)
    rng = runs.groupby("algorithm")["rng_scalars"].median().sort_values()
    best = runs.loc[runs["relative_error"].idxmin()]

    text = text.format(
        date=datetime.datetime.now().strftime("%Y-%m-%d %H:%M"),
        n_runs=len(runs),
        n_algorithms=runs["algorithm"].nunique(),
        seeds=runs["seed"].nunique(),
        error_table=table.to_string(index=False, float_format=lambda v: f"{v:.6g}"),
        rng_table=rng.to_string(),
        best=f"{best['algorithm']} at ranks {best['ranks']}, seed {best['seed']} ({best['relative_error']:.17g})",
    )

    krp_sketch.files.tools.atomic_write(file, text)
