"""
Main module for compiling run reports into a merged table, a summary and a plot.
"""

import datetime
import krp_sketch.settings
import krp_sketch.transform.tools


def output_results(input_dir: str, output_dir: str, include_plots: bool = False) -> None:
    """
    Given a root directory of run reports and an output directory, saves the
    merged reports, a summary text file and optionally an error-versus-rank plot.

    :param str input_dir: directory to read the report files from
    :param str output_dir: directory to save the output files to
    :param bool include_plots: whether to save plots or not
    :rtype: None
    """
    plot_file = f"{output_dir}/error_by_rank.png"
    summary_file = f"{output_dir}/summary.txt"

    runs = krp_sketch.transform.tools.compile_reports(input_dir, output_dir)
    print(f"{len(runs)} runs merged into {output_dir}")
    krp_sketch.transform.tools.get_summary(runs, summary_file)
    print(f"Run summary saved to {summary_file}")

    if include_plots:
        krp_sketch.transform.tools.plot_error_vs_rank(runs, plot_file)
        print(f"Error plot saved to {plot_file}")


def main() -> None:
    """
    Helper function for running the compilation from poetry
    """
    output_results(
        krp_sketch.settings.REPORT_DIR,
        f"./output/compiled/{datetime.datetime.now().strftime('%Y-%m-%d-%H-%M')}",
        include_plots=True,
    )
