"""Command-line entry points.

Subcommands: ``run`` executes a scenario config, ``bench`` times the
accumulation kernel, ``oracle-check`` re-runs a (guard-sized) scenario
through the brute-force reference and reports the agreement.

Exit codes: 0 success, 2 config error, 3 assembly error, 4 size-guard
violation, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .bench import run_benchmark
from .errors import AssemblyError, ConfigError, NumericalError, SizeGuardError
from .scenario import parse_config, run_scenario

EXIT_CONFIG = 2
EXIT_ASSEMBLY = 3
EXIT_GUARD = 4
EXIT_NUMERICAL = 5


def _add_run_parser(subparsers) -> None:
    p = subparsers.add_parser("run", help="run a scenario config")
    p.add_argument("config", help="path to a scenario TOML file")
    p.add_argument("--output-dir", default=None, help="output directory (default runs/<config stem>)")
    p.add_argument("--seed-override", type=int, default=None, help="replace scatterer seeds")
    p.add_argument("--threads", type=int, default=None, help="cap BLAS threads in parallel mode")
    p.add_argument("--serial", action="store_true", help="force the deterministic serial mode")


def _add_bench_parser(subparsers) -> None:
    p = subparsers.add_parser("bench", help="time the accumulation kernel")
    p.add_argument("--n", type=int, nargs="+", required=True, help="grid sizes")
    p.add_argument("--m", type=int, nargs="+", required=True, help="slice counts")
    p.add_argument("--mode", choices=("serial", "parallel"), default="serial")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--output-dir", default=None, help="also write bench.csv and bench.png here")


def _add_oracle_parser(subparsers) -> None:
    p = subparsers.add_parser(
        "oracle-check", help="compare the engine against the brute-force reference"
    )
    p.add_argument("config", help="path to a guard-sized scenario TOML file")
    p.add_argument("--seed-override", type=int, default=None)


def _cmd_run(args) -> int:
    output_dir = args.output_dir or str(Path("runs") / Path(args.config).stem)
    payload = run_scenario(
        args.config,
        output_dir,
        seed_override=args.seed_override,
        threads=args.threads,
        force_serial=args.serial,
    )
    results = payload["results"]
    print(f"total weight: {results['total_weight']:.6e}")
    for name, entry in results["maps"].items():
        extra = ""
        if "pairs_ratio" in entry:
            extra = f"  pairs_ratio={entry['pairs_ratio']:.4f}"
        print(f"map {name}: total={entry['total']:.6e}{extra}")
    if "schmidt" in results:
        s = results["schmidt"]
        print(
            f"schmidt: Kx={s['k_x']:.1f} Ky={s['k_y']:.1f} Kt={s['k_t']:.3e} "
            f"product={s['k_product']:.3e}"
        )
    print(f"wall time: {results['wall_time_s']:.2f} s")
    print(f"outputs in {output_dir}")
    return 0


def _cmd_bench(args) -> int:
    result = run_benchmark(args.n, args.m, mode=args.mode, repeats=args.repeats)
    print(result.table())
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "bench.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "slices", "seconds"])
            for row in result.rows:
                writer.writerow([row.n, row.slices, f"{row.seconds:.6f}"])
        _bench_figure(result, out / "bench.png")
        print(f"outputs in {out}")
    return 0


def _bench_figure(result, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    fit_m = result.slope_fit_m
    by_m: dict[int, list] = {}
    for row in result.rows:
        by_m.setdefault(row.slices, []).append((row.n, row.seconds))
    for m, pts in sorted(by_m.items()):
        pts.sort()
        ax.loglog([p[0] for p in pts], [p[1] for p in pts], "o-", label=f"M={m}")
    if result.slope_n is not None and fit_m is not None:
        pts = sorted(p for p in by_m[fit_m])
        n0, t0 = pts[0]
        ns = np.array([p[0] for p in pts], dtype=float)
        ax.loglog(ns, t0 * (ns / n0) ** result.slope_n, "k--", lw=1,
                  label=f"slope {result.slope_n:.2f}")
    ax.set_xlabel("n")
    ax.set_ylabel("seconds")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _cmd_oracle_check(args) -> int:
    from .engine import thick_crystal_wavefunction
    from .analysis import difference_correlation, joint_probability, sum_correlation
    from .oracle import brute_force_correlations, brute_force_wavefunction
    from .scenario import assemble_arms

    config = parse_config(args.config)
    if args.seed_override is not None:
        if config.scatterers.seed_nf is not None:
            config.scatterers.seed_nf = args.seed_override
        if config.scatterers.seed_ff is not None:
            config.scatterers.seed_ff = args.seed_override + 1
    signal_arm, idler_arm = assemble_arms(config)

    engine_psi = thick_crystal_wavefunction(
        config.pump, config.crystal, signal_arm, idler_arm, mode="serial"
    )
    oracle_psi = brute_force_wavefunction(
        config.pump, config.crystal, signal_arm, idler_arm
    )
    norm = np.linalg.norm(oracle_psi.amplitudes)
    psi_err = float(np.linalg.norm(engine_psi.amplitudes - oracle_psi.amplitudes) / norm)
    print(f"wave function relative L2 error: {psi_err:.3e}")

    prob, weight = joint_probability(engine_psi)
    grid = engine_psi.grid
    diff_o, sum_o = brute_force_correlations(engine_psi)
    diff_err = float(
        np.max(np.abs(difference_correlation(prob, weight, grid).values - diff_o.values))
    )
    sum_err = float(np.max(np.abs(sum_correlation(prob, weight, grid).values - sum_o.values)))
    print(f"difference-map max error: {diff_err:.3e}")
    print(f"sum-map max error: {sum_err:.3e}")

    ok = psi_err < 1e-10 and diff_err < 1e-12 and sum_err < 1e-12
    print("oracle check:", "PASS" if ok else "FAIL")
    return 0 if ok else EXIT_NUMERICAL


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="biphoton",
        description="Biphoton wave-function simulator for down-conversion optics",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    _add_run_parser(subparsers)
    _add_bench_parser(subparsers)
    _add_oracle_parser(subparsers)
    args = parser.parse_args(argv)

    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "bench":
            return _cmd_bench(args)
        return _cmd_oracle_check(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssemblyError as exc:
        print(f"assembly error: {exc}", file=sys.stderr)
        return EXIT_ASSEMBLY
    except SizeGuardError as exc:
        print(f"size guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
