"""
Command-line front end for the LDPS toolkit.

    python scripts/ldps_cli.py gen-data --preset s1 --out s1.txt
    python scripts/ldps_cli.py estimate-k s1.txt --grid-out theta_tau.csv
    python scripts/ldps_cli.py cluster s1.txt --method ldps-means --out assignments.csv
    python scripts/ldps_cli.py benchmark --preset a2 --budget 200 --seed 7 --out bench.csv
    python scripts/ldps_cli.py verify-restarts --m0 30 --k 3 --trials 100000

Progress goes to stderr; tables and JSON go to files or stdout and are
byte-identical across reruns with the same arguments.
Exit codes: 0 ok, 1 usage/parse/validation, 2 k estimation failed, 3 I/O.
"""

import argparse
import datetime
import json
import os
import shlex
import sys
import threading

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from ldps_core import (
    DEFAULT_GAMMA_O_THRESHOLD,
    DEFAULT_H_BAR,
    DEFAULT_R_BAR,
    DEFAULT_TAU_MIN,
    DENSITY_EXPONENTS,
    KEstimationFailed,
    LdpsError,
    LdpsParams,
    MalformedFile,
    ParseError,
)
from clustering import ClusterConfig, SeedMode, k_means, k_medoids, ldps_means, ldps_medoids
from datasets import PRESETS, LabeledDataset, gen_gaussian_clusters, generate_preset, load_point_file, save_point_file
from dissim import build_dissimilarity, min_max_normalize, squared_euclidean
from evaluation import benchmark_protocol, error_rate, evaluate, repeats_growth, restart_count_monte_carlo
from ldps import cfsfdp_assign, cfsfdp_baseline, choose_cutoff, grid_search_theta, search_peaks

# Load .env.local first, then .env as fallback
load_dotenv('.env.local')
load_dotenv()

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ESTIMATION_FAILED = 2
EXIT_IO = 3

DEFAULT_GRID_H = '0.02:0.2:10'
DEFAULT_GRID_R = '0.05:0.5:10'
DEFAULT_TNN = 10

# Flags that change how a run executes but never what it outputs
RUNTIME_ONLY_FLAGS = ('--threads', '--status-file')

METHODS = ('ldps-means', 'ldps-medoids', 'kmeans', 'kmeans++', 'kmedoids')
ESTIMATORS = ('ldps', 'cfsfdp')


def echo(message=''):
    print(message, file=sys.stderr)


def banner(title):
    echo("\n" + "=" * 60)
    echo(title)
    echo("=" * 60)


# ---------------------------------------------------------------------------
# STATUS FILE
# ---------------------------------------------------------------------------

class StatusWriter:
    """JSON progress file for long runs; a no-op without a path."""

    def __init__(self, path):
        self.path = path
        self._lock = threading.Lock()

    def write(self, status, current=None, processed=0, total=0, error=None):
        if not self.path:
            return None
        percent_complete = int((processed / total) * 100) if total > 0 else 0
        status_data = {
            'status': status,
            'current': current,
            'processed': processed,
            'total': total,
            'percent_complete': percent_complete,
            'completed_at': datetime.datetime.now(datetime.timezone.utc).isoformat() if status == 'completed' else None,
            'error': error,
        }
        with self._lock:
            directory = os.path.dirname(self.path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            with open(self.path, 'w') as f:
                json.dump(status_data, f, indent=2)
                f.flush()
        return status_data


# ---------------------------------------------------------------------------
# ARGUMENTS
# ---------------------------------------------------------------------------

class CliArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def grid_spec(text):
    """'start:stop:count' -> count values, evenly spaced, both ends included."""
    parts = text.split(':')
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected start:stop:count, got '{text}'")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected start:stop:count, got '{text}'")
    if count < 0:
        raise argparse.ArgumentTypeError(f"count must be >= 0, got {count}")
    return tuple(np.linspace(start, stop, count))


def density_exponent(text):
    value = float(text)
    if value not in DENSITY_EXPONENTS:
        raise argparse.ArgumentTypeError(f"density exponent must be one of {DENSITY_EXPONENTS}, got {text}")
    return value


def _add_input_options(p):
    p.add_argument('--no-normalize', action='store_true', help='Skip min-max normalization of the attributes')
    p.add_argument('--threads', type=int, help='Worker threads (default: LDPS_THREADS or 1)')


def _add_ldps_options(p):
    p.add_argument('--h-bar', type=float, help=f'Normalized bandwidth (default {DEFAULT_H_BAR}, or grid search where offered)')
    p.add_argument('--r-bar', type=float, help=f'Normalized LDI radius (default {DEFAULT_R_BAR}, or grid search where offered)')
    p.add_argument('--density-exp', type=density_exponent, default=1.0, help='Density exponent: 1 or 0.25')
    p.add_argument('--tau-min', type=float, default=DEFAULT_TAU_MIN, help='Smallest tau* accepted as a real gap')


def _add_grid_options(p):
    p.add_argument('--grid-h', type=grid_spec, default=grid_spec(DEFAULT_GRID_H),
                   help='h_bar grid, start:stop:count (a given --h-bar pins this axis)')
    p.add_argument('--grid-r', type=grid_spec, default=grid_spec(DEFAULT_GRID_R),
                   help='r_bar grid, start:stop:count (a given --r-bar pins this axis)')


def _add_outlier_option(p):
    p.add_argument('--outlier-threshold', type=float, default=DEFAULT_GAMMA_O_THRESHOLD,
                   help='Points with outlier score above this are removed (LDPS methods)')


def _add_dissim_options(p):
    p.add_argument('--dissim', choices=('euclid', 'manifold'), default='euclid', help='Dissimilarity measure')
    p.add_argument('--tnn', type=int, default=DEFAULT_TNN, help='Neighbors per point in the manifold graph')


def build_parser():
    parser = CliArgumentParser(prog='ldps_cli.py', description='Local density peaks seeding for k-means and k-medoids')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('gen-data', help='Write a synthetic labeled point file')
    p.add_argument('--preset', choices=sorted(PRESETS), help='Named dataset recipe')
    p.add_argument('--k', type=int, help='Number of Gaussian clusters')
    p.add_argument('--m0', type=int, help='Points per cluster')
    p.add_argument('--sigma', type=float, default=0.002, help='Per-axis standard deviation')
    p.add_argument('--dim', type=int, default=2, help='Dimensions')
    p.add_argument('--min-sep', type=float, default=0.0, help='Smallest distance between cluster centers')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--no-labels', action='store_true', help='Write coordinates only')
    p.add_argument('--out', required=True, help='Output point file')

    p = sub.add_parser('estimate-k', help='Search density peaks and report the estimated k')
    p.add_argument('input', help='Point file')
    _add_input_options(p)
    _add_dissim_options(p)
    _add_ldps_options(p)
    _add_grid_options(p)
    p.add_argument('--method', choices=ESTIMATORS, default='ldps',
                   help='ldps: tau* over the (h_bar, r_bar) grid; cfsfdp: cutoff-density baseline')
    p.add_argument('--dc', type=float, help='CFSFDP cutoff distance (default: 2%% quantile of the dissimilarities)')
    p.add_argument('--grid-out', help='Write the (h_bar, r_bar, tau*, k) table as CSV')
    p.add_argument('--status-file', help='JSON progress file (default: LDPS_STATUS_FILE)')
    p.add_argument('--json', action='store_true', help='Print the report as JSON')

    p = sub.add_parser('cluster', help='Cluster a point file')
    p.add_argument('input', help='Point file')
    _add_input_options(p)
    _add_dissim_options(p)
    _add_ldps_options(p)
    _add_grid_options(p)
    p.add_argument('--grid-search', action='store_true',
                   help=f'LDPS methods: pick (h_bar, r_bar) by grid search instead of '
                        f'({DEFAULT_H_BAR}, {DEFAULT_R_BAR})')
    p.add_argument('--method', choices=METHODS, default='ldps-means',
                   help='ldps-means works on squared Euclidean distance only')
    p.add_argument('--k', type=int, help='Number of clusters (optional for the LDPS methods)')
    _add_outlier_option(p)
    p.add_argument('--max-iter', type=int, default=ClusterConfig().max_iterations)
    p.add_argument('--seed', type=int, default=0, help='Seed for the random and k-means++ methods')
    p.add_argument('--out', required=True, help='Per-point assignments CSV (outliers are -1)')
    p.add_argument('--json', action='store_true', help='Print the summary as JSON')

    p = sub.add_parser('benchmark', help='SSE*_0 protocol: LDPS-means against random and k-means++ restarts')
    p.add_argument('input', nargs='?', help='Point file (or use --preset)')
    p.add_argument('--preset', choices=sorted(PRESETS), help='Generate the dataset from a recipe')
    p.add_argument('--data-seed', type=int, default=0, help='Seed for --preset generation')
    _add_input_options(p)
    _add_ldps_options(p)
    _add_grid_options(p)
    _add_outlier_option(p)
    p.add_argument('--k', type=int, help='k* (default: number of labels in the dataset)')
    p.add_argument('--budget', type=int, default=200, help='Restarts allowed per baseline')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--timing', action='store_true', help='Include wall-clock columns')
    p.add_argument('--compare-outliers', action='store_true', help='Add an LDPS-means row without outlier removal')
    p.add_argument('--status-file', help='JSON progress file (default: LDPS_STATUS_FILE)')
    p.add_argument('--out', help='CSV output (default: stdout)')

    p = sub.add_parser('verify-restarts', help='Monte-Carlo check of the expected random-restart count')
    p.add_argument('--m0', type=int, required=True, help='Points per cluster')
    p.add_argument('--k', type=int, required=True, help='Number of clusters')
    p.add_argument('--trials', type=int, default=100_000)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--growth', action='store_true', help='Emit log E(#repeats)/k for k = 2..K instead')
    p.add_argument('--out', help='CSV output (default: stdout)')

    return parser


def resolve_threads(args):
    if getattr(args, 'threads', None) is not None:
        threads = args.threads
    else:
        raw = os.getenv('LDPS_THREADS', '1')
        try:
            threads = int(raw)
        except ValueError:
            raise LdpsError(f"LDPS_THREADS must be an integer, got '{raw}'")
    if threads < 1:
        raise LdpsError(f"threads must be >= 1, got {threads}")
    return threads


def provenance(argv):
    """The invocation, minus flags that cannot change the output."""
    kept, skip = [], False
    for token in argv:
        if skip:
            skip = False
            continue
        flag = token.split('=', 1)[0]
        if flag in RUNTIME_ONLY_FLAGS:
            skip = '=' not in token
            continue
        kept.append(token)
    return '# ' + shlex.join(['ldps_cli.py', *kept])


# ---------------------------------------------------------------------------
# OUTPUT
# ---------------------------------------------------------------------------

def write_table(df, out, header):
    """CSV with a leading '# invocation' comment; out=None means stdout."""
    text = header + '\n' + df.to_csv(index=False, lineterminator='\n')
    if out is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(out)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(out, 'w', newline='\n') as f:
        f.write(text)


def print_json(payload):
    sys.stdout.write(json.dumps(payload, indent=2) + '\n')


def load_dataset(path, normalize):
    dataset = load_point_file(path)
    echo(f"📦 Loaded {dataset.data.m} points x {dataset.data.p} attributes from {path}")
    if not normalize:
        return dataset
    return LabeledDataset(min_max_normalize(dataset.data), dataset.labels, dataset.spec)


def ldps_params(args, gamma_o_threshold=DEFAULT_GAMMA_O_THRESHOLD):
    return LdpsParams(
        h_bar=args.h_bar if args.h_bar is not None else DEFAULT_H_BAR,
        r_bar=args.r_bar if args.r_bar is not None else DEFAULT_R_BAR,
        density_exponent=args.density_exp,
        tau_min=args.tau_min,
        gamma_o_threshold=gamma_o_threshold,
    )


# ---------------------------------------------------------------------------
# COMMANDS
# ---------------------------------------------------------------------------

def cmd_gen_data(args, argv):
    if args.preset:
        dataset = generate_preset(args.preset, seed=args.seed)
        echo(f"🧪 Preset {args.preset}: k={dataset.k}, {dataset.data.m} points")
    else:
        if args.k is None or args.m0 is None:
            raise LdpsError("gen-data needs --preset or both --k and --m0")
        dataset = gen_gaussian_clusters(args.k, args.m0, args.sigma, p=args.dim, seed=args.seed, min_sep=args.min_sep)
        echo(f"🧪 Gaussian blobs: k={args.k}, m0={args.m0}, sigma={args.sigma}, p={args.dim}")
    path = save_point_file(args.out, dataset, include_labels=not args.no_labels)
    echo(f"💾 Wrote {path}")
    return EXIT_OK


def grid_axes(args):
    """The (h_bar, r_bar) grids, with a given --h-bar or --r-bar pinning its axis."""
    h_grid = (args.h_bar,) if args.h_bar is not None else args.grid_h
    r_grid = (args.r_bar,) if args.r_bar is not None else args.grid_r
    return h_grid, r_grid


def search_theta(args, D, threads, status, base):
    """Grid search over the free axes; returns (best profile, per-cell table)."""
    h_grid, r_grid = grid_axes(args)
    total = len(h_grid)
    done = [0]
    lock = threading.Lock()

    def on_row(h_bar):
        with lock:
            done[0] += 1
            status.write('running', current=f"h_bar={h_bar:.4g}", processed=done[0], total=total)

    echo(f"🔍 Grid search: {len(h_grid)} x {len(r_grid)} cells on {threads} thread(s)")
    status.write('running', processed=0, total=total)
    try:
        grid = grid_search_theta(D, h_grid, r_grid, params=base, threads=threads, progress=on_row)
    except LdpsError as e:
        status.write('error', processed=done[0], total=total, error=str(e))
        raise
    status.write('completed', processed=total, total=total)
    echo(f"   best theta: h_bar={grid.theta[0]:.4g}, r_bar={grid.theta[1]:.4g}")
    return grid.profile, grid.table


def _estimate_cfsfdp(args, dataset, D):
    dc = args.dc if args.dc is not None else choose_cutoff(D)
    profile = cfsfdp_baseline(D, dc)
    report = {
        'method': 'cfsfdp',
        'estimated_k': profile.estimated_k,
        'dc': profile.dc,
        'tau_star': float(profile.gaps[profile.estimated_k - 1]),
        'center_indices': [int(i) for i in profile.center_indices],
    }
    if dataset.labels is not None:
        # nearest-denser propagation from the chosen centers
        report['error_rate'] = error_rate(cfsfdp_assign(D, profile), dataset.labels)
    return report


def _print_report(report, as_json):
    if as_json:
        print_json(report)
    else:
        for key, value in report.items():
            print(f"{key}: {value}")


def cmd_estimate_k(args, argv):
    threads = resolve_threads(args)
    status = StatusWriter(args.status_file or os.getenv('LDPS_STATUS_FILE'))
    dataset = load_dataset(args.input, not args.no_normalize)
    D = build_dissimilarity(dataset.data, args.dissim, args.tnn, threads=threads)

    if args.method == 'cfsfdp':
        report = _estimate_cfsfdp(args, dataset, D)
        _print_report(report, args.json)
        echo(f"✅ CFSFDP: k={report['estimated_k']}, d_c={report['dc']:.4g}")
        return EXIT_OK

    table = None
    if args.h_bar is not None and args.r_bar is not None:
        profile = search_peaks(D, ldps_params(args))
    else:
        profile, table = search_theta(args, D, threads, status, ldps_params(args))

    if args.grid_out and table is not None:
        df = pd.DataFrame(table, columns=['h_bar', 'r_bar', 'tau_star', 'estimated_k'])
        write_table(df, args.grid_out, provenance(argv))
        echo(f"💾 Wrote grid table to {args.grid_out}")

    report = {
        'method': 'ldps',
        'estimated_k': profile.estimated_k,
        'h_bar': profile.params.h_bar,
        'r_bar': profile.params.r_bar,
        'tau_star': profile.tau_star,
        'peak_indices': [int(i) for i in profile.peak_indices],
    }
    _print_report(report, args.json)

    if profile.estimated_k == -1:
        echo(f"❌ tau*={profile.tau_star:.4f} is below tau_min={args.tau_min}; no clear peaks")
        return EXIT_ESTIMATION_FAILED
    echo(f"✅ k={profile.estimated_k}, tau*={profile.tau_star:.4f}")
    return EXIT_OK


def _cluster_params(args, D, threads):
    params = ldps_params(args, args.outlier_threshold)
    if not args.grid_search:
        return params
    profile, _ = search_theta(args, D, threads, StatusWriter(None), params)
    return profile.params


def _run_cluster_method(args, dataset, threads):
    """Returns (labels with outliers, model, tau_star or None, outlier count)."""
    data = dataset.data
    config = ClusterConfig(max_iterations=args.max_iter)
    if args.method in ('ldps-means', 'ldps-medoids'):
        if args.method == 'ldps-means':
            if args.dissim != 'euclid':
                raise LdpsError("ldps-means needs --dissim euclid; use ldps-medoids for manifold distances")
            D = squared_euclidean(data)
            result = ldps_means(data, args.k, _cluster_params(args, D, threads), config, D=D)
        else:
            D = build_dissimilarity(data, args.dissim, args.tnn, threads=threads)
            result = ldps_medoids(D, args.k, _cluster_params(args, D, threads), config)
        return result.labels_with_outliers(), result.model, result.tau_star, len(result.outliers)

    if args.k is None:
        raise LdpsError(f"--k is required for --method {args.method}")
    if args.method == 'kmedoids':
        D = build_dissimilarity(data, args.dissim, args.tnn, threads=threads)
        model = k_medoids(D, args.k, config.with_seeds(SeedMode.kmeans_plus_plus(args.seed)))
    else:
        mode = SeedMode.random(args.seed) if args.method == 'kmeans' else SeedMode.kmeans_plus_plus(args.seed)
        model = k_means(data, args.k, config.with_seeds(mode))
    return np.asarray(model.assignments, dtype=int), model, None, 0


def cmd_cluster(args, argv):
    threads = resolve_threads(args)
    dataset = load_dataset(args.input, not args.no_normalize)
    echo(f"⚙️  Method: {args.method}")
    labels, model, tau_star, n_outliers = _run_cluster_method(args, dataset, threads)

    df = pd.DataFrame({'index': np.arange(len(labels)), 'label': labels})
    write_table(df, args.out, provenance(argv))
    echo(f"💾 Wrote assignments to {args.out}")

    summary = {
        'method': args.method,
        'k': model.k,
        'sse': model.sse,
        'iterations': model.iterations,
        'tau_star': tau_star,
        'outliers': n_outliers,
    }
    if dataset.labels is not None:
        report = evaluate(labels, dataset.labels)
        summary.update(error_rate=report.error_rate, true_assoc=report.true_assoc, false_assoc=report.false_assoc)
    if args.json:
        print_json(summary)
    else:
        print(','.join(summary))
        print(','.join('' if v is None else str(v) for v in summary.values()))
    echo(f"✅ k={model.k}, SSE={model.sse:.6g}, {model.iterations} iteration(s), {n_outliers} outlier(s)")
    return EXIT_OK


def cmd_benchmark(args, argv):
    threads = resolve_threads(args)
    status = StatusWriter(args.status_file or os.getenv('LDPS_STATUS_FILE'))
    if args.preset and args.input:
        raise LdpsError("give either an input file or --preset, not both")
    if args.preset:
        dataset = generate_preset(args.preset, seed=args.data_seed)
        if not args.no_normalize:
            dataset = LabeledDataset(min_max_normalize(dataset.data), dataset.labels, dataset.spec)
    elif args.input:
        dataset = load_dataset(args.input, not args.no_normalize)
    else:
        raise LdpsError("benchmark needs an input file or --preset")

    k_star = args.k if args.k is not None else dataset.k
    if k_star is None:
        raise LdpsError("dataset has no labels; pass --k")

    base = ldps_params(args, args.outlier_threshold)
    fixed = args.h_bar is not None and args.r_bar is not None
    h_grid, r_grid = grid_axes(args)
    total = 3 + int(args.compare_outliers)
    done = [0]

    def on_method(method, record):
        done[0] += 1
        echo(f"   {method}: SSE*={record.best_sse:.6g}, #iter={record.iter_at_best}, #repe={record.repeats_to_beat}")
        status.write('running', current=method, processed=done[0], total=total)

    banner(f"📊 BENCHMARK: k*={k_star}, {dataset.data.m} points, budget {args.budget}")
    status.write('running', processed=0, total=total)
    try:
        records = benchmark_protocol(dataset, k_star, args.budget, args.seed,
                                     params=base if fixed else None, base_params=base,
                                     threads=threads, compare_outliers=args.compare_outliers,
                                     h_grid=h_grid, r_grid=r_grid, progress=on_method)
    except LdpsError as e:
        status.write('error', processed=done[0], total=total, error=str(e))
        raise
    status.write('completed', processed=total, total=total)

    df = pd.DataFrame([r.as_row(with_timing=args.timing) for r in records])
    write_table(df, args.out, provenance(argv))
    banner("✅ COMPLETE")
    return EXIT_OK


def cmd_verify_restarts(args, argv):
    if args.growth:
        if args.k < 2:
            raise LdpsError(f"--growth needs --k >= 2, got {args.k}")
        rows = repeats_growth(args.m0, range(2, args.k + 1))
        df = pd.DataFrame(rows, columns=['k', 'log_repeats_per_k'])
        df.insert(0, 'm0', args.m0)
    else:
        echo(f"🎲 {args.trials} trials, m0={args.m0}, k={args.k}, seed={args.seed}")
        empirical, analytic = restart_count_monte_carlo(args.m0, args.k, args.trials, args.seed)
        df = pd.DataFrame([{
            'm0': args.m0,
            'k': args.k,
            'trials': args.trials,
            'empirical_mean_repeats': empirical,
            'analytic_expectation': analytic,
            'relative_error': abs(empirical - analytic) / analytic,
        }])
        echo(f"✅ empirical {empirical:.4f} vs analytic {analytic:.4f}")
    write_table(df, args.out, provenance(argv))
    return EXIT_OK


COMMANDS = {
    'gen-data': cmd_gen_data,
    'estimate-k': cmd_estimate_k,
    'cluster': cmd_cluster,
    'benchmark': cmd_benchmark,
    'verify-restarts': cmd_verify_restarts,
}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    try:
        return COMMANDS[args.command](args, argv)
    except KEstimationFailed as e:
        echo(f"\n❌ ERROR: {e}")
        return EXIT_ESTIMATION_FAILED
    except (MalformedFile, ParseError) as e:
        echo(f"\n❌ PARSE ERROR: {e}")
        return EXIT_USAGE
    except LdpsError as e:
        echo(f"\n❌ ERROR: {e}")
        return EXIT_USAGE
    except OSError as e:
        echo(f"\n❌ I/O ERROR: {e}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
