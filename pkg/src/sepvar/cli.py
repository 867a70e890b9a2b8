"""Command-line harness: generate problem bundles, run fits, sweep benchmarks.

Bundle layout: a directory with ``manifest.json`` (schema version, model
kind, sizes, truth block, per-dataset metadata) plus one CSV per dataset.
All floats are written with 17 significant digits so regeneration with the
same seed is byte-identical.
"""

import argparse
import concurrent.futures
import csv
import json
import os
import sys
import traceback
from pathlib import Path

import numpy as np

from . import stats, synth
from .exceptions import SepvarError
from .lm import LMConfig
from .model import BeerAux, Dataset
from .solver import METHODS, SolverConfig, fit
from .vpcore import MultiProblem

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_SOLVER_FAILURE = 1
EXIT_USAGE = 2


def _fmt(x):
    return format(float(x), ".17g")


def _jsonify(obj):
    """Recursive JSON text with deterministic key order and fixed float format."""
    if isinstance(obj, dict):
        items = ", ".join(
            f"{json.dumps(str(k))}: {_jsonify(v)}" for k, v in sorted(obj.items())
        )
        return "{" + items + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        return "[" + ", ".join(_jsonify(v) for v in seq) + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if np.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        return _fmt(x)
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def write_json(path, obj):
    Path(path).write_text(_jsonify(obj) + "\n")


def _parse_snr(value):
    if isinstance(value, str) and value.lower() in ("inf", "infinity"):
        return float("inf")
    return float(value)


def load_config(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise UsageError(f"cannot read config {path}: {err}") from err


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# generate


def spec_from_config(cfg):
    kind = cfg.get("model", synth.KIND_BEER)
    n = int(cfg["n"])
    p = int(cfg["p"])
    seed = int(cfg.get("seed", 0))
    snr = _parse_snr(cfg.get("snr", "inf"))
    alpha_true = np.asarray(cfg["alpha_true"], dtype=float)
    if alpha_true.size != p:
        raise UsageError(f"alpha_true must have length p={p}")

    if "frame" in cfg:
        fr = cfg["frame"]
        grids = synth.frame_grids(
            n_soundings=int(fr.get("soundings", 8)),
            strong_length=int(fr.get("strong_length", 809)),
            weak_length=int(fr.get("weak_length", 651)),
            strong_range=tuple(fr.get("strong_range", (6180.0, 6280.0))),
            weak_range=tuple(fr.get("weak_range", (4950.0, 5050.0))),
            strong_i0=float(fr.get("strong_i0", 1.0)),
            weak_i0=float(fr.get("weak_i0", 1.0)),
        )
    else:
        grids = tuple(
            synth.GridSpec(
                length=int(g["length"]),
                lo=float(g["lo"]),
                hi=float(g["hi"]),
                i0_scale=float(g.get("i0_scale", 1.0)),
                tau_scale=tuple(g["tau_scale"]) if g.get("tau_scale") else None,
                slit_halfwidth=g.get("slit_halfwidth"),
            )
            for g in cfg["grids"]
        )

    if "beta_true" in cfg:
        beta_true = tuple(np.asarray(b, dtype=float) for b in cfg["beta_true"])
        if len(beta_true) != len(grids):
            raise UsageError("beta_true must list one vector per dataset")
    else:
        rng = np.random.default_rng(seed + 1)
        beta_true = tuple(rng.uniform(0.5, 1.5, size=n) for _ in grids)

    return synth.TruthSpec(
        kind=kind, alpha_true=alpha_true, beta_true=beta_true, grids=grids,
        snr=snr, seed=seed,
    )


def _dataset_csv_rows(ds, kind):
    if kind == synth.KIND_BEER:
        aux = ds.aux
        p = aux.tau.shape[1]
        header = ["t", "y", "i0"] + [f"tau_{l + 1}" for l in range(p)]
        rows = (
            [_fmt(ds.t[i]), _fmt(ds.y[i]), _fmt(aux.i0[i])]
            + [_fmt(aux.tau[i, l]) for l in range(p)]
            for i in range(ds.m)
        )
    else:
        header = ["t", "y"]
        rows = ([_fmt(ds.t[i]), _fmt(ds.y[i])] for i in range(ds.m))
    return header, rows


def write_bundle(out_dir, spec, problem):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for k, ds in enumerate(problem.datasets):
        fname = f"dataset_{k:03d}.csv"
        header, rows = _dataset_csv_rows(ds, spec.kind)
        with open(out / fname, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow(row)
        entry = {"id": ds.id, "file": fname, "m": ds.m}
        if spec.kind == synth.KIND_BEER:
            entry["mu_sun"] = ds.aux.mu_sun
            entry["slit_halfwidth"] = ds.aux.slit_halfwidth
        entries.append(entry)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "model": spec.kind,
        "n": spec.n,
        "p": spec.p,
        "s": spec.s,
        "snr": spec.snr,
        "seed": spec.seed,
        "rng_algorithm": synth.RNG_ALGORITHM,
        "truth": {
            "alpha_true": spec.alpha_true,
            "beta_true": [b for b in spec.beta_true],
        },
        "datasets": entries,
    }
    write_json(out / "manifest.json", manifest)


def load_bundle(bundle_dir):
    bundle = Path(bundle_dir)
    manifest_path = bundle / "manifest.json"
    if not manifest_path.is_file():
        raise UsageError(f"no manifest.json in {bundle_dir}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise UsageError(
            f"unsupported bundle schema version {manifest.get('schema_version')}"
        )
    kind = manifest["model"]
    n, p = int(manifest["n"]), int(manifest["p"])
    datasets = []
    for entry in manifest["datasets"]:
        with open(bundle / entry["file"], newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            cols = {name: [] for name in header}
            for row in reader:
                for name, val in zip(header, row):
                    cols[name].append(float(val))
        t = np.asarray(cols["t"])
        y = np.asarray(cols["y"])
        if kind == synth.KIND_BEER:
            tau = np.column_stack([cols[f"tau_{l + 1}"] for l in range(p)])
            aux = BeerAux(
                mu_sun=float(entry["mu_sun"]),
                i0=np.asarray(cols["i0"]),
                tau=tau,
                slit_halfwidth=float(entry["slit_halfwidth"]),
            )
            datasets.append(Dataset(t=t, y=y, aux=aux, id=entry["id"]))
        else:
            datasets.append(Dataset(t=t, y=y, id=entry["id"]))
    if kind == synth.KIND_BEER:
        from .model import BeerLawModel

        model = BeerLawModel(n_linear=n, p_species=p)
    else:
        from .model import ExpDecayModel

        model = ExpDecayModel(n_terms=n)
    problem = MultiProblem(datasets=tuple(datasets), model=model)
    return problem, manifest


def cmd_generate(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    spec = spec_from_config(cfg)
    problem = synth.generate(spec)
    write_bundle(args.out, spec, problem)
    print(f"wrote bundle with {spec.s} dataset(s) to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit


def _lm_config_from(cfg_dict):
    if not cfg_dict:
        return LMConfig()
    allowed = {
        k: cfg_dict[k]
        for k in ("max_iter", "ftol", "xtol", "gtol", "lambda0", "lambda_up", "lambda_down")
        if k in cfg_dict
    }
    return LMConfig(**allowed)


def run_record(problem, manifest, method, alpha0, lm_cfg=None):
    result = fit(problem, SolverConfig(method=method, lm=lm_cfg or LMConfig()), alpha0)
    diag = stats.compute_diagnostics(result, problem)
    result.diagnostics = diag
    record = {
        "schema_version": SCHEMA_VERSION,
        "method": method,
        "s": problem.s,
        "snr": manifest.get("snr", "unknown") if manifest else "unknown",
        "seed": manifest.get("seed") if manifest else None,
        "alpha_hat": result.alpha_hat,
        "sigma": diag.sigma,
        "r_score": diag.r_score,
        "conf_bound_alpha": diag.conf_bounds[: problem.p],
        "wall_time_s": result.wall_time,
        "n_iter": result.lm_report.n_iter,
        "status": result.lm_report.status,
    }
    truth = (manifest or {}).get("truth")
    if truth and truth.get("alpha_true"):
        alpha_true = np.asarray(truth["alpha_true"], dtype=float)
        record["relative_errors"] = stats.relative_error(alpha_true, result.alpha_hat)
    return record, result


def _write_residuals_csv(path, problem, result):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dataset", "t", "residual"])
        for ds, r in zip(problem.datasets, result.residuals):
            for i in range(ds.m):
                w.writerow([ds.id, _fmt(ds.t[i]), _fmt(r[i])])


def cmd_fit(args):
    problem, manifest = load_bundle(args.bundle)
    alpha0 = _parse_alpha0(args.alpha0, problem.p)
    try:
        record, result = run_record(problem, manifest, args.method, alpha0)
    except SepvarError as err:
        error_doc = {
            "error": type(err).__name__,
            "message": str(err),
            "method": args.method,
        }
        if args.out:
            write_json(args.out, error_doc)
        print(_jsonify(error_doc), file=sys.stderr)
        return EXIT_SOLVER_FAILURE
    out = Path(args.out)
    write_json(out, record)
    _write_residuals_csv(out.with_name(out.stem + "_residuals.csv"), problem, result)
    print(_jsonify(record))
    return EXIT_OK


def _parse_alpha0(text, p):
    if text is None:
        return np.ones(p)
    try:
        vals = np.asarray([float(v) for v in text.split(",")], dtype=float)
    except ValueError as err:
        raise UsageError(f"cannot parse --alpha0 {text!r}") from err
    if vals.size != p:
        raise UsageError(f"--alpha0 needs {p} comma-separated values")
    return vals


# ---------------------------------------------------------------------------
# bench


def _cell_seed(base_seed, index):
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1)[0])


BENCH_COLUMNS = [
    "method",
    "s",
    "snr",
    "seed",
    "alpha_hat",
    "relative_errors",
    "sigma",
    "r_score",
    "conf_bound_alpha",
    "wall_time_s",
    "n_iter",
    "status",
]


def _bench_cell(cfg, method, s, snr, seed):
    base = dict(cfg.get("problem", {}))
    base["snr"] = snr
    base["seed"] = seed
    if "frame" in base:
        base["frame"] = dict(base["frame"])
        base["frame"]["soundings"] = max(1, s // 2)
    else:
        base["grids"] = base["grids"][:s]
        if "beta_true" in base:
            base["beta_true"] = base["beta_true"][:s]
    spec = spec_from_config(base)
    problem = synth.generate(spec)
    alpha0 = np.asarray(cfg.get("alpha0", np.ones(spec.p)), dtype=float)
    lm_cfg = _lm_config_from(cfg.get("lm"))
    manifest = {"snr": snr, "seed": seed, "truth": {"alpha_true": spec.alpha_true.tolist()}}
    record, _ = run_record(problem, manifest, method, alpha0, lm_cfg)
    return record


def _record_to_row(record):
    def join(vals):
        return ";".join(_fmt(v) for v in np.atleast_1d(vals))

    return [
        record["method"],
        str(record["s"]),
        _fmt(record["snr"]) if not isinstance(record["snr"], str) else record["snr"],
        str(record["seed"]),
        join(record["alpha_hat"]),
        join(record.get("relative_errors", [])),
        _fmt(record["sigma"]),
        _fmt(record["r_score"]),
        join(record["conf_bound_alpha"]),
        _fmt(record["wall_time_s"]),
        str(record["n_iter"]),
        record["status"],
    ]


def cmd_bench(args):
    cfg = load_config(args.config)
    methods = cfg.get("methods", list(METHODS))
    for m in methods:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r} in bench config")
    s_values = [int(v) for v in cfg.get("s_values", [2, 4, 8, 16])]
    snr_values = [_parse_snr(v) for v in cfg.get("snr_values", ["inf"])]
    n_seeds = int(cfg.get("n_seeds", 1))
    base_seed = int(cfg.get("base_seed", 0))
    threads = args.threads or int(os.environ.get("SEPVAR_THREADS", "1"))

    cells = []
    index = 0
    for method in methods:
        for s in s_values:
            for snr in snr_values:
                for _ in range(n_seeds):
                    cells.append((method, s, snr, _cell_seed(base_seed, index)))
                    index += 1

    def run_cell(cell):
        method, s, snr, seed = cell
        try:
            return _bench_cell(cfg, method, s, snr, seed)
        except SepvarError as err:
            return {
                "method": method, "s": s, "snr": snr, "seed": seed,
                "alpha_hat": [], "relative_errors": [], "sigma": float("nan"),
                "r_score": float("nan"), "conf_bound_alpha": [],
                "wall_time_s": float("nan"), "n_iter": 0,
                "status": f"error:{type(err).__name__}",
            }

    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(run_cell, cells))
    else:
        records = [run_cell(c) for c in cells]

    rows = [_record_to_row(r) for r in records]
    rows += _summary_rows(records)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BENCH_COLUMNS)
        for row in rows:
            w.writerow(row)
    print(f"wrote {len(rows)} row(s) to {args.out}")
    return EXIT_OK


def _summary_rows(records):
    groups = {}
    for r in records:
        if r["status"].startswith("error:"):
            continue
        groups.setdefault((r["method"], r["s"], float(r["snr"])), []).append(r)
    rows = []
    for (method, s, snr), recs in sorted(groups.items(), key=lambda kv: str(kv[0])):
        for stat, fn in (("mean", np.mean), ("std", np.std)):
            rel = [np.atleast_1d(r.get("relative_errors", [np.nan])) for r in recs]
            rows.append([
                method, str(s), _fmt(snr), stat,
                ";".join(_fmt(v) for v in fn([r["alpha_hat"] for r in recs], axis=0)),
                ";".join(_fmt(v) for v in fn(rel, axis=0)) if rel else "",
                _fmt(fn([r["sigma"] for r in recs])),
                _fmt(fn([r["r_score"] for r in recs])),
                ";".join(_fmt(v) for v in fn([r["conf_bound_alpha"] for r in recs], axis=0)),
                _fmt(fn([r["wall_time_s"] for r in recs])),
                _fmt(fn([r["n_iter"] for r in recs])),
                stat,
            ])
    return rows


# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sepvar",
        description="Separable least squares with multiple right-hand sides: "
        "generate synthetic bundles, run fits, sweep benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a synthetic dataset bundle")
    g.add_argument("--config", required=True, help="JSON config file")
    g.add_argument("--out", required=True, help="output bundle directory")
    g.add_argument("--seed", type=int, default=None, help="override config seed")
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="fit a dataset bundle")
    f.add_argument("bundle", help="bundle directory")
    f.add_argument("--method", required=True, choices=METHODS)
    f.add_argument("--alpha0", default=None, help="comma-separated initial guess")
    f.add_argument("--out", required=True, help="output record JSON path")
    f.set_defaults(func=cmd_fit)

    b = sub.add_parser("bench", help="run a benchmark sweep")
    b.add_argument("--config", required=True, help="JSON sweep config")
    b.add_argument("--out", required=True, help="output CSV path")
    b.add_argument("--threads", type=int, default=None)
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except SepvarError as err:
        print(_jsonify({"error": type(err).__name__, "message": str(err)}), file=sys.stderr)
        return EXIT_SOLVER_FAILURE
    except Exception:
        traceback.print_exc()
        return EXIT_SOLVER_FAILURE


if __name__ == "__main__":
    sys.exit(main())
