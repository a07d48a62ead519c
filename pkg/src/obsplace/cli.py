"""Command-line pipeline: build-rb, select, baselines, evaluate, report.

Every command is driven by one config file and an output directory; artifacts
are CSV files with stable formatting (comma separator, LF endings, 17
significant digits), so identical configs and seeds reproduce byte-identical
outputs.  Exit codes: 0 success, 2 config error, 3 certificate failure,
4 stale or missing artifact.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, RunManifest, StageTimer
from .greedy import (
    SensorSet,
    chebyshev_reference,
    evaluate_sensor_sets,
    random_baseline,
    random_inflow_baseline,
    run_greedy,
)
from .reduced_basis import RBBuildError, RBSpace, build_rb

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CERTIFICATE = 3
EXIT_STALE = 4

RB_ARTIFACT = "rb.npz"


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path) -> tuple:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:]]


def _load_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_file(path)


def _outdir(config: ExperimentConfig, override) -> str:
    out = override or config.output.dir
    os.makedirs(out, exist_ok=True)
    return out


def _manifest(config, command, out) -> RunManifest:
    manifest = RunManifest(
        config_hash=config.config_hash(), command=command, version=__version__
    )
    manifest.write(os.path.join(out, f"manifest_{command}.json"))
    return manifest


def _write_sensor_rows(path, entries) -> None:
    write_csv(
        path,
        ["set_id", "provenance", "order", "sensor_index", "x1", "x2"],
        entries,
    )


def _sensor_rows(sets, library) -> list:
    rows = []
    for s in sets:
        for order, k in enumerate(s.indices, start=1):
            x1, x2 = library.centers[k]
            rows.append([s.set_id, s.provenance, order, k, x1, x2])
    return rows


def _read_sensor_sets(path) -> list:
    header, rows = read_csv(path)
    col = {name: i for i, name in enumerate(header)}
    by_id: dict = {}
    order: list = []
    for row in rows:
        set_id = row[col["set_id"]]
        if set_id not in by_id:
            by_id[set_id] = {"provenance": row[col["provenance"]], "indices": []}
            order.append(set_id)
        by_id[set_id]["indices"].append(int(row[col["sensor_index"]]))
    return [
        SensorSet(indices=tuple(by_id[sid]["indices"]), provenance=by_id[sid]["provenance"], set_id=sid)
        for sid in order
    ]


def cmd_build_rb(config: ExperimentConfig, out: str, threads: int) -> int:
    manifest = _manifest(config, "build_rb", out)
    model = config.build_model()
    library = config.build_library(model)
    xi_train = config.xi_train(model)
    try:
        with StageTimer(manifest, "build_rb"):
            rb, certificate = build_rb(
                model, xi_train, config.rb.eps_target, n_max=config.rb.n_max, library=library
            )
    except RBBuildError as exc:
        worst = exc.achieved_eps
        print(f"certificate failure: {exc} (achieved eps {worst:.3e})", file=sys.stderr)
        manifest.status = "certificate_failure"
        manifest.write(os.path.join(out, "manifest_build_rb.json"))
        return EXIT_CERTIFICATE

    rb_path = os.path.join(out, RB_ARTIFACT)
    rb.save(rb_path, meta={"rb_hash": config.rb_hash(), "version": __version__})
    write_csv(
        os.path.join(out, "rb_certificate.csv"),
        ["theta_1", "theta_2", "eps"],
        [[th[0], th[1], e] for th, e in zip(certificate.thetas, certificate.eps_theta)],
    )
    write_csv(
        os.path.join(out, "sensors.csv"),
        ["k", "x1", "x2", "std"],
        [[k, c[0], c[1], library.std] for k, c in enumerate(library.centers)],
    )
    manifest.artifacts = {
        "rb": rb_path,
        "rb_certificate": os.path.join(out, "rb_certificate.csv"),
        "sensors": os.path.join(out, "sensors.csv"),
    }
    manifest.status = "complete"
    manifest.write(os.path.join(out, "manifest_build_rb.json"))
    print(
        f"reduced basis: dimension {rb.dim}, certified eps_max "
        f"{certificate.eps_max:.3e} (target {config.rb.eps_target:g})"
    )
    return EXIT_OK


def _load_rb(config: ExperimentConfig, out: str, model, library):
    rb_path = os.path.join(out, RB_ARTIFACT)
    if not os.path.exists(rb_path):
        print(f"missing surrogate artifact {rb_path}; run build-rb first", file=sys.stderr)
        return None
    meta = RBSpace.read_meta(rb_path)
    if meta.get("rb_hash") != config.rb_hash():
        print(
            f"stale surrogate artifact {rb_path}: it was built from a different "
            "model/library/rb configuration",
            file=sys.stderr,
        )
        return None
    return RBSpace.load(rb_path, model, library=library)


def cmd_select(config: ExperimentConfig, out: str, threads: int) -> int:
    manifest = _manifest(config, "select", out)
    model = config.build_model()
    library = config.build_library(model)
    rb = _load_rb(config, out, model, library)
    if rb is None:
        return EXIT_STALE
    prior = config.build_prior()
    xi_train = config.xi_train(model)

    criteria = ["beta", "beta2"] if config.greedy.criterion == "both" else [config.greedy.criterion]
    sets = []
    for criterion in criteria:
        greedy_config = config.greedy_config(xi_train, criterion)
        with StageTimer(manifest, f"greedy_{criterion}"):
            selection, trace = run_greedy(model, rb, library, greedy_config, prior=prior)
        sets.append(selection)
        suffix = "" if criterion == "beta" else "_beta2"
        theta_cols = len(trace.iterations[0].worst_theta) if trace.iterations else 2
        header = ["iteration", "sensor_index", "x1", "x2", "score"]
        header += [f"worst_theta_{i+1}" for i in range(theta_cols)]
        header += ["beta"]
        rows = []
        for it in trace.iterations:
            x1, x2 = library.centers[it.sensor_index]
            rows.append(
                [it.iteration, it.sensor_index, x1, x2, it.score, *it.worst_theta, it.beta]
            )
        trace_path = os.path.join(out, f"greedy_trace{suffix}.csv")
        write_csv(trace_path, header, rows)
        manifest.artifacts[f"greedy_trace{suffix}"] = trace_path
        status = "reached" if trace.target_reached else "target_unreached"
        print(
            f"criterion {criterion}: {len(selection.indices)} sensors, "
            f"final beta {trace.betas[-1]:.4f} ({status})"
        )

    selection_path = os.path.join(out, "selection.csv")
    _write_sensor_rows(selection_path, _sensor_rows(sets, library))
    manifest.artifacts["selection"] = selection_path
    manifest.status = "complete"
    manifest.write(os.path.join(out, "manifest_select.json"))
    return EXIT_OK


def cmd_baselines(config: ExperimentConfig, out: str, seed_override) -> int:
    manifest = _manifest(config, "baselines", out)
    model = config.build_model()
    library = config.build_library(model)
    seed = config.baselines.seed if seed_override is None else seed_override
    manifest.seeds = {"random": seed, "random_inflow": seed + 1}
    k = config.greedy.k_max
    sets = random_baseline(library, k=k, n_sets=config.baselines.n_sets, seed=seed)
    sets += random_inflow_baseline(
        library,
        k=k,
        n_inflow_min=config.baselines.n_inflow_min,
        n_sets=config.baselines.n_sets,
        seed=seed + 1,
    )
    sets.append(chebyshev_reference(library))
    path = os.path.join(out, "baselines.csv")
    _write_sensor_rows(path, _sensor_rows(sets, library))
    manifest.artifacts["baselines"] = path
    manifest.status = "complete"
    manifest.write(os.path.join(out, "manifest_baselines.json"))
    print(f"baselines: {len(sets)} sets written to {path}")
    return EXIT_OK


def cmd_evaluate(config: ExperimentConfig, out: str, threads: int) -> int:
    manifest = _manifest(config, "evaluate", out)
    model = config.build_model()
    library = config.build_library(model)
    prior = config.build_prior()
    xi_test = config.xi_test(model)

    sets = []
    for name in ("selection.csv", "baselines.csv"):
        path = os.path.join(out, name)
        if not os.path.exists(path):
            print(f"missing {path}; run select/baselines first", file=sys.stderr)
            return EXIT_STALE
        sets.extend(_read_sensor_sets(path))

    with StageTimer(manifest, "evaluate"):
        evaluations = evaluate_sensor_sets(
            model, sets, xi_test, config.noise.sigma, prior, library, threads=threads
        )

    results_path = os.path.join(out, "results.csv")
    write_csv(
        results_path,
        ["set_id", "provenance", "mean_beta", "mean_trace", "min_beta", "max_trace"],
        [
            [e.set_id, e.provenance, e.mean_beta, e.mean_trace, e.min_beta, e.max_trace]
            for e in evaluations
        ],
    )
    full_path = os.path.join(out, "results_full.csv")
    rows = []
    for e in evaluations:
        for theta, beta, trace_val in zip(xi_test, e.betas, e.traces):
            rows.append([e.set_id, e.provenance, theta[0], theta[1], beta, trace_val])
    write_csv(full_path, ["set_id", "provenance", "theta_1", "theta_2", "beta", "trace"], rows)
    manifest.artifacts = {"results": results_path, "results_full": full_path}
    manifest.status = "complete"
    manifest.write(os.path.join(out, "manifest_evaluate.json"))
    print(f"evaluated {len(sets)} sensor sets on {xi_test.shape[0]} test points")
    return EXIT_OK


def cmd_report(config: ExperimentConfig, out: str) -> int:
    from scipy.stats import spearmanr

    manifest = _manifest(config, "report", out)
    results_path = os.path.join(out, "results.csv")
    if not os.path.exists(results_path):
        print(f"missing {results_path}; run evaluate first", file=sys.stderr)
        return EXIT_STALE
    header, rows = read_csv(results_path)
    col = {name: i for i, name in enumerate(header)}

    scatter_path = os.path.join(out, "scatter.csv")
    write_csv(
        scatter_path,
        ["set_id", "provenance", "mean_beta", "mean_trace"],
        [
            [r[col["set_id"]], r[col["provenance"]], r[col["mean_beta"]], r[col["mean_trace"]]]
            for r in rows
        ],
    )

    map_rows = []
    for name in ("selection.csv", "baselines.csv"):
        path = os.path.join(out, name)
        if os.path.exists(path):
            h, rws = read_csv(path)
            c = {n: i for i, n in enumerate(h)}
            for r in rws:
                map_rows.append([r[c["set_id"]], r[c["provenance"]], r[c["x1"]], r[c["x2"]]])
    map_path = os.path.join(out, "sensor_map.csv")
    write_csv(map_path, ["set_id", "provenance", "x1", "x2"], map_rows)

    layout_path = os.path.join(out, "layout.json")
    with open(layout_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(
            {
                "domain": [0.0, 1.0, 0.0, 1.0],
                "subdomain_boundaries": [1.0 / 3.0, 2.0 / 3.0],
                "inflow_edge": "bottom",
            },
            fh,
            indent=2,
        )
        fh.write("\n")

    mean_beta = np.array([float(r[col["mean_beta"]]) for r in rows])
    mean_trace = np.array([float(r[col["mean_trace"]]) for r in rows])
    provenance = np.array([r[col["provenance"]] for r in rows])
    rho = float(spearmanr(mean_beta, mean_trace).statistic)
    print(f"spearman(mean_beta, mean_trace) = {rho:+.4f}")

    verdict = True
    greedy_rows = provenance == "greedy"
    if greedy_rows.any():
        g_beta = float(mean_beta[greedy_rows][0])
        g_trace = float(mean_trace[greedy_rows][0])
        for family in ("random", "random_inflow"):
            fam = provenance == family
            if not fam.any():
                continue
            wins = int(np.sum(g_beta > mean_beta[fam]))
            below_median = g_trace < float(np.median(mean_trace[fam]))
            frac = wins / int(fam.sum())
            verdict = verdict and frac >= 0.9 and below_median
            print(
                f"greedy vs {family}: mean_beta wins {wins}/{int(fam.sum())}, "
                f"mean_trace below family median: {below_median}"
            )
    print(f"greedy dominates random baselines: {verdict}")

    manifest.artifacts = {"scatter": scatter_path, "sensor_map": map_path, "layout": layout_path}
    manifest.status = "complete"
    manifest.write(os.path.join(out, "manifest_report.json"))
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="obsplace",
        description="Greedy observability-driven sensor placement pipeline",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("build-rb", "select", "baselines", "evaluate", "report"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--out", default=None, help="output directory (defaults to config)")
        p.add_argument("--threads", type=int, default=os.cpu_count(), help="worker cap")
        p.add_argument("--seed", type=int, default=None, help="baseline seed override")

    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        out = _outdir(config, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "build-rb":
            return cmd_build_rb(config, out, args.threads)
        if args.command == "select":
            return cmd_select(config, out, args.threads)
        if args.command == "baselines":
            return cmd_baselines(config, out, args.seed)
        if args.command == "evaluate":
            return cmd_evaluate(config, out, args.threads)
        if args.command == "report":
            return cmd_report(config, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
