"""Command-line surface tying the library together.

Subcommands: train, predict, importance, diagram, simulate, tune, benchmark,
oracle.  Every run is reproducible from its inputs, flags and seed.  Failures
print one machine-parseable line ``error:<category>: <message>`` to stderr and
exit nonzero; output files are written atomically (temp file, then rename).
"""

from __future__ import annotations

import argparse
import io
import math
import os
import shutil
import subprocess
import sys

import numpy as np

from . import bench, datagen, diagram, oracle, persist, xmdi
from .core import build_schema, encode, encode_features, read_csv_columns, read_roles
from .errors import CollabTreesError, ConfigError
from .forest import Hyperparams, grow_ensemble, predict_ensemble

HP_FIELDS = (
    "n_estimators",
    "n_trees",
    "alpha",
    "min_samples_split",
    "min_samples_leaf",
    "n_bins",
    "random_update",
    "max_depth",
    "seed",
)


def _inf_float(text: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a number or 'inf', got {text!r}") from exc


def _bins(text: str):
    if text.lower() in ("none", "null"):
        return None
    return int(text)


def _add_hp_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--hp.n_estimators", dest="hp_n_estimators", type=int)
    parser.add_argument("--hp.n_trees", dest="hp_n_trees", type=int)
    parser.add_argument("--hp.alpha", dest="hp_alpha", type=_inf_float)
    parser.add_argument("--hp.min_samples_split", dest="hp_min_samples_split", type=int)
    parser.add_argument("--hp.min_samples_leaf", dest="hp_min_samples_leaf", type=int)
    parser.add_argument("--hp.n_bins", dest="hp_n_bins", type=_bins)
    parser.add_argument("--hp.random_update", dest="hp_random_update", type=float)
    parser.add_argument("--hp.max_depth", dest="hp_max_depth", type=_inf_float)
    parser.add_argument("--hp.seed", dest="hp_seed", type=int)


def _hyperparams(args) -> Hyperparams:
    values = {"seed": args.seed}
    for name in HP_FIELDS:
        v = getattr(args, f"hp_{name}", None)
        if v is not None:
            values[name] = v
    return Hyperparams(**values)


def _write_csv_atomic(path, header, rows) -> None:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(str(v) for v in row) + "\n")
    persist.write_text_atomic(path, buf.getvalue())


def _load_table(args):
    table = read_csv_columns(args.input)
    roles = read_roles(args.schema)
    return table, roles


def _cmd_train(args) -> int:
    table, roles = _load_table(args)
    hp = _hyperparams(args)
    schema = build_schema(table, roles, hp.n_bins)
    dataset = encode(table, schema)
    ensemble = grow_ensemble(dataset, schema, hp, threads=args.threads)
    persist.save_model(args.output, ensemble)
    rounds_path = args.rounds_output or args.output + ".rounds.csv"
    rows = []
    for b, model in enumerate(ensemble.models):
        for r in model.rounds:
            rows.append(
                (
                    b,
                    r.index,
                    r.tree,
                    schema.labels[r.group],
                    "" if r.parent_round is None else r.parent_round,
                    repr(r.drop),
                    r.n_nodes,
                    r.n_updated,
                )
            )
    _write_csv_atomic(
        rounds_path,
        ("member", "round", "tree", "group", "parent_round", "drop", "n_nodes", "n_updated"),
        rows,
    )
    print(f"trained {len(ensemble.models)} member(s) on n={ensemble.n_train}; model: {args.output}")
    return 0


def _cmd_predict(args) -> int:
    ensemble = persist.load_model(args.model)
    table = read_csv_columns(args.input)
    features = {k: v for k, v in table.items() if k != ensemble.schema.response}
    x = encode_features(features, ensemble.schema)
    preds = predict_ensemble(ensemble, x)
    _write_csv_atomic(args.output, ("prediction",), [(repr(float(v)),) for v in preds])
    print(f"wrote {len(preds)} predictions to {args.output}")
    return 0


def _cmd_importance(args) -> int:
    ensemble = persist.load_model(args.model)
    matrix = xmdi.ensemble_xmdi(ensemble)
    overall_path = args.overall or os.path.splitext(args.output)[0] + ".overall.csv"
    xmdi.write_importance_csv(matrix, ensemble.schema.labels, args.output, overall_path)
    print(f"wrote importance reports: {args.output}, {overall_path}")
    return 0


def _cmd_diagram(args) -> int:
    labels, matrix = xmdi.read_importance_csv(args.input)
    spec = diagram.diagram_spec(
        matrix,
        args.var_y,
        labels,
        node_threshold=args.node_threshold,
        edge_threshold=args.edge_threshold,
    )
    dot = diagram.emit_dot(spec)
    persist.write_text_atomic(args.output, dot)
    print(f"wrote {args.output}")
    if args.svg:
        renderer = shutil.which("dot")
        if renderer is None:
            print("notice: graphviz 'dot' not found; skipping SVG render", file=sys.stderr)
        else:
            svg_path = os.path.splitext(args.output)[0] + ".svg"
            with open(svg_path, "wb") as fh:
                subprocess.run([renderer, "-Tsvg", args.output], stdout=fh, check=True)
            print(f"wrote {svg_path}")
    return 0


def _parse_s1(text: str) -> dict[int, float]:
    out = {}
    if text:
        for part in text.split(","):
            idx, coef = part.split(":")
            out[int(idx) - 1] = float(coef)
    return out


def _parse_s2(text: str) -> dict[tuple[int, int], float]:
    out = {}
    if text:
        for part in text.split(";"):
            pair, coef = part.split(":")
            l, k = pair.split(",")
            out[(int(l) - 1, int(k) - 1)] = float(coef)
    return out


def _cmd_simulate(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.model in ("y1", "y2"):
        cfg = datagen.CopulaConfig(n=args.n, p=args.p, lam=args.lam, seed=args.seed)
        x = datagen.gaussian_copula_ar1(cfg)
        fn = datagen.model_y1 if args.model == "y1" else datagen.model_y2
        y = fn(x, rng, noise_sd=args.noise_sd)
    elif args.model == "xor":
        x, y = datagen.xor_linear_binary(
            args.n,
            args.p,
            _parse_s1(args.s1),
            _parse_s2(args.s2),
            args.pi,
            rng,
            noise_sd=args.noise_sd,
        )
    else:
        raise ConfigError(f"unknown simulation model {args.model!r}")
    header = tuple(f"x{j + 1}" for j in range(args.p)) + ("y",)
    rows = [tuple(repr(float(v)) for v in row) + (repr(float(yy)),) for row, yy in zip(x, y)]
    _write_csv_atomic(args.output, header, rows)
    print(f"wrote {args.n} rows to {args.output}")
    return 0


def _budget(args) -> bench.TuneBudget:
    space = dict(bench.DEFAULT_SEARCH_SPACE)
    if args.members is not None:
        space["n_estimators"] = (args.members,)
    return bench.TuneBudget(rounds=args.rounds, search_space=space, seed=args.seed)


def _hp_payload(hp: Hyperparams) -> dict:
    out = {}
    for name in HP_FIELDS:
        v = getattr(hp, name)
        if isinstance(v, float) and math.isinf(v):
            v = "inf"
        out[name] = v
    return out


def _cmd_tune(args) -> int:
    import json

    table, roles = _load_table(args)
    n = len(next(iter(table.values())))
    budget = _budget(args)
    rng = np.random.default_rng(args.seed)
    train, valid, test = bench.split_48_32_20(n, rng)
    best, trace = bench.random_search_tune(table, roles, train, valid, budget, threads=args.threads)
    persist.write_text_atomic(args.output, json.dumps(_hp_payload(best), indent=1) + "\n")
    trace_path = args.trace or args.output + ".trace.csv"
    _write_csv_atomic(
        trace_path,
        ("round", "validation_r2") + HP_FIELDS,
        [
            (b, repr(score)) + tuple(_hp_payload(hp)[f] for f in HP_FIELDS)
            for b, hp, score in trace
        ],
    )
    print(f"best hyperparameters: {args.output}; trace: {trace_path}")
    return 0


def _cmd_benchmark(args) -> int:
    table, roles = _load_table(args)
    n = len(next(iter(table.values())))
    dataset_name = os.path.splitext(os.path.basename(args.input))[0]
    externals = {}
    for item in args.external or ():
        if "=" not in item:
            raise ConfigError(f"--external expects NAME=path, got {item!r}")
        name, path = item.split("=", 1)
        scores = {}
        cols = read_csv_columns(path)
        if "repeat" not in cols or "r2" not in cols:
            raise ConfigError(f"{path}: external scores need 'repeat' and 'r2' columns")
        for rep, score in zip(cols["repeat"], cols["r2"]):
            scores[int(rep)] = float(score)
        externals[name] = scores

    cte_scores = []
    for rep in range(args.repeats):
        seed = int(np.random.SeedSequence(entropy=args.seed, spawn_key=(rep,)).generate_state(1)[0])
        budget = bench.TuneBudget(rounds=args.rounds, search_space=_budget(args).search_space, seed=seed)
        rng = np.random.default_rng(seed)
        cte_scores.append(bench.tuned_test_r2(table, roles, budget, rng, threads=args.threads))

    rows = []
    for rep in range(args.repeats):
        methods = ["cte"] + sorted(externals)
        scores = [cte_scores[rep]] + [externals[m].get(rep, math.nan) for m in sorted(externals)]
        if any(math.isnan(s) for s in scores):
            raise ConfigError(f"external scores missing repeat {rep}")
        rates = bench.adjusted_win_rates(scores) if len(scores) >= 2 else [1.0] * len(scores)
        for m, s, w in zip(methods, scores, rates):
            rows.append((dataset_name, m, rep, repr(float(s)), repr(float(w))))
    _write_csv_atomic(args.output, ("dataset", "method", "repeat", "r2", "win_rate"), rows)
    print(f"wrote benchmark report to {args.output}")
    return 0


def _cmd_oracle(args) -> int:
    dist, spec = oracle.load_table(args.table)
    lines = []
    m_groups = dist.schema.n_groups
    if args.effects:
        for m in range(m_groups):
            lines.append(f"additive {dist.schema.labels[m]} {oracle.additive_effect(dist, spec, m)!r}")
        for l in range(m_groups):
            for k in range(l + 1, m_groups):
                v = oracle.interaction_effect(dist, spec, (l, k))
                lines.append(f"interaction {dist.schema.labels[l]} {dist.schema.labels[k]} {v!r}")
    if args.pursuit is not None:
        path = oracle.matching_pursuit_path(dist, spec, args.pursuit)
        for s, (J, obj) in enumerate(zip(path.selected, path.objectives), start=1):
            names = "+".join(dist.schema.labels[m] for m in J)
            lines.append(f"pursuit {s} {names} {obj!r}")
    text = "\n".join(lines) + "\n"
    if args.output:
        persist.write_text_atomic(args.output, text)
        print(f"wrote {args.output}")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="collabtrees")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, hp=False):
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--threads", type=int, default=1)
        if hp:
            _add_hp_arguments(p)

    p = sub.add_parser("train", help="train an ensemble from a CSV and a role sidecar")
    p.add_argument("--input", required=True)
    p.add_argument("--schema", required=True, help="column-role sidecar file")
    p.add_argument("--output", required=True, help="model file to write")
    p.add_argument("--rounds-output", help="split-log summary CSV (default <output>.rounds.csv)")
    common(p, hp=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="predict with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    common(p)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("importance", help="export the importance decomposition")
    p.add_argument("--model", required=True)
    p.add_argument("--output", required=True, help="pairwise report CSV")
    p.add_argument("--overall", help="overall report CSV (default <output base>.overall.csv)")
    common(p)
    p.set_defaults(func=_cmd_importance)

    p = sub.add_parser("diagram", help="emit a DOT network diagram from an importance report")
    p.add_argument("--input", required=True, help="pairwise importance CSV")
    p.add_argument("--var-y", type=float, required=True, help="sample variance of the response")
    p.add_argument("--output", required=True, help="DOT file to write")
    p.add_argument("--node-threshold", type=float)
    p.add_argument("--edge-threshold", type=float)
    p.add_argument("--svg", action="store_true", help="also render SVG when graphviz is available")
    common(p)
    p.set_defaults(func=_cmd_diagram)

    p = sub.add_parser("simulate", help="write a synthetic dataset CSV")
    p.add_argument("--model", required=True, choices=("y1", "y2", "xor"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--noise-sd", type=float, default=1.0)
    p.add_argument("--s1", default="", help="xor linear terms, 1-based: '1:1.5,2:1.5'")
    p.add_argument("--s2", default="", help="xor pairs, 1-based: '2,3:1.5;4,5:1.0'")
    p.add_argument("--pi", type=float, default=0.5, help="xor Bernoulli success probability")
    p.add_argument("--output", required=True)
    common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("tune", help="random-search hyperparameter tuning")
    p.add_argument("--input", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--rounds", type=int, default=20)
    p.add_argument("--members", type=int, help="override the bagging count value set")
    p.add_argument("--output", required=True, help="best-hyperparameters JSON")
    p.add_argument("--trace", help="trace CSV (default <output>.trace.csv)")
    common(p)
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("benchmark", help="repeated tune/refit/test evaluation with win rates")
    p.add_argument("--input", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--rounds", type=int, default=20)
    p.add_argument("--members", type=int, help="override the bagging count value set")
    p.add_argument("--external", action="append", help="NAME=scores.csv with repeat,r2 columns")
    p.add_argument("--output", required=True, help="report CSV")
    common(p)
    p.set_defaults(func=_cmd_benchmark)

    p = sub.add_parser("oracle", help="population effects and pursuit paths for a support table")
    p.add_argument("--table", required=True, help="support-table text file")
    p.add_argument("--effects", action="store_true")
    p.add_argument("--pursuit", type=int, help="pursuit path length K")
    p.add_argument("--output")
    common(p)
    p.set_defaults(func=_cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "oracle" and not (args.effects or args.pursuit is not None):
        parser.error("oracle requires --effects and/or --pursuit K")
    try:
        return args.func(args)
    except CollabTreesError as exc:
        print(f"error:{exc.category}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error:io: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
