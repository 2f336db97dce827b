"""Operator command line driving every pipeline stage.

Exit codes: 0 success, 1 usage error, 2 runtime failure. Output files are
written atomically (temp file + rename) so failed runs leave nothing behind.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile

from . import __version__
from .config import Config, apply_overrides, load_config, retro_request_kwargs, save_config
from .errors import ContractViolation, DataError, InvalidItemError, UnknownUserError
from .evaluation import (
    ablation_sweep,
    model_test_metrics,
    popularity_test_metrics,
    pro_rows_csv,
    pro_summary_csv,
    pro_summary_text,
    prospective_simulation,
    retro_rows_csv,
    retro_summary_csv,
    retro_summary_text,
    retrospective_eval,
    sweep_csv,
)
from .ingest import filter_log, ingest
from .persist import (
    dense_item_names,
    load_id_map,
    load_item_names,
    load_model,
    save_id_map,
    save_model,
)
from .prospective import prospective_explanation
from .recommend import recommend_top_k
from .records import METHOD_RELAX, METHOD_SEARCH, METHODS
from .render import render_explanation
from .retrospective import RetroRequest, greedy_retrospective, relaxed_retrospective
from .splits import save_split_manifest, split
from .training import train
from .windows import MaskVector, SequenceWindow

log = logging.getLogger("ctrlrec")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _write_atomic(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-ctrlrec-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _build_parser() -> _Parser:
    parser = _Parser(prog="ctrlrec",
                     description="controllable sequential recommender")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key (repeatable)")
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int)

    p = sub.add_parser("train", help="ingest, filter, split, train, persist")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("recommend", help="print the top-K for a user")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--user", required=True, help="original user id")
    p.add_argument("--k", type=int)

    p = sub.add_parser("explain-retro", help="retrospective explanation")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--item", required=True, help="original item id")
    p.add_argument("--method", choices=[METHOD_SEARCH, METHOD_RELAX])
    p.add_argument("--k", type=int)

    p = sub.add_parser("explain-pro", help="prospective explanation")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--item", required=True)
    p.add_argument("--k", type=int)

    p = sub.add_parser("eval-retro", help="controllability evaluation")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--sample-size", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval-pro", help="prospective simulation evaluation")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--m", type=int, help="simulation set size")
    p.add_argument("--k", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("ablate", help="hyperparameter sweep")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--param", required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--sample-size", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="run the HTTP control-loop service")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--names", help="item display-name table")
    return parser


def _config_from_args(args) -> Config:
    config = load_config(args.config) if args.config else Config()
    overrides = {}
    for assignment in args.set:
        if "=" not in assignment:
            raise UsageError(f"--set expects KEY=VALUE, got {assignment!r}")
        key, value = assignment.split("=", 1)
        overrides[key] = value
    apply_overrides(config, overrides)
    if args.seed is not None:
        config.seed = args.seed
    if getattr(args, "jobs", None) is not None:
        config.jobs = args.jobs
    for attr, key in (("k", "k"), ("sample_size", "sample_size"),
                      ("m", "sim_set_size"), ("method", "method"),
                      ("host", "host"), ("port", "port")):
        value = getattr(args, attr, None)
        if value is not None:
            setattr(config, key, value)
    return config


def _load_dataset(config: Config, data_path):
    log_in = ingest(data_path, config.data_format)
    filtered = filter_log(log_in, config.min_user_interactions,
                          config.min_item_interactions)
    dataset = split(filtered, m=config.sim_set_size, max_len=config.max_len)
    return filtered, dataset


def _serving_window(filtered, params, token):
    try:
        user = filtered.user_tokens.index(token)
    except ValueError:
        raise UnknownUserError(f"unknown user {token!r}") from None
    seq = filtered.user_sequences()[user]
    return user, SequenceWindow(tuple(seq[-params.max_len:]), params.max_len)


def _item_id(filtered, token):
    try:
        return filtered.item_tokens.index(token)
    except ValueError:
        raise InvalidItemError(f"unknown item {token!r}") from None


def cmd_train(args) -> int:
    config = _config_from_args(args)
    filtered, dataset = _load_dataset(config, args.data)
    params, history = train(dataset, config)
    os.makedirs(args.out, exist_ok=True)
    save_model(params, os.path.join(args.out, "model.crsm"))
    save_id_map(filtered.user_tokens, os.path.join(args.out, "users.idmap"))
    save_id_map(filtered.item_tokens, os.path.join(args.out, "items.idmap"))
    save_split_manifest(dataset, os.path.join(args.out, "split.jsonl"))
    save_config(config, os.path.join(args.out, "run.conf"))
    print(f"trained {config.scorer} for {config.epochs} epochs; "
          f"best epoch {history.best_epoch} "
          f"(validation NDCG@10 {history.best_val_ndcg:.4f})")
    print(f"model written to {os.path.join(args.out, 'model.crsm')}")
    return 0


def cmd_recommend(args) -> int:
    config = _config_from_args(args)
    params = load_model(args.model)
    config.max_len = params.max_len
    filtered = filter_log(ingest(args.data, config.data_format),
                          config.min_user_interactions,
                          config.min_item_interactions)
    _, window = _serving_window(filtered, params, args.user)
    lst = recommend_top_k(params, window, MaskVector.zeros(params.max_len),
                          config.k, config.exclude_history)
    for rank, (item, score) in enumerate(lst.entries, start=1):
        print(f"{rank:3d}. {filtered.item_tokens[item]}  {score:.4f}")
    return 0


def _explain_common(args, retro: bool) -> int:
    config = _config_from_args(args)
    params = load_model(args.model)
    config.max_len = params.max_len
    filtered = filter_log(ingest(args.data, config.data_format),
                          config.min_user_interactions,
                          config.min_item_interactions)
    user, window = _serving_window(filtered, params, args.user)
    item = _item_id(filtered, args.item)
    names = lambda i: filtered.item_tokens[i]
    if retro:
        req = RetroRequest(window=window, target_item=item,
                           **retro_request_kwargs(config))
        method = getattr(args, "method", None) or config.method
        if method == METHOD_RELAX:
            record = relaxed_retrospective(params, req)
        else:
            record = greedy_retrospective(params, req)
        record.user_id = user
        print(render_explanation(record, names, verb=config.verb))
        if record.succeeded:
            revoked = ", ".join(
                f"{filtered.item_tokens[i]}@{p}" for p, i in record.revoked
            )
            print(f"revoked behaviors: {revoked} "
                  f"({record.iterations} iterations)")
    else:
        record = prospective_explanation(params, window, item, config.k,
                                         exclude_history=config.exclude_history)
        record.user_id = user
        print(render_explanation(record, names))
    return 0


def cmd_eval_retro(args) -> int:
    config = _config_from_args(args)
    params = load_model(args.model)
    config.max_len = params.max_len
    _, dataset = _load_dataset(config, args.data)
    report = retrospective_eval(
        params, dataset, methods=METHODS, k_values=(3, 5, 10),
        sample_size=config.sample_size, seed=config.seed,
        request_kwargs=retro_request_kwargs(config), jobs=config.jobs,
    )
    os.makedirs(args.out, exist_ok=True)
    _write_atomic(os.path.join(args.out, "retro_summary.csv"),
                  retro_summary_csv(report))
    _write_atomic(os.path.join(args.out, "retro_rows.csv"),
                  retro_rows_csv(report))
    _write_atomic(os.path.join(args.out, "records.tsv"),
                  "\n".join(report.report_lines) + "\n")
    print(retro_summary_text(report), end="")
    return 0


def cmd_eval_pro(args) -> int:
    config = _config_from_args(args)
    params = load_model(args.model)
    config.max_len = params.max_len
    _, dataset = _load_dataset(config, args.data)
    report = prospective_simulation(params, dataset, k=config.k,
                                    exclude_history=config.exclude_history)
    os.makedirs(args.out, exist_ok=True)
    _write_atomic(os.path.join(args.out, "pro_summary.csv"),
                  pro_summary_csv(report))
    _write_atomic(os.path.join(args.out, "pro_rows.csv"), pro_rows_csv(report))
    print(pro_summary_text(report), end="")
    model_m = model_test_metrics(params, dataset, config.k)
    pop_m = popularity_test_metrics(dataset, config.k)
    print(f"base model NDCG@{config.k} {model_m[0]:.4f} "
          f"(popularity {pop_m[0]:.4f})")
    return 0


def cmd_ablate(args) -> int:
    config = _config_from_args(args)
    params = load_model(args.model)
    config.max_len = params.max_len
    _, dataset = _load_dataset(config, args.data)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--values must be comma-separated numbers, got {args.values!r}")
    if not values:
        raise UsageError("--values is empty")
    points = ablation_sweep(
        params, dataset, args.param, values, k=config.k,
        sample_size=config.sample_size, seed=config.seed,
        request_kwargs=retro_request_kwargs(config), jobs=config.jobs,
    )
    os.makedirs(args.out, exist_ok=True)
    _write_atomic(os.path.join(args.out, "sweep.csv"), sweep_csv(points))
    for p in points:
        comp = "-" if p.complexity_mean is None else f"{p.complexity_mean:.4f}"
        acc = "-" if p.accuracy_mean is None else f"{p.accuracy_mean:.4f}"
        print(f"{p.param}={p.value:g}: fidelity {p.fidelity:.4f} "
              f"complexity {comp} accuracy {acc}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import build_app, build_state

    config = _config_from_args(args)
    params = load_model(args.model)
    config.max_len = params.max_len
    filtered = filter_log(ingest(args.data, config.data_format),
                          config.min_user_interactions,
                          config.min_item_interactions)
    names = {}
    names_path = args.names or config.names_path
    if names_path:
        names = dense_item_names(filtered.item_tokens,
                                 load_item_names(names_path))
    state = build_state(params, filtered.user_sequences(), names, config)
    app = build_app(state)
    if config.snapshot_path and os.path.exists(config.snapshot_path):
        state.store.restore(config.snapshot_path)
    print(f"serving on http://{config.host}:{config.port} "
          f"({len(state.user_windows)} users, {params.n_items} items)")
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return 0


_COMMANDS = {
    "train": cmd_train,
    "recommend": cmd_recommend,
    "explain-retro": lambda a: _explain_common(a, retro=True),
    "explain-pro": lambda a: _explain_common(a, retro=False),
    "eval-retro": cmd_eval_retro,
    "eval-pro": cmd_eval_pro,
    "ablate": cmd_ablate,
    "serve": cmd_serve,
}


def run(argv) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(asctime)s %(name)s %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ContractViolation, InvalidItemError,
            UnknownUserError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
