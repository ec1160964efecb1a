"""Command line entry points.

    intersim gen-synthetic --out corpus.jsonl --n-ped 200 --n-veh 200
    intersim fit-gmm --corpus corpus.jsonl --kind veh --out veh_gmm.json
    intersim fit-tod --corpus corpus.jsonl --kind veh --out veh_tod.json
    intersim extract-scenes --corpus corpus.jsonl --out scenes.jsonl
    intersim train --scenes scenes.jsonl --mode waypoint --out model.json
    intersim evaluate --scenes scenes.jsonl --model wpt=model.json --baseline
    intersim simulate --gmm-ped p.json --gmm-veh v.json --ticks 500 --trace out.jsonl
    intersim outliers --corpus corpus.jsonl --gmm veh_gmm.json --kind veh
    intersim serve --gmm-ped p.json --gmm-veh v.json --port 8000
"""

from __future__ import annotations

import argparse
import json
import sys

from .core import AgentKind, vectorize_trajectory
from .density import DEFAULT_COMPONENTS as TOD_COMPONENTS
from .density import TodDensityModel, fit_tod
from .engine import SimConfig, SimEngine
from .forecaster import ForecastModel, TrainOptions, init_model, train
from .gmm import DEFAULT_COMPONENTS, GmmModel, fit_em, zscore_outliers
from .ingest import (
    SynthConfig,
    extract_scenes,
    filter_truncated,
    hourly_counts,
    load_corpus,
    load_scenes,
    resample_corpus,
    save_corpus,
    save_scenes,
    synth_generate,
)
from .metrics import EvalReport, evaluate_constant_velocity, evaluate_model


def _dump(obj: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh)


def _load(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def cmd_gen_synthetic(args) -> int:
    cfg = SynthConfig(
        seed=args.seed,
        n_ped=args.n_ped,
        n_veh=args.n_veh,
        n_anomalies=args.anomalies,
        conflict_fraction=args.conflict_fraction,
        dt_raw=args.dt_raw,
    )
    result = synth_generate(cfg)
    save_corpus(result.trajectories, args.out, labels=result.labels)
    meta = {
        "labels": {str(k): v for k, v in result.labels.items()},
        "conflicts": result.conflicts,
        "region": list(result.region),
    }
    _dump(meta, args.out + ".meta.json")
    print(f"wrote {len(result.trajectories)} trajectories to {args.out}")
    return 0


def _load_kind_features(args):
    trajs = load_corpus(args.corpus, strict=not args.lenient)
    kind = AgentKind.from_str(args.kind)
    trajs = [t for t in trajs if t.kind == kind]
    if args.filter_region:
        region = tuple(args.filter_region)
        trajs = filter_truncated(trajs, region, margin=args.filter_margin)
    res = resample_corpus(trajs, args.dt)
    return kind, trajs, [vectorize_trajectory(t) for t in res]


def cmd_fit_gmm(args) -> int:
    kind, _, feats = _load_kind_features(args)
    model = fit_em(feats, m=args.components, seed=args.seed, kind=kind)
    _dump(model.to_dict(), args.out)
    print(f"fitted {args.components}-component mixture on {len(feats)} {kind.value} trajectories")
    return 0


def cmd_fit_tod(args) -> int:
    trajs = load_corpus(args.corpus, strict=not args.lenient)
    kind = AgentKind.from_str(args.kind)
    counts = hourly_counts(trajs, kind)
    n = args.components if args.components else TOD_COMPONENTS[kind]
    model = fit_tod(counts, kind, n_components=n)
    _dump(model.to_dict(), args.out)
    print(f"fitted daily profile for {kind.value}: rmse {model.fit_rmse:.3f}")
    return 0


def cmd_extract_scenes(args) -> int:
    trajs = load_corpus(args.corpus, strict=not args.lenient)
    scenes = extract_scenes(
        trajs,
        dt=args.dt,
        length=args.length,
        stride=args.stride,
        min_agents=args.min_agents,
        max_scenes=args.max_scenes,
    )
    save_scenes(scenes, args.out)
    print(f"extracted {len(scenes)} scenes")
    return 0


def cmd_train(args) -> int:
    scenes = load_scenes(args.scenes)
    model = init_model(seed=args.seed, supervision=args.mode, l_pd=args.l_pd)
    opts = TrainOptions(lr=args.lr, batch_size=args.batch, seed=args.seed)
    log: list[tuple[int, float]] = []
    train(model, scenes, epochs=args.epochs, opts=opts, log=log)
    _dump(model.to_dict(), args.out)
    if args.loss_csv:
        with open(args.loss_csv, "w", encoding="utf-8") as fh:
            fh.write("epoch,loss\n")
            for epoch, loss in log:
                fh.write(f"{epoch},{loss:.8f}\n")
    print(f"trained {args.epochs} epochs on {len(scenes)} scenes; final loss {log[-1][1]:.6f}")
    return 0


def cmd_evaluate(args) -> int:
    scenes = load_scenes(args.scenes)
    report = EvalReport()
    for model_arg in args.model or []:
        if "=" in model_arg:
            label, path = model_arg.split("=", 1)
        else:
            label, path = model_arg, model_arg
        model = ForecastModel.from_dict(_load(path))
        report.rows.append(
            evaluate_model(model, scenes, label=label, horizon=args.horizon, mean_l2=args.mean_l2)
        )
    if args.baseline or not args.model:
        report.rows.append(
            evaluate_constant_velocity(scenes, horizon=args.horizon, mean_l2=args.mean_l2)
        )
    print(report.format_table())
    if args.csv:
        report.to_csv(args.csv)
    return 0


def cmd_simulate(args) -> int:
    priors = {
        AgentKind.PEDESTRIAN: GmmModel.from_dict(_load(args.gmm_ped)),
        AgentKind.VEHICLE: GmmModel.from_dict(_load(args.gmm_veh)),
    }
    if args.tod_ped:
        tod_p = TodDensityModel.from_dict(_load(args.tod_ped))
    else:
        tod_p = TodDensityModel.constant(AgentKind.PEDESTRIAN, args.level)
    if args.tod_veh:
        tod_v = TodDensityModel.from_dict(_load(args.tod_veh))
    else:
        tod_v = TodDensityModel.constant(AgentKind.VEHICLE, args.level)
    tod = {AgentKind.PEDESTRIAN: tod_p, AgentKind.VEHICLE: tod_v}
    model = ForecastModel.from_dict(_load(args.model)) if args.model else None
    config = SimConfig(seed=args.seed, start_hour=args.start_hour, refine=not args.no_refine)
    eng = SimEngine(config, priors, tod, model=model)
    eng.run(args.ticks, trace_path=args.trace)
    print(f"ran {args.ticks} ticks; {len(eng.agents)} agents active at the end")
    return 0


def cmd_outliers(args) -> int:
    trajs = load_corpus(args.corpus, strict=not args.lenient)
    kind = AgentKind.from_str(args.kind)
    trajs = [t for t in trajs if t.kind == kind]
    res = resample_corpus(trajs, args.dt)
    feats = [vectorize_trajectory(t) for t in res]
    model = GmmModel.from_dict(_load(args.gmm))
    ranked = zscore_outliers(model, feats, threshold=args.threshold)
    shown = ranked[: args.top]
    for rank, (i, z) in enumerate(shown, start=1):
        print(f"{rank:3d}  agent {trajs[i].agent_id:5d}  z={z:+.2f}")
    if not shown:
        print("no trajectories exceed the threshold")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import build_default_app

    app = build_default_app(
        gmm_ped=args.gmm_ped,
        gmm_veh=args.gmm_veh,
        tod_ped=args.tod_ped,
        tod_veh=args.tod_veh,
        model=args.model,
        seed=args.seed,
        level=args.level,
        start_hour=args.start_hour,
        static_dir=args.static,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _add_corpus_args(p, with_dt=True):
    p.add_argument("--corpus", required=True)
    p.add_argument("--lenient", action="store_true", help="skip malformed lines instead of failing")
    if with_dt:
        p.add_argument("--dt", type=float, default=0.4)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="intersim", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="generate a synthetic intersection corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-ped", type=int, default=200)
    p.add_argument("--n-veh", type=int, default=200)
    p.add_argument("--anomalies", type=int, default=0)
    p.add_argument("--conflict-fraction", type=float, default=0.25)
    p.add_argument("--dt-raw", type=float, default=1.0 / 30.0)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("fit-gmm", help="fit the trajectory mixture for one agent kind")
    _add_corpus_args(p)
    p.add_argument("--kind", required=True, choices=["ped", "veh"])
    p.add_argument("--components", type=int, default=DEFAULT_COMPONENTS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--filter-region", type=float, nargs=4, metavar=("XMIN", "YMIN", "XMAX", "YMAX"))
    p.add_argument("--filter-margin", type=float, default=2.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_gmm)

    p = sub.add_parser("fit-tod", help="fit the daily arrival profile for one agent kind")
    _add_corpus_args(p, with_dt=False)
    p.add_argument("--kind", required=True, choices=["ped", "veh"])
    p.add_argument("--components", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_tod)

    p = sub.add_parser("extract-scenes", help="cut training scenes out of a corpus")
    _add_corpus_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--length", type=int, default=20)
    p.add_argument("--stride", type=int, default=10)
    p.add_argument("--min-agents", type=int, default=1)
    p.add_argument("--max-scenes", type=int, default=None)
    p.set_defaults(func=cmd_extract_scenes)

    p = sub.add_parser("train", help="train the refinement model")
    p.add_argument("--scenes", required=True)
    p.add_argument("--mode", default="waypoint", choices=["none", "destination", "waypoint"])
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--l-pd", type=int, default=12)
    p.add_argument("--out", required=True)
    p.add_argument("--loss-csv", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score models against recorded scenes")
    p.add_argument("--scenes", required=True)
    p.add_argument("--model", action="append", metavar="LABEL=PATH")
    p.add_argument("--baseline", action="store_true", help="include the constant-velocity row")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--mean-l2", action="store_true",
                   help="average raw distances instead of the root-mean-square form")
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="run the simulation headless and record a trace")
    p.add_argument("--gmm-ped", required=True)
    p.add_argument("--gmm-veh", required=True)
    p.add_argument("--tod-ped", default=None)
    p.add_argument("--tod-veh", default=None)
    p.add_argument("--level", type=float, default=3.0,
                   help="flat target agent count per kind when no profile is given")
    p.add_argument("--model", default=None)
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--ticks", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start-hour", type=float, default=8.0)
    p.add_argument("--trace", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("outliers", help="rank unusual trajectories under a fitted mixture")
    _add_corpus_args(p)
    p.add_argument("--gmm", required=True)
    p.add_argument("--kind", required=True, choices=["ped", "veh"])
    p.add_argument("--threshold", type=float, default=20.0)
    p.add_argument("--top", type=int, default=10)
    p.set_defaults(func=cmd_outliers)

    p = sub.add_parser("serve", help="serve the control websocket (and frontend if built)")
    p.add_argument("--gmm-ped", required=True)
    p.add_argument("--gmm-veh", required=True)
    p.add_argument("--tod-ped", default=None)
    p.add_argument("--tod-veh", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--level", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start-hour", type=float, default=8.0)
    p.add_argument("--static", default=None, help="directory with the built frontend")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
