"""Command-line entry point: ``scorepath <command> --config cfg.json --out DIR``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import analysis, experiments, learn, verify
from .errors import ScorePathError
from .kinematics import ControllerParams, SimConfig, simulate
from .score import AffineStBSF, LinearScoreModel, compose
from .sensor import Corridor, SensorConfig, render_depth, sensor_map


def load_config(path) -> dict:
    return json.loads(Path(path).read_text()) if path else {}


def _out_file(out, default_name: str) -> Path:
    p = Path(out)
    if p.suffix:
        p.parent.mkdir(parents=True, exist_ok=True)
        return p
    p.mkdir(parents=True, exist_ok=True)
    return p / default_name


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n")
    print(path)


def _corridor_sensor(cfg: dict):
    return Corridor.from_dict(cfg.get("corridor", {})), SensorConfig.from_dict(cfg.get("sensor", {}))


def sensor_from_meta(meta: dict, cfg: dict, seed: int = 0):
    """Sensor map matching a trained model's recorded geometry; config fills anything missing."""
    corridor, scfg = _corridor_sensor(cfg)
    corridor = Corridor(meta.get("corridor_width_m", corridor.width), corridor.perturbations)
    scfg = SensorConfig(meta.get("n_rays", scfg.n_rays), meta.get("fov_rad", scfg.fov),
                        meta.get("max_range_m", scfg.max_range), 0.0)
    return sensor_map(corridor, scfg, seed=seed)


def load_score(spec: str, cfg: dict, seed: int = 0):
    """``affine``, ``affine:a,b[,cubic]`` or a path to a model JSON."""
    if spec is None:
        spec = cfg.get("score", {}).get("path") or "affine"
    if spec.startswith("affine"):
        vals = [float(x) for x in spec.split(":", 1)[1].split(",")] if ":" in spec else []
        if not vals:
            sc = cfg.get("score", {})
            vals = [sc.get("a", 1.0), sc.get("b", 1.0), sc.get("cubic", 0.0)]
        return AffineStBSF(*vals)
    model = LinearScoreModel.load(spec)
    return compose(model, sensor_from_meta(model.feature_meta, cfg, seed))


def _analysis_cfg(cfg: dict, score, seed: int) -> analysis.AnalysisConfig:
    acfg = dict(cfg.get("analysis", {}))
    acfg.setdefault("seed", seed)
    if "d_cap" not in acfg and hasattr(score, "sensor"):
        # learned scores are only trusted where they were verified
        acfg["d_cap"] = verify.VerifyGrid.from_dict(cfg.get("verify", {}).get("grid", {})).d_max
    return analysis.AnalysisConfig.from_dict(acfg)


def cmd_render(args, cfg):
    corridor, scfg = _corridor_sensor(cfg)
    scan = render_depth(corridor, scfg, tuple(args.state), seed=args.seed)
    _write_json(_out_file(args.out, "scan.json"),
                {"state": list(args.state), "ray_angles": scfg.ray_angles.tolist(), "ranges": scan.tolist()})


def cmd_dataset(args, cfg):
    corridor, scfg = _corridor_sensor(cfg)
    dcfg = dict(cfg.get("dataset", {}))
    grid = learn.GridSpec.from_dict(dcfg.pop("grid", {}))
    data = learn.generate_dataset(corridor, scfg, grid, seed=args.seed, **dcfg)
    path = _out_file(args.out, "dataset.csv")
    data.to_csv(path)
    _write_json(path.with_suffix(".json"), data.sensor_meta)


def cmd_train(args, cfg):
    if args.dataset:
        meta_path = Path(args.dataset).with_suffix(".json")
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        data = learn.Dataset.from_csv(args.dataset, meta)
    else:
        corridor, scfg = _corridor_sensor(cfg)
        dcfg = dict(cfg.get("dataset", {}))
        grid = learn.GridSpec.from_dict(dcfg.pop("grid", {}))
        data = learn.generate_dataset(corridor, scfg, grid, seed=args.seed, **dcfg)
    hp = learn.SvmHyperParams.from_dict({**cfg.get("svm", {}), "seed": args.seed})
    model = learn.train_linear_svm(data, hp)
    path = _out_file(args.out, "model.json")
    model.save(path)
    print(path)


def cmd_verify(args, cfg):
    score = load_score(args.score, cfg, args.seed)
    grid = verify.VerifyGrid.from_dict(cfg.get("verify", {}).get("grid", {}))
    vcfg = {k: v for k, v in cfg.get("verify", {}).items() if k != "grid"}
    fld = verify.estimate_partials(score, grid)
    rep = verify.check_conditions(fld, **vcfg)
    path = _out_file(args.out, "verify.json")
    path.write_text(verify.report_json(rep, fld))
    print(path)
    print("pass" if rep.passed else "fail", f"region_size={rep.region_size}")


def cmd_curve(args, cfg):
    score = load_score(args.score, cfg, args.seed)
    acfg = _analysis_cfg(cfg, score, args.seed)
    curve = analysis.solve_implicit_curve(score, acfg.theta_grid, acfg.tol, acfg.d_cap)
    out = curve.to_dict()
    try:
        out["slope_bounds"] = analysis.slope_bounds(curve, acfg.margin, acfg.rel_margin).to_dict()
    except ScorePathError as exc:
        out["slope_bounds_error"] = f"{type(exc).__name__}: {exc}"
    _write_json(_out_file(args.out, "curve.json"), out)


def cmd_certify(args, cfg):
    score = load_score(args.score, cfg, args.seed)
    acfg = _analysis_cfg(cfg, score, args.seed)
    gamma = args.gamma if args.gamma is not None else cfg.get("params", {}).get("gamma", 1.0)
    alpha = args.alpha if args.alpha is not None else cfg.get("params", {}).get("alpha", 5e-5)
    params = None
    if args.beta is None:
        try:
            params = analysis.recommend_params(score, gamma, alpha, args.safety, acfg)
        except ScorePathError as exc:
            print(f"no recommended beta ({type(exc).__name__}); certifying the configured beta", file=sys.stderr)
    if params is None:
        beta = args.beta if args.beta is not None else cfg.get("params", {}).get("beta", 0.2)
        params = ControllerParams(alpha, beta, gamma)
    cert = analysis.certify(score, params, acfg)
    path = _out_file(args.out, "cert.json")
    path.write_text(cert.to_json())
    print(path)
    print(cert.to_dict()["verdict"], f"ratio={params.ratio:g}", f"admissible={cert.admissible_ratio}")


def cmd_simulate(args, cfg):
    score = load_score(args.score, cfg, args.seed)
    sim = SimConfig.from_dict(cfg.get("sim", {}))
    p = cfg.get("params", {})
    params = ControllerParams(args.alpha if args.alpha is not None else p.get("alpha", 5e-5),
                              args.beta if args.beta is not None else p.get("beta", 0.2),
                              args.gamma if args.gamma is not None else p.get("gamma", 1.0))
    tr = simulate(tuple(args.state), score, params, sim)
    path = _out_file(args.out, "trajectory.csv")
    tr.to_csv(path)
    print(path)
    print(tr.event, f"t_end={tr.t_end:g}")


def cmd_sweep(args, cfg):
    score = load_score(args.score, cfg, args.seed)
    scfg = dict(cfg.get("sweep", {}))
    scfg.setdefault("sim", cfg.get("sim", {}))
    scfg["seed"] = args.seed
    result = experiments.run_sweep(experiments.sweep_from_dict(scfg, score))
    out = Path(args.out)
    experiments.export_all(result, out)
    print(out / "summary.json")
    for row in result.summary()["per_ratio"]:
        print(f"ratio={row['ratio']:g} crashed={row['n_crashed']}/{row['n']} "
              f"mean_settling_time={row['mean_settling_time']}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scorepath", description="Score-function path following toolkit")
    ap.add_argument("--seed", type=int, default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--out", default=".", help="output directory (or file path ending in an extension)")
        p.set_defaults(fn=fn)
        return p

    p = add("render", cmd_render, "render one depth scan")
    p.add_argument("--state", type=float, nargs="+", default=[0.0, 0.0], metavar="X")
    add("dataset", cmd_dataset, "generate a labeled scan dataset")
    p = add("train", cmd_train, "train the linear SVM score")
    p.add_argument("--dataset", default=None)
    for name, fn, help_ in (("verify", cmd_verify, "grid check of the monotonicity conditions"),
                            ("curve", cmd_curve, "trace the zero level set")):
        add(name, fn, help_).add_argument("--score", default=None)
    p = add("certify", cmd_certify, "stability certificate")
    p.add_argument("--score", default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None, help="omit to use the recommended beta")
    p.add_argument("--safety", type=float, default=0.5)
    p = add("simulate", cmd_simulate, "simulate one trajectory")
    p.add_argument("--score", default=None)
    p.add_argument("--state", type=float, nargs="+", default=[0.6, 0.5], metavar="X")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p = add("sweep", cmd_sweep, "beta/gamma sweep with CSV, JSON and SVG export")
    p.add_argument("--score", default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = load_config(args.config)
    try:
        args.fn(args, cfg)
    except (ScorePathError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
