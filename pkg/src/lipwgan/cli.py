"""Command-line entry point: ``lipwgan <command> --config cfg.json --seed N --out DIR``.

Commands: train, eval, equiv, sweep, heatmap, w1. Every command writes the
resolved configuration to ``<out>/config.json`` next to its CSV/SVG outputs.
"""

import argparse
import csv
import json
import logging
import os
import sys

from . import svg
from .config import build, to_dict
from .data import LatentSpec, MixtureSpec, make_rng, sample_latent, sample_mixture_points, split_seed
from .experiments import (
    EquivConfig,
    EvalConfig,
    TargetConfig,
    render_heatmap,
    run_depth_sweep,
    run_equivalence,
)
from .nets import generator_forward, load_net, net_from_dict, save_net
from .ot import DiscConfig, read_cloud_csv, wasserstein1_exact
from .training import GeneratorConfig, TrainConfig, evaluate_model, train_wgan

log = logging.getLogger("lipwgan")


def _g(v):
    return f"{v:.17g}"


def _target(cfg):
    """``{"mixture": {...}}`` for an explicit MixtureSpec, otherwise a grid TargetConfig."""
    if "mixture" in cfg:
        return MixtureSpec.from_dict(cfg["mixture"]), {"mixture": cfg["mixture"]}
    t = build(TargetConfig, cfg)
    return t.spec(), to_dict(t)


def _write_config(out, resolved):
    with open(os.path.join(out, "config.json"), "w") as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def cmd_train(cfg, seed, out):
    gcfg = build(GeneratorConfig, cfg.get("generator"))
    dcfg = build(DiscConfig, cfg.get("discriminator"))
    tcfg = build(TrainConfig, {**cfg.get("train", {}), "seed": seed})
    ecfg = build(EvalConfig, cfg.get("eval"))
    spec, tdict = _target(cfg.get("target", {}))
    _write_config(out, {"generator": to_dict(gcfg), "discriminator": to_dict(dcfg), "train": to_dict(tcfg),
                        "eval": to_dict(ecfg), "target": tdict, "seed": seed})
    ckpt = os.path.join(out, "checkpoints")
    os.makedirs(ckpt, exist_ok=True)

    def checkpoint(step, gen, disc):
        save_net(gen, os.path.join(ckpt, f"generator_{step:06d}.json"), seed=seed)
        save_net(disc, os.path.join(ckpt, f"discriminator_{step:06d}.json"), tcfg.projection, seed)

    gen, disc, hist = train_wgan(gcfg, dcfg, spec, tcfg, callback=checkpoint)
    hist.write_csv(os.path.join(out, "history.csv"))
    save_net(gen, os.path.join(out, "generator.json"), seed=seed)
    save_net(disc, os.path.join(out, "discriminator.json"), tcfg.projection, seed)
    w1, rec = evaluate_model(gen, gcfg.latent, spec, ecfg.n_eval, ecfg.runs, split_seed(seed, 1), ecfg.k)
    _write_rows(os.path.join(out, "eval.csv"), ["w1", "recall", "k", "n_eval", "runs", "status"],
                [[_g(w1), _g(rec.value), ecfg.k, ecfg.n_eval, ecfg.runs, "diverged" if hist.diverged else "ok"]])
    rng = make_rng(split_seed(seed, 2))
    real = sample_mixture_points(spec, 2000, rng)
    fake = generator_forward(gen, sample_latent(gcfg.latent, 2000, rng))
    svg.write(os.path.join(out, "samples.svg"), svg.points_svg(real, fake, "target (green) vs generator (blue)"))
    if hist.diverged:
        log.warning(hist.message)
    return 0


def cmd_eval(cfg, seed, out):
    if "generator" not in cfg:
        raise ValueError("eval needs 'generator': a checkpoint path or an inline checkpoint")
    g = cfg["generator"]
    gen = load_net(g) if isinstance(g, str) else net_from_dict(g)
    latent = build(LatentSpec, cfg.get("latent", {"dim": gen.input_dim}))
    ecfg = build(EvalConfig, cfg.get("eval"))
    spec, tdict = _target(cfg.get("target", {}))
    _write_config(out, {"generator": g if isinstance(g, str) else "<inline>", "latent": to_dict(latent),
                        "eval": to_dict(ecfg), "target": tdict, "seed": seed})
    w1, rec = evaluate_model(gen, latent, spec, ecfg.n_eval, ecfg.runs, seed, ecfg.k)
    _write_rows(os.path.join(out, "eval.csv"), ["w1", "recall", "k", "n_eval", "runs"],
                [[_g(w1), _g(rec.value), ecfg.k, ecfg.n_eval, ecfg.runs]])
    return 0


def cmd_equiv(cfg, seed, out):
    K_list = cfg.get("K_list", [4])
    q_list = cfg.get("q_list", [2, 5])
    n_pairs = cfg.get("n_pairs", 40)
    ecfg = build(EquivConfig, cfg.get("equiv"))
    _write_config(out, {"K_list": K_list, "q_list": q_list, "n_pairs": n_pairs, "equiv": to_dict(ecfg),
                        "seed": seed})
    run_equivalence(K_list, q_list, n_pairs, ecfg, seed, out)
    return 0


def cmd_sweep(cfg, seed, out):
    p_list = cfg.get("p_list", [2, 3, 5, 7])
    q_list = cfg.get("q_list", [2, 3, 5, 7])
    mode = cfg.get("mode", "asymptotic")
    seeds = cfg.get("seeds", 3)
    target = build(TargetConfig, cfg.get("target"))
    tcfg = build(TrainConfig, {**cfg.get("train", {}), "seed": seed})
    ecfg = build(EvalConfig, cfg.get("eval"))
    gcfg = build(GeneratorConfig, cfg.get("generator"))
    dcfg = build(DiscConfig, cfg.get("discriminator"))
    _write_config(out, {"p_list": p_list, "q_list": q_list, "mode": mode, "seeds": seeds,
                        "target": to_dict(target), "train": to_dict(tcfg), "eval": to_dict(ecfg),
                        "generator": to_dict(gcfg), "discriminator": to_dict(dcfg), "seed": seed})
    run_depth_sweep(p_list, q_list, target, mode, seeds, tcfg, ecfg, gcfg, dcfg, out)
    return 0


def cmd_heatmap(cfg, seed, out):
    x_range = cfg.get("x_range", [-4.0, 4.0])
    y_range = cfg.get("y_range", [-4.0, 4.0])
    resolution = cfg.get("resolution", 100)
    resolved = {"x_range": x_range, "y_range": y_range, "resolution": resolution, "seed": seed}
    if cfg.get("discriminator"):
        d = cfg["discriminator"]
        disc = load_net(d) if isinstance(d, str) else net_from_dict(d)
        resolved["discriminator"] = d if isinstance(d, str) else "<inline>"
        _write_config(out, resolved)
    else:
        # no checkpoint given: train a p = q = 3 WGAN on the target first
        gcfg = build(GeneratorConfig, {"depth": 3, **cfg.get("generator", {})})
        dcfg = build(DiscConfig, {"depth": 3, **cfg.get("critic", {})})
        tcfg = build(TrainConfig, {**cfg.get("train", {}), "seed": seed})
        spec, tdict = _target(cfg.get("target", {"K": 4}))
        resolved.update(generator=to_dict(gcfg), critic=to_dict(dcfg), train=to_dict(tcfg), target=tdict)
        _write_config(out, resolved)
        gen, disc, hist = train_wgan(gcfg, dcfg, spec, tcfg)
        hist.write_csv(os.path.join(out, "history.csv"))
        save_net(disc, os.path.join(out, "discriminator.json"), tcfg.projection, seed)
        rng = make_rng(split_seed(seed, 2))
        real = sample_mixture_points(spec, 2000, rng)
        fake = generator_forward(gen, sample_latent(gcfg.latent, 2000, rng))
        svg.write(os.path.join(out, "samples.svg"), svg.points_svg(real, fake, "target vs generator"))
    render_heatmap(disc, x_range, y_range, resolution, out)
    return 0


def cmd_w1(cfg, seed, out):
    mu_path, nu_path = cfg.get("mu"), cfg.get("nu")
    if not mu_path or not nu_path:
        raise ValueError("w1 needs two point-cloud CSV files (--mu/--nu or 'mu'/'nu' in the config)")
    method = cfg.get("method", "auto")
    _write_config(out, {"mu": mu_path, "nu": nu_path, "method": method, "seed": seed})
    res = wasserstein1_exact(read_cloud_csv(mu_path), read_cloud_csv(nu_path), method)
    _write_rows(os.path.join(out, "w1.csv"), ["cost", "total", "method", "certified"],
                [[_g(res.cost), res.total, res.method, int(res.certified)]])
    _write_rows(os.path.join(out, "plan.csv"), ["source", "target", "flow"], res.plan)
    print(_g(res.cost))
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "equiv": cmd_equiv,
    "sweep": cmd_sweep,
    "heatmap": cmd_heatmap,
    "w1": cmd_w1,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="lipwgan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file (defaults are used for missing keys)")
        p.add_argument("--seed", type=int, default=0, help="root seed (unsigned 64-bit)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "w1":
            p.add_argument("--mu", help="first point cloud CSV")
            p.add_argument("--nu", help="second point cloud CSV")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    cfg = {}
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
    if args.command == "w1":
        cfg = {**cfg, **{k: v for k, v in (("mu", args.mu), ("nu", args.nu)) if v}}
    os.makedirs(args.out, exist_ok=True)
    try:
        return COMMANDS[args.command](cfg, args.seed, args.out)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
