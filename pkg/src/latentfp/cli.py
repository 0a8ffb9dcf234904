"""Command-line interface: ``latentfp <subcommand> [options]``.

Every subcommand accepts ``--config FILE`` (a flat JSON object whose keys are
the subcommand's option names with underscores) and ``--out DIR``. Options
are resolved as defaults < config file < explicit flags, and the effective
settings are written to ``DIR/resolved-config.json``. Unknown config keys
are rejected.

Exit status: 0 on success, 1 on runtime failure, 2 on usage or config
errors. Failures print a single ``error: <kind>: <message>`` line to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .energy import CSV_HEADER, EnergyParams, total_energy
from .evalkit import (
    ScoreMatrix,
    cmc_curve,
    cmc_to_csv,
    minutiae_from_binary,
    minutiae_from_gray,
    minutiae_from_reconstruction,
    rank_summary,
    score_matrix,
)
from .experiment import E2EConfig, gallery_minutiae, run_e2e
from .imagekit import load_pgm, save_pgm
from .nn import (
    Checkpoint,
    TrainConfig,
    TrainingSet,
    build_cae,
    load_checkpoint,
    reconstruct,
    save_checkpoint,
    train,
    write_loss_csv,
)
from .synth import DegradeParams, SynthConfig, degrade, load_training_pairs, make_dataset, read_manifest, write_manifest
from .synth.degrade import procedural_background

log = logging.getLogger("latentfp")


class UsageError(Exception):
    """Bad configuration; reported with exit status 2."""


# option name -> (default, argparse kwargs); shared blocks are merged per subcommand
COMMON = {
    "seed": (0, dict(type=int, help="global RNG seed")),
    "threads": (None, dict(type=int, help="cap on numeric worker threads")),
}
DEGRADE = {f.name: (f.default, {}) for f in fields(DegradeParams)}
DEGRADE_ARGS = {
    "rotation_range": dict(type=float, nargs=2, metavar=("LO", "HI"), help="rotation in degrees"),
    "translation_range": dict(type=float, nargs=2, metavar=("LO", "HI"),
                              help="translation in pixels (default: +-10%% of width/height)"),
    "blur_length_range": dict(type=int, nargs=2, metavar=("LO", "HI"), help="motion blur length in pixels"),
    "blur_angle_range": dict(type=float, nargs=2, metavar=("LO", "HI"), help="motion blur angle in degrees"),
    "dilation_radii": dict(type=int, nargs="+", help="candidate ink-spread radii"),
    "alpha_range": dict(type=float, nargs=2, metavar=("LO", "HI"), help="background blend weight"),
    "occlusion_count_range": dict(type=int, nargs=2, metavar=("LO", "HI"), help="occluding patches per latent"),
    "occlusion_area_range": dict(type=float, nargs=2, metavar=("LO", "HI"), help="patch area as image fraction"),
    "noise_sigma": dict(type=float, help="additive noise std"),
}
DEGRADE = {k: (v[0], DEGRADE_ARGS[k]) for k, v in DEGRADE.items()}
IMAGE = {
    "width": (80, dict(type=int, help="image width")),
    "height": (64, dict(type=int, help="image height")),
}
TRAIN = {
    "learning_rate": (2e-4, dict(type=float)),
    "beta1": (0.5, dict(type=float)),
    "beta2": (0.999, dict(type=float)),
    "adam_epsilon": (1e-8, dict(type=float)),
    "weight_decay_mu": (1e-4, dict(type=float)),
    "batch_size": (12, dict(type=int)),
    "epochs": (400, dict(type=int)),
    "iterations_per_epoch": (64, dict(type=int)),
    "lam": (0.1, dict(type=float, help="weight of the orientation and reliability terms")),
    "noise_sigma": (3.5e-3, dict(type=float, help="input noise std during training")),
}
MODEL = {
    "stages": (4, dict(type=int)),
    "bottleneck_channels": (128, dict(type=int)),
}
ENERGY = {
    "lam": (0.1, dict(type=float)),
    "sigma_s": (3.0, dict(type=float)),
    "sigma_o": (3.0, dict(type=float)),
    "epsilon_r": (1e-8, dict(type=float)),
    "imin_variant": ("classical", dict(choices=["classical", "printed"])),
    "no_wrap": (False, dict(action="store_true", help="use the raw (unwrapped) angle difference")),
}

def _flag_kwargs(default) -> dict:
    if isinstance(default, bool):
        return dict(action=argparse.BooleanOptionalAction)
    return dict(type=type(default))


COMMANDS = {
    "synth": ("synthesize a dataset of masters, targets and latents", {
        "n_identities": (10, dict(type=int)),
        "impressions": (1, dict(type=int, help="latents per identity")),
        **IMAGE, **DEGRADE,
    }),
    "degrade": ("preview one degradation of an image", {
        "input": (None, dict(help="master PGM")),
        **DEGRADE,
    }),
    "train": ("train the autoencoder on a dataset manifest", {
        "manifest": (None, dict(help="dataset directory or manifest.jsonl")),
        "resume": (None, dict(help="checkpoint to continue from")),
        "checkpoint_every": (64, dict(type=int, help="iterations between checkpoints (0: only at the end)")),
        **TRAIN, **MODEL,
    }),
    "enhance": ("reconstruct ridge maps for one image or a manifest", {
        "checkpoint": (None, dict(help="trained model checkpoint")),
        "input": (None, dict(help="PGM image, dataset directory or manifest.jsonl")),
    }),
    "energy": ("report ridge energies for a target/reconstruction pair", {
        "target": (None, dict(help="target PGM")),
        "recon": (None, dict(help="reconstruction PGM")),
        **ENERGY,
    }),
    "match": ("score probes from one manifest against the identities of another", {
        "probes": (None, dict(help="probe manifest")),
        "gallery": (None, dict(help="gallery manifest (targets are used)")),
        "probe_field": ("latent", dict(choices=["latent", "master", "target", "enhanced"])),
    }),
    "cmc": ("CMC curve and rank summary from a score matrix CSV", {
        "scores": (None, dict(help="score matrix CSV from `match`")),
    }),
    "e2e": ("full raw-vs-enhanced identification experiment", {
        **{f.name: (f.default, _flag_kwargs(f.default)) for f in fields(E2EConfig) if f.name != "seed"},
        **DEGRADE,
    }),
}
REQUIRED = {"degrade": ["input"], "train": ["manifest"], "enhance": ["checkpoint", "input"],
            "energy": ["target", "recon"], "match": ["probes", "gallery"], "cmc": ["scores"]}


def options(cmd: str) -> dict:
    return {**COMMON, **COMMANDS[cmd][1]}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latentfp", description="Latent fingerprint ridge reconstruction toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (help_text, _) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="JSON file of option values", default=argparse.SUPPRESS)
        p.add_argument("--out", help=f"output directory (default: out/{name})", default=argparse.SUPPRESS)
        p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
        for opt, (default, kw) in options(name).items():
            kw = dict(kw)
            if "help" in kw and default not in (None, False):
                kw["help"] += f" (default: {default})"
            p.add_argument("--" + opt.replace("_", "-"), dest=opt, default=argparse.SUPPRESS, **kw)
    return parser


def resolve(cmd: str, explicit: dict, config: dict) -> dict:
    known = options(cmd)
    unknown = sorted(set(config) - set(known))
    if unknown:
        raise UsageError(f"unknown config keys for {cmd}: {', '.join(unknown)}")
    merged = {k: d for k, (d, _) in known.items()}
    merged.update(config)
    merged.update({k: v for k, v in explicit.items() if k in known})
    missing = [k for k in REQUIRED.get(cmd, []) if merged.get(k) is None]
    if missing:
        raise UsageError(f"{cmd} needs " + ", ".join("--" + m.replace("_", "-") for m in missing))
    return merged


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return data


def _jsonable(v):
    if isinstance(v, tuple):
        return list(v)
    return v


def degrade_params(cfg: dict) -> DegradeParams:
    try:
        return DegradeParams.from_dict({k: cfg[k] for k in DEGRADE})
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


# -- subcommands -------------------------------------------------------------------

def cmd_synth(cfg: dict, out: Path) -> None:
    sc = SynthConfig(width=cfg["width"], height=cfg["height"])
    recs = make_dataset(cfg["n_identities"], cfg["impressions"], out, cfg["seed"], sc, degrade_params(cfg))
    print(f"wrote {len(recs)} records to {out / 'manifest.jsonl'}")


def cmd_degrade(cfg: dict, out: Path) -> None:
    master = load_pgm(cfg["input"])
    h, w = master.shape
    bgs = [procedural_background(np.random.default_rng([cfg["seed"], k]), w, h) for k in range(4)]
    latent, drawn = degrade(master, degrade_params(cfg), bgs, cfg["seed"])
    save_pgm(out / "latent.pgm", latent)
    (out / "drawn.json").write_text(json.dumps(drawn, indent=2, sort_keys=True) + "\n")
    print(out / "latent.pgm")


def cmd_train(cfg: dict, out: Path) -> None:
    latents, targets = load_training_pairs(read_manifest(cfg["manifest"]))
    tc = TrainConfig(**{k: cfg[k] for k in TRAIN}, rng_seed=cfg["seed"])
    resume = load_checkpoint(cfg["resume"]) if cfg["resume"] else None
    if resume is not None:
        model = resume.model
    else:
        h, w = latents.shape[1:]
        model = build_cae((1, h, w), cfg["stages"], cfg["bottleneck_channels"], seed=cfg["seed"])
    ckpt = out / "model.ckpt"
    result = train(model, TrainingSet(latents, targets), tc, resume=resume,
                   checkpoint_path=ckpt, checkpoint_every=cfg["checkpoint_every"])
    rows = result.loss_log
    if resume is not None and (out / "loss.csv").exists():
        # continue the existing log rather than truncating it
        with open(out / "loss.csv", "a", encoding="utf-8") as fh:
            fh.writelines(f"{i},{a!r},{b!r},{c!r},{d!r}\n" for i, a, b, c, d in rows)
    else:
        write_loss_csv(out / "loss.csv", rows)
    final = rows[-1][4] if rows else float("nan")
    print(f"trained to iteration {result.iteration}; final e_total {final:.6g}; checkpoint {ckpt}")


def cmd_enhance(cfg: dict, out: Path) -> None:
    model = load_checkpoint(cfg["checkpoint"]).model
    src = Path(cfg["input"])
    if src.suffix.lower() == ".pgm":
        dest = out / f"{src.stem}_enhanced.pgm"
        save_pgm(dest, reconstruct(model, load_pgm(src)))
        print(dest)
        return
    records = read_manifest(src)
    for rec in records:
        dest = out / f"{Path(rec['latent']).stem}_enhanced.pgm"
        save_pgm(dest, reconstruct(model, load_pgm(rec["latent"])))
        rec["enhanced"] = dest.name
        for key in ("master", "target", "latent"):
            rec[key] = str(Path(rec[key]).resolve())
    write_manifest(out / "manifest.jsonl", records)
    print(f"enhanced {len(records)} latents; manifest {out / 'manifest.jsonl'}")


def cmd_energy(cfg: dict, out: Path) -> None:
    params = EnergyParams(sigma_s=cfg["sigma_s"], sigma_o=cfg["sigma_o"], lam=cfg["lam"],
                          epsilon_r=cfg["epsilon_r"], wrap_orientation=not cfg["no_wrap"],
                          imin_variant=cfg["imin_variant"])
    rep = total_energy(load_pgm(cfg["target"]), load_pgm(cfg["recon"]), params)
    text = f"{CSV_HEADER}\n{rep.csv_row()}\n"
    (out / "energy.csv").write_text(text)
    sys.stdout.write(text)


def _probe_minutiae(rec: dict, field: str):
    img = load_pgm(rec[field])
    if field in ("latent", "master"):
        return minutiae_from_gray(img)
    if field == "target":
        return minutiae_from_binary(img, img)
    return minutiae_from_reconstruction(img)


def cmd_match(cfg: dict, out: Path) -> None:
    probes = read_manifest(cfg["probes"])
    field = cfg["probe_field"]
    if field == "enhanced":
        base = Path(cfg["probes"])
        base = base if base.is_dir() else base.parent
        for rec in probes:
            if "enhanced" not in rec:
                raise ValueError("probe manifest has no 'enhanced' entries; run `enhance` on it first")
            rec["enhanced"] = str(base / rec["enhanced"])
    gal_labels, gallery = gallery_minutiae(read_manifest(cfg["gallery"]))
    sm = ScoreMatrix(score_matrix([_probe_minutiae(r, field) for r in probes], gallery),
                     [r["id"] for r in probes], gal_labels)
    (out / "scores.csv").write_text(sm.to_csv())
    print(out / "scores.csv")


def cmd_cmc(cfg: dict, out: Path) -> None:
    sm = ScoreMatrix.from_csv(Path(cfg["scores"]).read_text())
    curve, _ = cmc_curve(sm)
    (out / "cmc.csv").write_text(cmc_to_csv(curve))
    for k, v in rank_summary(curve).items():
        print(f"rank-{k},{v:.4f}")


def cmd_e2e(cfg: dict, out: Path) -> None:
    e2e = E2EConfig(**{f.name: cfg[f.name] for f in fields(E2EConfig)})
    s = run_e2e(e2e, out, degrade_params(cfg))
    print(f"rank-1 raw {s['rank1_raw']:.4f} enhanced {s['rank1_enhanced']:.4f}; "
          f"mean energy raw {s['mean_energy_raw']:.5f} enhanced {s['mean_energy_enhanced']:.5f}; "
          f"{s['seconds']}s")


HANDLERS = {"synth": cmd_synth, "degrade": cmd_degrade, "train": cmd_train, "enhance": cmd_enhance,
            "energy": cmd_energy, "match": cmd_match, "cmc": cmd_cmc, "e2e": cmd_e2e}


def _fail(kind: str, exc: BaseException, code: int) -> int:
    msg = " ".join(str(exc).split()) or type(exc).__name__
    print(f"error: {kind}: {msg}", file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = vars(parser.parse_args(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    cmd = ns.pop("command")
    logging.basicConfig(level=logging.INFO if ns.pop("verbose", False) else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        config = load_config(ns.pop("config")) if "config" in ns else {}
        out = Path(ns.pop("out", config.pop("out", f"out/{cmd}")))
        cfg = resolve(cmd, ns, config)
    except UsageError as exc:
        return _fail("usage", exc, 2)

    try:
        out.mkdir(parents=True, exist_ok=True)
        resolved = {"command": cmd, "out": str(out), **{k: _jsonable(v) for k, v in cfg.items()}}
        (out / "resolved-config.json").write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n")
        if cfg["threads"]:
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=cfg["threads"]):
                HANDLERS[cmd](cfg, out)
        else:
            HANDLERS[cmd](cfg, out)
    except UsageError as exc:
        return _fail("usage", exc, 2)
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        return _fail(type(exc).__name__, exc, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
