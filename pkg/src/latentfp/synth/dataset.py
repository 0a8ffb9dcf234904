"""Synthetic identity datasets written as PGM files plus a JSON-lines manifest."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..imagekit import adaptive_binarize, load_pgm, save_pgm
from .degrade import DegradeParams, aligned_target, degrade, procedural_background
from .master import random_singularities, synth_master

MANIFEST_NAME = "manifest.jsonl"
N_BACKGROUNDS = 8


@dataclass
class SynthConfig:
    width: int = 80
    height: int = 64
    ridge_period_range: tuple[float, float] = (8.0, 12.0)
    iterations: int = 6
    binarize_block: int = 17
    binarize_offset: float = 0.02


def derive_seed(*keys: int) -> int:
    """Independent 63-bit seed for a tuple of integer keys."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def make_identity(seed: int, identity: int, cfg: SynthConfig = SynthConfig()):
    """Master print, binarized target and generation parameters for one identity."""
    id_seed = derive_seed(seed, identity)
    rng = np.random.default_rng(id_seed)
    sing = random_singularities(rng, cfg.width, cfg.height)
    period = float(rng.uniform(*cfg.ridge_period_range))
    master = synth_master(id_seed, sing, period, cfg.iterations, cfg.width, cfg.height)
    target = adaptive_binarize(master, cfg.binarize_block, cfg.binarize_offset)
    gen = {"identity_seed": id_seed, "ridge_period": period, "singularities": sing.to_dict()}
    return master, target, gen


def background_bank(seed: int, cfg: SynthConfig, count: int = N_BACKGROUNDS) -> list[np.ndarray]:
    return [procedural_background(np.random.default_rng(derive_seed(seed, 10**9, k)), cfg.width, cfg.height)
            for k in range(count)]


def make_dataset(n_identities: int, impressions_per_identity: int, out_dir: str | os.PathLike, seed: int,
                 cfg: SynthConfig = SynthConfig(), degrade_params: DegradeParams = DegradeParams()) -> list[dict]:
    """Write masters, targets and latents under ``out_dir`` and return the manifest records.

    One manifest line per latent: ``{id, master, target, latent, seed, params}``
    with paths relative to ``out_dir``.
    """
    if n_identities < 1 or impressions_per_identity < 1:
        raise ValueError("n_identities and impressions_per_identity must be >= 1")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"cannot write dataset directory {out}: {exc.strerror or exc}") from exc

    bgs = background_bank(seed, cfg)
    records = []
    for i in range(n_identities):
        master, target, gen = make_identity(seed, i, cfg)
        mname, tname = f"id{i:05d}_master.pgm", f"id{i:05d}_target.pgm"
        save_pgm(out / mname, master)
        save_pgm(out / tname, target)
        for k in range(impressions_per_identity):
            lseed = derive_seed(seed, i, k + 1)
            latent, drawn = degrade(master, degrade_params, bgs, lseed)
            lname = f"id{i:05d}_latent{k:02d}.pgm"
            save_pgm(out / lname, latent)
            records.append({"id": i, "master": mname, "target": tname, "latent": lname,
                            "seed": lseed, "params": {"degrade": drawn, **gen}})
    write_manifest(out / MANIFEST_NAME, records)
    return records


def write_manifest(path: str | os.PathLike, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_manifest(path: str | os.PathLike) -> list[dict]:
    """Load manifest records with image paths resolved against the manifest's directory."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    base = path.parent
    records = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            missing = {"id", "master", "target", "latent", "seed", "params"} - set(rec)
            if missing:
                raise ValueError(f"{path}:{n}: record lacks {sorted(missing)}")
            for key in ("master", "target", "latent"):
                rec[key] = str(base / rec[key])
            records.append(rec)
    return records


def load_training_pairs(records: list[dict]):
    """Stack ``(latent, geometry-aligned target)`` pairs from manifest records."""
    latents, targets = [], []
    for rec in records:
        latents.append(load_pgm(rec["latent"]))
        targets.append(aligned_target(load_pgm(rec["target"]), rec["params"]["degrade"]))
    return np.stack(latents), np.stack(targets)
