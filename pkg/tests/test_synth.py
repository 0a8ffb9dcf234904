import json
import os

import numpy as np
import pytest

from latentfp.energy import e_grad, fold_angle, orientation_field, reliability_field, structure_tensor
from latentfp.imagekit import load_pgm
from latentfp.synth import (
    DegradeParams,
    SingularityModel,
    SynthConfig,
    aligned_target,
    background_bank,
    degrade,
    make_dataset,
    make_identity,
    orientation_model,
    procedural_background,
    read_manifest,
    synth_master,
)
from latentfp.synth.master import vignette


def winding(theta_fn, cx, cy, radius=6.0, steps=720):
    """Total turn of a pi-periodic field along a circle (counter-clockwise in image coords)."""
    t = np.linspace(0, 2 * np.pi, steps + 1)
    vals = np.array([theta_fn(cx + radius * np.cos(a), cy + radius * np.sin(a)) for a in t])
    return float(fold_angle(np.diff(vals)).sum())


def field_sampler(model, w, h):
    field = orientation_model(model, w, h)
    return lambda x, y: field[int(round(y)), int(round(x))]


def test_no_singularities_uniform():
    assert not orientation_model(SingularityModel(), 40, 30).any()
    np.testing.assert_allclose(orientation_model(SingularityModel(base=0.4), 40, 30), 0.4)


@pytest.mark.parametrize("loops, deltas, expected", [([(20, 15)], [], np.pi), ([], [(20, 15)], -np.pi)])
def test_singularity_winding(loops, deltas, expected):
    f = field_sampler(SingularityModel(loops, deltas), 41, 31)
    assert winding(f, 20, 15) == pytest.approx(expected, abs=1e-9)


def test_singular_point_takes_base():
    f = orientation_model(SingularityModel([(10, 10)], [], 0.25), 21, 21)
    assert f[10, 10] == pytest.approx(0.25)


def test_model_validation():
    with pytest.raises(ValueError):
        orientation_model(SingularityModel([(50, 5)]), 40, 30)
    with pytest.raises(ValueError):
        orientation_model(SingularityModel([(1, 1)] * 3), 40, 30)


def test_master_deterministic_and_in_range():
    m = SingularityModel([(40, 25)], [(55, 50)], 0.1)
    a = synth_master(7, m, 10)
    assert np.array_equal(a, synth_master(7, m, 10))
    assert a.shape == (64, 80) and a.min() >= 0 and a.max() <= 1
    assert not np.array_equal(a, synth_master(8, m, 10))


@pytest.mark.parametrize("period", [8.0, 10.0, 12.0])
def test_master_dominant_frequency(period):
    img = synth_master(3, SingularityModel(), period, width=128, height=128)
    rows = img[40:88] - img[40:88].mean(axis=1, keepdims=True)
    spec = np.abs(np.fft.rfft(rows, axis=1)).mean(axis=0)
    k = int(np.argmax(spec[1:])) + 1
    assert abs(128 / k - period) <= 0.2 * period


def test_master_orientation_self_consistent():
    inner = vignette(80, 64) > 0.99
    for i in range(10):
        master, _, gen = make_identity(11, i)
        s = gen["singularities"]
        model = SingularityModel([tuple(p) for p in s["loops"]], [tuple(p) for p in s["deltas"]], s["base"])
        tensor = structure_tensor(master)
        sel = (reliability_field(tensor) > 0.5) & inner
        err = np.degrees(np.abs(fold_angle(orientation_field(tensor) - orientation_model(model, 80, 64))))
        assert np.median(err[sel]) <= 10.0


def test_master_rejects_bad_args():
    with pytest.raises(ValueError):
        synth_master(0, SingularityModel(), ridge_period=3)
    with pytest.raises(ValueError):
        synth_master(0, SingularityModel(), iterations=0)


def test_targets_binary_with_sane_ridge_fraction():
    for i in range(10):
        _, target, _ = make_identity(2, i)
        assert set(np.unique(target)) <= {0.0, 1.0}
        assert 0.2 <= target.mean() <= 0.7


# -- degradation ------------------------------------------------------------------

def test_identity_degradation():
    master, _, _ = make_identity(0, 0)
    latent, drawn = degrade(master, DegradeParams.identity(), [np.full((64, 80), 0.5)], seed=3)
    np.testing.assert_array_equal(latent, master)
    assert drawn["occlusions"] == [] and drawn["alpha"] == 0.0


def test_degrade_deterministic():
    master, _, _ = make_identity(0, 1)
    bgs = background_bank(0, SynthConfig())
    a, da = degrade(master, DegradeParams(), bgs, seed=9)
    b, db = degrade(master, DegradeParams(), bgs, seed=9)
    assert np.array_equal(a, b) and da == db
    assert a.shape == master.shape and a.min() >= 0 and a.max() <= 1
    json.dumps(da)  # drawn parameters are manifest-serializable


def test_degrade_procedural_fallback():
    master, _, _ = make_identity(0, 2)
    latent, _ = degrade(master, DegradeParams(), [], seed=1)
    assert latent.shape == master.shape


def test_degradation_raises_gradient_energy():
    bgs = background_bank(4, SynthConfig())
    for i in range(20):
        master, target, _ = make_identity(4, i)
        latent, _ = degrade(master, DegradeParams(), bgs, seed=100 + i)
        # compare in the target's polarity (ridge = 1)
        assert e_grad(target, 1 - latent)[0] > e_grad(target, 1 - master)[0]


def test_aligned_target_follows_geometry():
    _, target, _ = make_identity(0, 3)
    drawn = {"rotation": 0.0, "translation": [4.0, 0.0]}
    moved = aligned_target(target, drawn)
    np.testing.assert_array_equal(moved[:, 4:], target[:, :-4])
    assert set(np.unique(aligned_target(target, {"rotation": 12.0, "translation": [1.5, -2.0]}))) <= {0.0, 1.0}


def test_degrade_params_validation():
    with pytest.raises(ValueError):
        DegradeParams(rotation_range=(5.0, -5.0))
    with pytest.raises(ValueError):
        DegradeParams(alpha_range=(0.5, 1.5))
    with pytest.raises(ValueError):
        DegradeParams.from_dict({"rotation": (0, 1)})
    assert DegradeParams.from_dict({"alpha_range": [0.1, 0.2]}).alpha_range == (0.1, 0.2)


def test_background_in_range():
    bg = procedural_background(np.random.default_rng(0), 80, 64)
    assert bg.shape == (64, 80) and bg.min() >= 0 and bg.max() <= 1 and bg.std() > 0.01


# -- datasets ---------------------------------------------------------------------

def test_dataset_counting(tmp_path):
    recs = make_dataset(2, 3, tmp_path, seed=1)
    assert len(recs) == 6
    assert {r["id"] for r in recs} == {0, 1}
    assert len({r["target"] for r in recs}) == 2
    lines = (tmp_path / "manifest.jsonl").read_text().splitlines()
    assert len(lines) == 6
    assert set(json.loads(lines[0])) == {"id", "master", "target", "latent", "seed", "params"}


def test_dataset_deterministic(tmp_path):
    make_dataset(2, 2, tmp_path / "a", seed=5)
    make_dataset(2, 2, tmp_path / "b", seed=5)
    names = sorted(os.listdir(tmp_path / "a"))
    assert names == sorted(os.listdir(tmp_path / "b"))
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()


def test_manifest_paths_round_trip(tmp_path):
    make_dataset(2, 2, tmp_path, seed=6)
    for rec in read_manifest(tmp_path):
        for key in ("master", "target", "latent"):
            img = load_pgm(rec[key])
            assert img.shape == (64, 80)
        assert set(np.unique(load_pgm(rec["target"]))) <= {0.0, 1.0}


def test_unwritable_directory_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        make_dataset(1, 1, blocker / "sub", seed=0)


def test_dataset_rejects_zero_identities(tmp_path):
    with pytest.raises(ValueError):
        make_dataset(0, 1, tmp_path, seed=0)
