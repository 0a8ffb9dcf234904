import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import ndimage

from _oracles import brute_cmc
from latentfp.energy import fold_angle, orientation_field, structure_tensor
from latentfp.evalkit import (
    BIFURCATION,
    ENDING,
    LabelError,
    Minutia,
    ScoreMatrix,
    cmc_curve,
    cmc_from_csv,
    cmc_to_csv,
    crossing_number,
    extract_minutiae,
    match_score,
    minutiae_from_csv,
    minutiae_to_csv,
    rank_summary,
    score_matrix,
    thin,
)

EIGHT = np.ones((3, 3), dtype=int)


def orientation_of(img):
    return orientation_field(structure_tensor(img))


def y_shape():
    img = np.zeros((40, 40))
    img[20:34, 20] = 1  # stem going down
    for k in range(1, 12):
        img[20 - k, 20 - k] = 1  # arm up-left
        img[20 - k, 20 + k] = 1  # arm up-right
    return img


# -- thinning -------------------------------------------------------------------

def test_thin_line_unchanged():
    img = np.zeros((10, 20))
    img[5, 3:17] = 1
    np.testing.assert_array_equal(thin(img), img)


def test_thin_solid_block():
    img = np.zeros((9, 9))
    img[2:7, 2:7] = 1
    sk = thin(img)
    assert 1 <= sk.sum() <= 5
    assert np.all(sk <= img)


def test_thin_rejects_gray():
    with pytest.raises(ValueError):
        thin(np.full((4, 4), 0.5))


@settings(max_examples=40, deadline=None)
@given(arrays(np.uint8, (14, 14), elements=st.integers(0, 1)))
def test_thin_subset_idempotent_connected(img):
    img = ndimage.binary_closing(img, EIGHT).astype(float)
    sk = thin(img)
    assert np.all(sk <= img)
    np.testing.assert_array_equal(thin(sk), sk)
    assert ndimage.label(sk, EIGHT)[1] == ndimage.label(img, EIGHT)[1]


def test_crossing_number_values():
    img = np.zeros((5, 7))
    img[2, 1:6] = 1
    cn = crossing_number(img)
    assert cn[2, 1] == 1 and cn[2, 3] == 2 and cn[2, 5] == 1
    assert crossing_number(y_shape())[20, 20] == 3


# -- extraction -----------------------------------------------------------------

def test_straight_line_two_endings():
    img = np.zeros((30, 40))
    img[15, 10:30] = 1
    ms = extract_minutiae(img, orientation_of(img))
    assert len(ms) == 2 and all(m.kind == ENDING for m in ms)
    assert {(m.x, m.y) for m in ms} == {(10, 15), (29, 15)}
    for m in ms:
        assert abs(fold_angle(m.direction)) < math.radians(5)


def test_y_junction_one_bifurcation():
    img = y_shape()
    ms = extract_minutiae(img, orientation_of(img))
    bif = [m for m in ms if m.kind == BIFURCATION]
    assert len(bif) == 1 and (bif[0].x, bif[0].y) == (20, 20)
    assert sum(m.kind == ENDING for m in ms) == 3


def test_border_margin_and_separation():
    img = np.zeros((30, 40))
    img[15, 2:30] = 1
    ms = extract_minutiae(img, orientation_of(img), border_margin=6)
    assert [(m.x, m.y) for m in ms] == [(29, 15)]
    short = np.zeros((30, 40))
    short[15, 18:22] = 1  # both ends closer than min_separation: spur, both dropped
    assert extract_minutiae(short, orientation_of(short), min_separation=6) == []


def test_mask_excludes_points():
    img = np.zeros((30, 40))
    img[15, 10:30] = 1
    mask = np.zeros((30, 40))
    mask[:, 20:] = 1
    ms = extract_minutiae(img, orientation_of(img), border_margin=2, mask=mask)
    assert [(m.x, m.y) for m in ms] == [(29, 15)]


def test_minutiae_csv_round_trip():
    ms = [Minutia(3, 4, ENDING, 0.25), Minutia(10, 1, BIFURCATION, -1.0)]
    text = minutiae_to_csv(ms)
    assert text.splitlines()[0] == "x,y,kind,direction_rad"
    assert minutiae_from_csv(text) == ms


# -- matching -------------------------------------------------------------------

def random_minutiae(seed, n=20, span=150):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        x, y = (int(v) for v in rng.integers(10, span, 2))
        if all(math.hypot(x - m.x, y - m.y) > 20 for m in out):
            out.append(Minutia(x, y, str(rng.choice([ENDING, BIFURCATION])), float(rng.uniform(-1.5, 1.5))))
    return out


def moved(ms, dx, dy, quarter_turns=0):
    out = []
    for m in ms:
        x, y, d = m.x, m.y, m.direction
        for _ in range(quarter_turns):
            x, y, d = -y, x, fold_angle(d + np.pi / 2)
        out.append(Minutia(x + dx, y + dy, m.kind, float(d)))
    return out


def test_self_match_and_empty():
    a = random_minutiae(0)
    assert match_score(a, a) == 1.0
    assert match_score(a, []) == 0.0 and match_score([], a) == 0.0


def test_translation_recovered():
    a = random_minutiae(1)
    assert match_score(a, moved(a, 7, -4)) >= 0.8


def test_rotation_recovered():
    a = random_minutiae(2)
    assert match_score(a, moved(a, 200, 0, quarter_turns=1)) >= 0.8


def test_type_mismatch_is_not_a_match():
    a = [Minutia(50, 50, ENDING, 0.0), Minutia(90, 60, ENDING, 0.5)]
    b = [Minutia(m.x, m.y, BIFURCATION, m.direction) for m in a]
    assert match_score(a, b) == 0.0


@pytest.mark.parametrize("dx, dy", [(8, 16), (-24, 8), (0, 0)])
def test_match_symmetric_on_grid(dx, dy):
    a = random_minutiae(3)
    b = moved(random_minutiae(3, n=14), dx, dy) + random_minutiae(4, n=6)
    assert match_score(a, b) == match_score(b, a)


def test_match_invariant_to_common_transform():
    a, b = random_minutiae(5), moved(random_minutiae(5, n=12), 5, 3) + random_minutiae(6, n=5)
    base = match_score(a, b)
    assert match_score(moved(a, 16, -8), moved(b, 16, -8)) == base
    assert match_score(moved(a, 0, 0, 1), moved(b, 0, 0, 1)) == base


def test_score_matrix_shape():
    a, b = random_minutiae(7, 5), random_minutiae(8, 6)
    m = score_matrix([a, b, []], [a, b])
    assert m.shape == (3, 2) and m[0, 0] == 1.0 and m[2, 0] == 0.0


# -- CMC ------------------------------------------------------------------------

def test_cmc_diagonal():
    rng = np.random.default_rng(0)
    s = rng.random((5, 5)) + 2 * np.eye(5)
    curve, ranks = cmc_curve(ScoreMatrix(s, list(range(5)), list(range(5))))
    assert curve[0] == 1.0 and np.all(ranks == 1)


def test_cmc_hand_built():
    s = np.array([[0.9, 0.1, 0.2],
                  [0.8, 0.5, 0.1],
                  [0.3, 0.4, 0.2]])
    curve, ranks = cmc_curve(ScoreMatrix(s, [0, 1, 2], [0, 1, 2]))
    np.testing.assert_array_equal(ranks, [1, 2, 3])
    np.testing.assert_allclose(curve, [1 / 3, 2 / 3, 1])


def test_cmc_pessimistic_ties():
    s = np.array([[0.5, 0.5, 0.5]])
    _, ranks = cmc_curve(ScoreMatrix(s, [1], [0, 1, 2]))
    assert ranks[0] == 3


def test_cmc_matches_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(100):
        s = rng.integers(0, 4, (10, 10)) / 4.0  # coarse values force ties
        labels = list(range(10))
        gallery = list(rng.permutation(10))
        curve, ranks = cmc_curve(ScoreMatrix(s, labels, gallery))
        ref_curve, ref_ranks = brute_cmc(s, labels, gallery)
        np.testing.assert_array_equal(ranks, ref_ranks)
        np.testing.assert_array_equal(curve, ref_curve)
        assert np.all(np.diff(curve) >= 0) and curve[-1] == 1.0


def test_cmc_missing_label():
    with pytest.raises(LabelError, match="7"):
        cmc_curve(ScoreMatrix(np.zeros((1, 2)), [7], [0, 1]))


def test_score_matrix_validation():
    with pytest.raises(ValueError):
        ScoreMatrix(np.zeros((2, 2)), [0], [0, 1])
    with pytest.raises(ValueError):
        ScoreMatrix(np.array([[np.nan]]), [0], [0])


def test_csv_round_trips():
    sm = ScoreMatrix(np.array([[0.25, 1 / 3], [0.0, 1.0]]), [0, 1], [1, 0])
    back = ScoreMatrix.from_csv(sm.to_csv())
    np.testing.assert_array_equal(back.scores, sm.scores)
    assert back.gallery_labels == [1, 0]
    curve = np.array([0.5, 0.75, 1.0])
    text = cmc_to_csv(curve)
    assert text.startswith("rank,accuracy\n1,0.5\n")
    np.testing.assert_array_equal(cmc_from_csv(text), curve)
    assert rank_summary(curve, (1, 2, 50)) == {1: 0.5, 2: 0.75, 50: 1.0}
