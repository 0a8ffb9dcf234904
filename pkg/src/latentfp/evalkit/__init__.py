"""Identification harness: thinning, minutiae, matching and CMC curves."""
from .cmc import LabelError, ScoreMatrix, cmc_curve, cmc_from_csv, cmc_to_csv, probe_ranks, rank_summary
from .matcher import MatchParams, match_score, score_matrix
from .minutiae import (
    BIFURCATION,
    ENDING,
    Minutia,
    crossing_number,
    extract_minutiae,
    foreground_mask,
    minutiae_from_binary,
    minutiae_from_csv,
    minutiae_from_gray,
    minutiae_from_reconstruction,
    minutiae_to_csv,
    thin,
)

__all__ = [
    "LabelError", "ScoreMatrix", "cmc_curve", "cmc_from_csv", "cmc_to_csv", "probe_ranks", "rank_summary",
    "MatchParams", "match_score", "score_matrix",
    "BIFURCATION", "ENDING", "Minutia", "crossing_number", "extract_minutiae", "foreground_mask",
    "minutiae_from_binary", "minutiae_from_csv", "minutiae_from_gray",
    "minutiae_from_reconstruction", "minutiae_to_csv", "thin",
]
