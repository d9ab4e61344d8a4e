from .mcd import McdReport, align_lengths, mcd, waveform_mcd, waveform_to_melcepstra
from .mushra import MushraRating, load_scores, pairwise_tests, summarize, write_pairwise, write_summary
from .ranksum import RanksumResult, ranksum_test

__all__ = [
    "mcd",
    "align_lengths",
    "waveform_to_melcepstra",
    "waveform_mcd",
    "McdReport",
    "ranksum_test",
    "RanksumResult",
    "MushraRating",
    "load_scores",
    "summarize",
    "pairwise_tests",
    "write_summary",
    "write_pairwise",
]
