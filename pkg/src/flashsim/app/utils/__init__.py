"""
Utilities module for FlashSim
"""

from .logger import setup_logging
from .helpers import (
    format_duration, format_sig, round_sig, parse_float_list,
    parse_profile, format_profile, frame_rng, write_csv,
    create_output_filename
)

__all__ = [
    'setup_logging',
    'format_duration',
    'format_sig',
    'round_sig',
    'parse_float_list',
    'parse_profile',
    'format_profile',
    'frame_rng',
    'write_csv',
    'create_output_filename'
]
