"""Unsourced random access over quasi-static Rayleigh-fading massive MIMO.

Encoder (random pilots + spreading + CRC/polar coset coding), channel model,
iterative receiver with energy detection, MMSE estimation, channel
re-estimation from temporary decisions, list decoding and SIC, plus a Monte
Carlo harness.
"""

from .channel import ChannelRealization, Observation, draw_channel, sigma2_from_ebn0, transmit
from .codebook import Codebook, generate_codebook, load_codebook, phi, phi_inverse, save_codebook
from .config import ConfigError, SystemConfig, paper_config, preset, smoke_config
from .harness import (
    BracketError,
    CampaignStats,
    TrialResult,
    find_required_ebn0,
    run_campaign,
    run_trial,
)
from .polar import PolarSpec, make_polar_spec, polar_spec_from_config
from .receiver import ReceiverOutput, decode_all
from .transmitter import encode_message, encode_messages, rebuild_signal

__all__ = [
    "BracketError", "CampaignStats", "ChannelRealization", "Codebook", "ConfigError",
    "Observation", "PolarSpec", "ReceiverOutput", "SystemConfig", "TrialResult",
    "decode_all", "draw_channel", "encode_message", "encode_messages", "find_required_ebn0",
    "generate_codebook", "load_codebook", "make_polar_spec", "paper_config", "phi",
    "phi_inverse", "polar_spec_from_config", "preset", "rebuild_signal", "run_campaign",
    "run_trial", "save_codebook", "sigma2_from_ebn0", "smoke_config", "transmit",
]
