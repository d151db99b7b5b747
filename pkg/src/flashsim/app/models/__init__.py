"""
Data models for FlashSim
"""

from .channel import (
    CellState,
    ChannelParams,
    WriteVoltages,
    StateModel,
    HardThresholds,
    STATES,
    MSB_BITS,
    LSB_BITS,
    STATE_OF_BITS
)
from .code import LdpcCode, DecodeResult, BatchDecodeResult
from .quantization import (
    WriteCostInput,
    WriteSearchConfig,
    WriteSearchResult,
    ReadVoltages,
    LlrTable,
    CostWeights
)
from .campaign import (
    WriteScheme,
    ReadScheme,
    StopReason,
    CodeSettings,
    SchemeSettings,
    SweepSettings,
    OutputSettings,
    RunSettings,
    RunConfig,
    CampaignConfig,
    BerRow,
    BerReport,
    LutRecord,
    BER_COLUMNS
)

__all__ = [
    'CellState',
    'ChannelParams',
    'WriteVoltages',
    'StateModel',
    'HardThresholds',
    'STATES',
    'MSB_BITS',
    'LSB_BITS',
    'STATE_OF_BITS',
    'LdpcCode',
    'DecodeResult',
    'BatchDecodeResult',
    'WriteCostInput',
    'WriteSearchConfig',
    'WriteSearchResult',
    'ReadVoltages',
    'LlrTable',
    'CostWeights',
    'WriteScheme',
    'ReadScheme',
    'StopReason',
    'CodeSettings',
    'SchemeSettings',
    'SweepSettings',
    'OutputSettings',
    'RunSettings',
    'RunConfig',
    'CampaignConfig',
    'BerRow',
    'BerReport',
    'LutRecord',
    'BER_COLUMNS'
]
