"""
Services module for FlashSim
"""

from .ldpc_service import LdpcService, ldpc_service
from .harness_service import HarnessService, harness_service
from .lut_service import VoltageLut

# channel_service, write_service and read_service are plain function modules;
# import them directly where needed

__all__ = [
    'LdpcService',
    'ldpc_service',
    'HarnessService',
    'harness_service',
    'VoltageLut'
]
