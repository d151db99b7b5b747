"""
FlashSim - LDPC-coded MLC NAND flash simulator and voltage optimizer

Channel model, write-voltage design, entropy/cost-based read-voltage
optimization and Monte-Carlo BER campaigns.
"""

__version__ = "1.0.0"
__author__ = "FlashSim Team"
__description__ = "LDPC-coded MLC NAND flash simulator and voltage optimizer"
