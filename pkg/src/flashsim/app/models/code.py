"""
Data models for binary LDPC codes and decoder output
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, Optional

import numpy as np
from scipy import sparse


@dataclass(eq=False)
class LdpcCode:
    """Binary linear code given by a sparse parity-check matrix and a systematic generator"""
    parity_check: sparse.csr_matrix
    generator: np.ndarray
    info_positions: np.ndarray
    d_min_est: Optional[int] = None
    seed: Optional[int] = None
    profile: Dict[int, float] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        """Normalise array types and check shapes"""
        self.parity_check = sparse.csr_matrix(self.parity_check, dtype=np.uint8)
        self.generator = np.asarray(self.generator, dtype=np.uint8)
        self.info_positions = np.asarray(self.info_positions, dtype=np.intp)

        m, n = self.parity_check.shape
        if self.generator.ndim != 2 or self.generator.shape[1] != n:
            raise ValueError(f"generator must have {n} columns, got shape {self.generator.shape}")
        if self.info_positions.shape != (self.generator.shape[0],):
            raise ValueError("info_positions must list one codeword position per generator row")
        if self.d_min_est is not None and self.d_min_est < 1:
            raise ValueError("d_min_est must be a positive integer")

    @property
    def n(self) -> int:
        return self.parity_check.shape[1]

    @property
    def k(self) -> int:
        return self.generator.shape[0]

    @property
    def m(self) -> int:
        """Number of parity-check rows (may exceed n - k when H is rank deficient)"""
        return self.parity_check.shape[0]

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def num_edges(self) -> int:
        return int(self.parity_check.nnz)

    @cached_property
    def dense_parity_check(self) -> np.ndarray:
        return self.parity_check.toarray().astype(bool)

    @cached_property
    def generator_float(self) -> np.ndarray:
        """Generator as float64 so encoding goes through BLAS (sums stay exact below 2**53)"""
        return self.generator.astype(np.float64)

    @cached_property
    def edges(self):
        """(check index, variable index) of every Tanner-graph edge, ordered by check"""
        coo = self.parity_check.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return coo.row[order].astype(np.intp), coo.col[order].astype(np.intp)

    @cached_property
    def check_incidence(self) -> sparse.csr_matrix:
        """m x E matrix summing edge messages into their check"""
        checks, _ = self.edges
        num_edges = checks.size
        return sparse.csr_matrix(
            (np.ones(num_edges), (checks, np.arange(num_edges))), shape=(self.m, num_edges)
        )

    @cached_property
    def variable_incidence(self) -> sparse.csr_matrix:
        """n x E matrix summing edge messages into their variable"""
        _, variables = self.edges
        num_edges = variables.size
        return sparse.csr_matrix(
            (np.ones(num_edges), (variables, np.arange(num_edges))), shape=(self.n, num_edges)
        )

    @cached_property
    def parity_check_int(self) -> sparse.csr_matrix:
        return self.parity_check.astype(np.int32)

    def syndrome(self, bits: np.ndarray) -> np.ndarray:
        """H·c mod 2 for one word (n,) or a batch (frames, n)"""
        bits = np.asarray(bits)
        product = self.parity_check_int @ bits.astype(np.int32).T
        return (np.asarray(product) % 2).T.astype(np.uint8)

    def is_codeword(self, bits: np.ndarray) -> np.ndarray:
        return ~self.syndrome(bits).any(axis=-1)

    def with_dmin(self, d_min: int) -> "LdpcCode":
        """Record an estimated minimum distance"""
        self.d_min_est = int(d_min)
        return self

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary"""
        return {
            'name': self.name,
            'n': self.n,
            'k': self.k,
            'm': self.m,
            'rate': self.rate,
            'edges': self.num_edges,
            'seed': self.seed,
            'profile': dict(self.profile),
            'd_min_est': self.d_min_est,
        }


@dataclass
class DecodeResult:
    """Belief-propagation output for one frame"""
    bits: np.ndarray
    iterations: int
    converged: bool
    llr: Optional[np.ndarray] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'iterations': self.iterations,
            'converged': self.converged,
            'weight': int(np.count_nonzero(self.bits)),
        }


@dataclass
class BatchDecodeResult:
    """Belief-propagation output for a batch of frames (leading axis = frame)"""
    bits: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    llr: np.ndarray

    @property
    def frames(self) -> int:
        return self.bits.shape[0]

    def __len__(self) -> int:
        return self.frames

    def __getitem__(self, index: int) -> DecodeResult:
        return DecodeResult(
            bits=self.bits[index],
            iterations=int(self.iterations[index]),
            converged=bool(self.converged[index]),
            llr=self.llr[index],
        )
