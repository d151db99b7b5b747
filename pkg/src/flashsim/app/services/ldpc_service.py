"""
LDPC codes: progressive-edge-growth construction, systematic encoding,
sum-product decoding, minimum-distance estimation and alist persistence.
"""
import logging
from dataclasses import replace
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import galois
import numpy as np
from scipy import sparse

from ..config import current_config
from ..config.settings import CODES_DIR
from ..exceptions import ConstructionFailed, MissingArtifact
from ..models.code import BatchDecodeResult, DecodeResult, LdpcCode

logger = logging.getLogger(__name__)

GF2 = galois.GF(2)

# tanh-domain messages are kept strictly inside (-1, 1)
ONE = 0.9999999999999
TINY = 1e-300
DMIN_CHUNK = 4096


def degree_sequence(n: int, profile: Dict[int, float]) -> np.ndarray:
    """Per-variable column degrees realising a degree profile, ascending"""
    total = sum(profile.values())
    if total <= 0:
        raise ValueError(f"degree profile {profile} has no mass")
    degrees = sorted(profile)
    counts = {d: int(np.floor(n * profile[d] / total)) for d in degrees}
    # leftover columns go to the degrees with the largest rounding remainders
    remainders = sorted(degrees, key=lambda d: (n * profile[d] / total - counts[d], d), reverse=True)
    for d in remainders[:n - sum(counts.values())]:
        counts[d] += 1
    return np.repeat(degrees, [counts[d] for d in degrees]).astype(np.intp)


def _peg_candidates(H: np.ndarray, j: int) -> Tuple[np.ndarray, bool]:
    """
    Checks at maximal distance from variable j in the current graph.

    Returns the candidate check indices and whether connecting to them
    closes a 4-cycle.
    """
    reached = H[:, j].copy()
    frontier = reached.copy()
    depth = 0
    while True:
        variables = H[frontier].any(axis=0)
        grown = reached | H[:, variables].any(axis=1)
        depth += 1
        if grown.all():
            # the last expansion covered every check: its new checks are farthest
            return np.flatnonzero(~reached), depth == 1
        if not (grown & ~reached).any():
            # the component stopped growing: unreachable checks close no cycle
            return np.flatnonzero(~reached), False
        frontier = grown & ~reached
        reached = grown


def peg_parity_check(n: int, m: int, degrees: np.ndarray, rng: np.random.Generator,
                     strict_girth: bool = False) -> np.ndarray:
    """Dense boolean parity-check matrix built edge by edge with the PEG rule"""
    if degrees.max(initial=0) > m:
        raise ConstructionFailed(f"column degree {degrees.max()} exceeds the {m} available checks")

    H = np.zeros((m, n), dtype=bool)
    check_degree = np.zeros(m, dtype=np.intp)
    short_cycles = 0

    for j in range(n):
        for edge in range(degrees[j]):
            if edge == 0:
                candidates, closes_four_cycle = np.arange(m), False
            else:
                candidates, closes_four_cycle = _peg_candidates(H, j)

            if closes_four_cycle:
                if strict_girth:
                    raise ConstructionFailed(
                        f"variable {j} edge {edge}: every free check closes a 4-cycle"
                    )
                short_cycles += 1

            loads = check_degree[candidates]
            lightest = candidates[loads == loads.min()]
            c = lightest[rng.integers(lightest.size)] if lightest.size > 1 else lightest[0]
            H[c, j] = True
            check_degree[c] += 1

    if short_cycles:
        logger.warning(f"PEG placed {short_cycles} edges closing 4-cycles (n={n}, m={m})")
    return H


def systematic_generator(H: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Generator G (k x n) with G·H^T = 0 over GF(2), and the info positions.

    Row-reducing H splits columns into pivots (parity bits) and free columns
    (information bits); G carries the identity on the free columns.
    """
    R = GF2(np.asarray(H, dtype=np.uint8)).row_reduce().view(np.ndarray).astype(np.uint8)
    nonzero_rows = R.any(axis=1)
    R = R[nonzero_rows]
    pivots = R.argmax(axis=1)
    n = H.shape[1]
    free = np.setdiff1d(np.arange(n), pivots)

    G = np.zeros((free.size, n), dtype=np.uint8)
    G[np.arange(free.size), free] = 1
    G[:, pivots] = R[:, free].T
    return G, free


def code_from_parity_check(H, name: str = "", seed: Optional[int] = None,
                           profile: Optional[Dict[int, float]] = None,
                           d_min: Optional[int] = None) -> LdpcCode:
    """Wrap any binary parity-check matrix as an LdpcCode"""
    H = H.toarray() if sparse.issparse(H) else np.asarray(H)
    H = (H % 2).astype(np.uint8)
    G, info = systematic_generator(H)
    return LdpcCode(
        parity_check=sparse.csr_matrix(H),
        generator=G,
        info_positions=info,
        d_min_est=d_min,
        seed=seed,
        profile=dict(profile or {}),
        name=name,
    )


def peg_construct(n: int, k: int, degree_profile: Dict[int, float], seed: int,
                  strict_girth: bool = False,
                  rate_tolerance: float = current_config.RATE_TOLERANCE) -> LdpcCode:
    """
    Progressive-edge-growth code with n - k checks.

    Variables are processed in ascending degree order; each edge goes to the
    lowest-degree check among those farthest from the variable, ties broken by
    the seeded generator. With strict_girth a forced 4-cycle raises
    ConstructionFailed, otherwise it is logged.
    """
    if not n > k > 0:
        raise ValueError(f"PEG needs n > k > 0, got n={n}, k={k}")
    m = n - k
    rng = np.random.default_rng(seed)
    degrees = degree_sequence(n, degree_profile)
    H = peg_parity_check(n, m, degrees, rng, strict_girth=strict_girth)

    code = code_from_parity_check(H, name=f"peg_n{n}_k{k}_s{seed}", seed=seed, profile=degree_profile)
    # rate resolution is 1/n, so tiny codes may lose a dimension to rank
    tolerance = max(rate_tolerance, 1.0 / n)
    if abs(code.rate - k / n) > tolerance:
        raise ConstructionFailed(
            f"constructed rate {code.rate:.4f} misses target {k / n:.4f} by more than {tolerance:.4f}"
        )
    logger.info(f"PEG code built: n={code.n}, k={code.k}, edges={code.num_edges}, seed={seed}")
    return code


def has_four_cycles(code: LdpcCode) -> bool:
    """True when two columns of H share two or more checks"""
    H = code.parity_check.astype(np.int32)
    overlap = (H.T @ H).tocoo()
    off_diagonal = overlap.row != overlap.col
    return bool((overlap.data[off_diagonal] >= 2).any())


def encode(code: LdpcCode, msg: np.ndarray) -> np.ndarray:
    """Systematic codeword(s) for k-bit message(s); accepts (k,) or (frames, k)"""
    msg = np.asarray(msg)
    if msg.shape[-1] != code.k:
        raise ValueError(f"message length {msg.shape[-1]} does not match k={code.k}")
    words = msg.astype(np.float64) @ code.generator_float
    return (words.astype(np.int64) & 1).astype(np.uint8)


def bp_decode_batch(code: LdpcCode, llr: np.ndarray, max_iter: int = current_config.BP_MAX_ITER,
                    early_exit: bool = True, bit0_positive: bool = True) -> BatchDecodeResult:
    """
    Sum-product decoding of a batch of frames, shape (frames, n).

    Check nodes use the tanh rule evaluated as a sum of log-magnitudes and a
    count of negative signs. A frame stops once its syndrome is zero.
    """
    llr = np.atleast_2d(np.asarray(llr, dtype=np.float64))
    if llr.shape[1] != code.n:
        raise ValueError(f"LLR length {llr.shape[1]} does not match n={code.n}")
    if not np.isfinite(llr).all():
        raise ValueError("input LLRs must be finite")
    if not bit0_positive:
        llr = -llr

    checks, variables = code.edges
    check_incidence = code.check_incidence
    variable_incidence = code.variable_incidence

    frames = llr.shape[0]
    out_bits = np.zeros((frames, code.n), dtype=np.uint8)
    out_llr = llr.copy()
    out_iters = np.full(frames, max_iter, dtype=np.intp)
    out_converged = np.zeros(frames, dtype=bool)

    active = np.arange(frames)
    channel = llr
    v2c = channel[:, variables]

    for iteration in range(1, max_iter + 1):
        t = np.clip(np.tanh(0.5 * v2c), -ONE, ONE)
        log_mag = np.log(np.maximum(np.abs(t), TINY))
        negative = (t < 0).astype(np.float64)

        log_sum = (check_incidence @ log_mag.T).T
        neg_sum = (check_incidence @ negative.T).T
        ext_mag = np.exp(log_sum[:, checks] - log_mag)
        ext_neg = np.rint(neg_sum[:, checks] - negative).astype(np.int64)
        ext = np.where(ext_neg & 1, -ext_mag, ext_mag)
        c2v = 2.0 * np.arctanh(np.clip(ext, -ONE, ONE))

        posterior = channel + (variable_incidence @ c2v.T).T
        v2c = posterior[:, variables] - c2v
        bits = (posterior < 0).astype(np.uint8)

        if early_exit or iteration == max_iter:
            done = code.is_codeword(bits)
            if iteration == max_iter:
                finished = np.ones(active.size, dtype=bool)
            else:
                finished = done
            if finished.any():
                rows = active[finished]
                out_bits[rows] = bits[finished]
                out_llr[rows] = posterior[finished]
                out_iters[rows] = iteration
                out_converged[rows] = done[finished]
                keep = ~finished
                active = active[keep]
                channel = channel[keep]
                v2c = v2c[keep]
            if active.size == 0:
                break

    if not bit0_positive:
        out_llr = -out_llr
    return BatchDecodeResult(bits=out_bits, iterations=out_iters, converged=out_converged, llr=out_llr)


def bp_decode(code: LdpcCode, llr: np.ndarray, max_iter: int = current_config.BP_MAX_ITER,
              early_exit: bool = True, bit0_positive: bool = True) -> DecodeResult:
    """Sum-product decoding of one frame"""
    result = bp_decode_batch(code, np.asarray(llr)[None, :], max_iter=max_iter,
                             early_exit=early_exit, bit0_positive=bit0_positive)
    return result[0]


def _exhaustive_dmin(code: LdpcCode) -> int:
    k = code.k
    if k > 30:
        raise ValueError(f"exhaustive enumeration over 2^{k} codewords is not feasible")
    shifts = np.arange(k, dtype=np.int64)
    best = code.n
    for start in range(1, 2 ** k, DMIN_CHUNK):
        ints = np.arange(start, min(start + DMIN_CHUNK, 2 ** k), dtype=np.int64)
        msgs = ((ints[:, None] >> shifts) & 1).astype(np.uint8)
        weights = encode(code, msgs).sum(axis=1)
        best = min(best, int(weights.min()))
    return best


def impulse_dmin(code: LdpcCode, impulses: Sequence[float] = current_config.DMIN_IMPULSES,
                 max_iter: int = current_config.BP_MAX_ITER,
                 batch: int = current_config.DMIN_IMPULSE_BATCH) -> Optional[int]:
    """
    Lightest nonzero codeword reached by decoding error impulses, None if none.

    Each frame is the all-zero word with unit LLRs except one position, which is
    pushed towards 1 by an impulse of the given size. A decoder output that
    satisfies every check and is not all-zero is a codeword, so its weight
    bounds d_min from above.
    """
    n = code.n
    positions = np.repeat(np.arange(n), len(impulses))
    sizes = np.tile(np.asarray(impulses, dtype=float), n)
    best = None
    for start in range(0, positions.size, batch):
        pos = positions[start:start + batch]
        llr = np.ones((pos.size, n))
        llr[np.arange(pos.size), pos] = 1.0 - sizes[start:start + batch]
        result = bp_decode_batch(code, llr, max_iter=max_iter)
        weights = result.bits.sum(axis=1)
        found = result.converged & (weights > 0)
        if found.any():
            lightest = int(weights[found].min())
            best = lightest if best is None else min(best, lightest)
    return best


def estimate_dmin(code: LdpcCode, effort: int = current_config.DMIN_EFFORT, seed: int = 0,
                  exhaustive_limit: int = current_config.DMIN_EXHAUSTIVE_LIMIT,
                  impulses: bool = True) -> int:
    """
    Minimum-distance estimate.

    Exact by enumeration when n <= exhaustive_limit. Otherwise repeated random
    information sets: each column permutation is row-reduced over GF(2) and
    every free column yields a codeword of weight 1 + (its pivot-row weight).
    The lightest one seen is an upper bound on d_min. On high-rate codes few
    low-weight words have a single information bit, so the error-impulse search
    is run as well and the smaller bound kept.
    """
    if code.k == 0:
        raise ValueError("the zero code has no minimum distance")
    if code.n <= exhaustive_limit:
        return _exhaustive_dmin(code)

    rng = np.random.default_rng(seed)
    H = code.dense_parity_check.astype(np.uint8)
    n = code.n
    # systematic generator rows are codewords too
    best = int(code.generator.sum(axis=1).min())
    for trial in range(effort):
        perm = rng.permutation(n)
        R = GF2(H[:, perm]).row_reduce().view(np.ndarray).astype(np.uint8)
        R = R[R.any(axis=1)]
        pivots = R.argmax(axis=1)
        free_mask = np.ones(n, dtype=bool)
        free_mask[pivots] = False
        weights = 1 + R[:, free_mask].sum(axis=0)
        best = min(best, int(weights.min()))
        logger.debug(f"d_min trial {trial + 1}/{effort}: best so far {best}")

    if impulses:
        found = impulse_dmin(code)
        if found is not None and found < best:
            logger.info(f"Impulse search lowered the d_min estimate of {code.name} from {best} to {found}")
            best = found
    return best


def write_alist(code: LdpcCode, path: Union[str, Path]) -> Path:
    """Write H in MacKay's alist format (1-based indices, zero padded)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    H = code.parity_check.tocsc()
    Hr = code.parity_check.tocsr()
    m, n = code.m, code.n
    col_deg = np.diff(H.indptr)
    row_deg = np.diff(Hr.indptr)
    max_col, max_row = int(col_deg.max(initial=0)), int(row_deg.max(initial=0))

    lines = [f"{n} {m}", f"{max_col} {max_row}",
             " ".join(map(str, col_deg)), " ".join(map(str, row_deg))]
    for j in range(n):
        rows = sorted(H.indices[H.indptr[j]:H.indptr[j + 1]] + 1)
        lines.append(" ".join(map(str, rows + [0] * (max_col - len(rows)))))
    for i in range(m):
        cols = sorted(Hr.indices[Hr.indptr[i]:Hr.indptr[i + 1]] + 1)
        lines.append(" ".join(map(str, cols + [0] * (max_row - len(cols)))))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_alist(path: Union[str, Path]) -> sparse.csr_matrix:
    """Read an alist file into a sparse parity-check matrix"""
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(f"alist file not found: {path}")
    tokens = [int(tok) for tok in path.read_text(encoding="utf-8").split()]
    n, m, max_col, _max_row = tokens[:4]
    pos = 4
    col_deg = tokens[pos:pos + n]
    pos += n + m
    rows, cols = [], []
    for j in range(n):
        entries = tokens[pos:pos + max_col]
        pos += max_col
        for r in entries[:col_deg[j]]:
            rows.append(r - 1)
            cols.append(j)
    data = np.ones(len(rows), dtype=np.uint8)
    return sparse.csr_matrix((data, (rows, cols)), shape=(m, n))


class LdpcService:
    """Builds, caches and loads the campaign codes"""

    def __init__(self, codes_dir: Union[str, Path] = None):
        """Initialize LDPC service"""
        self.codes_dir = Path(codes_dir or CODES_DIR)
        self._memory: Dict[Tuple, LdpcCode] = {}
        logger.debug(f"LDPC service using code cache {self.codes_dir}")

    def _stem(self, n: int, k: int, profile: Dict[int, float], seed: int) -> str:
        profile_tag = "_".join(f"{d}-{f:g}" for d, f in sorted(profile.items()))
        return f"peg_n{n}_k{k}_p{profile_tag}_s{seed}"

    def alist_path(self, n: int, k: int, profile: Dict[int, float], seed: int) -> Path:
        return self.codes_dir / f"{self._stem(n, k, profile, seed)}.alist"

    def _read_cached_dmin(self, path: Path, effort: int) -> Optional[int]:
        if not path.exists():
            return None
        values = {}
        for line in path.read_text(encoding="utf-8").splitlines():
            key, sep, value = line.partition('=')
            if sep:
                values[key.strip()] = value.strip()
        try:
            # estimates from before the impulse search are recomputed
            if int(values.get('effort', 0)) >= effort and values.get('impulses') == "true":
                return int(values['d_min'])
        except (KeyError, ValueError):
            logger.warning(f"Ignoring unreadable d_min cache {path}")
        return None

    def get_code(self, n: int = current_config.CODE_N, k: int = current_config.CODE_K,
                 profile: Dict[int, float] = None, seed: int = current_config.CODE_SEED,
                 strict_girth: bool = current_config.CODE_STRICT_GIRTH,
                 dmin_effort: int = current_config.DMIN_EFFORT,
                 d_min: Optional[int] = None) -> LdpcCode:
        """
        The PEG code for these settings, with a d_min estimate attached.

        Codes are stored as alist files and d_min estimates beside them, so the
        construction and the estimate each run once per setting.
        """
        profile = dict(profile or current_config.CODE_PROFILE)
        key = (n, k, tuple(sorted(profile.items())), seed, strict_girth)
        code = self._memory.get(key)

        if code is None:
            path = self.alist_path(n, k, profile, seed)
            if path.exists():
                logger.info(f"Loading cached code {path.name}")
                code = code_from_parity_check(read_alist(path), name=path.stem, seed=seed, profile=profile)
            else:
                code = peg_construct(n, k, profile, seed, strict_girth=strict_girth)
                if strict_girth and has_four_cycles(code):
                    raise ConstructionFailed(f"code {path.stem} has 4-cycles")
                write_alist(code, path)
                logger.info(f"Stored code {path.name}")
            self._memory[key] = code

        if d_min is not None:
            return replace(code, d_min_est=int(d_min))
        if code.d_min_est is None:
            dmin_path = self.alist_path(n, k, profile, seed).with_suffix(".dmin")
            cached = self._read_cached_dmin(dmin_path, dmin_effort)
            if cached is None:
                logger.info(f"Estimating d_min of {code.name} with {dmin_effort} trials")
                cached = estimate_dmin(code, effort=dmin_effort, seed=seed)
                dmin_path.write_text(f"d_min = {cached}\neffort = {dmin_effort}\nimpulses = true\n",
                                     encoding="utf-8")
            code.with_dmin(cached)
            logger.info(f"Code {code.name}: d_min estimate {cached}")
        return code

    def code_for(self, settings) -> LdpcCode:
        """Code described by a CodeSettings block"""
        return self.get_code(
            n=settings.n, k=settings.k, profile=settings.profile, seed=settings.seed,
            strict_girth=settings.strict_girth, dmin_effort=settings.dmin_effort,
            d_min=settings.d_min,
        )


ldpc_service = LdpcService()
