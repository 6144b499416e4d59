"""Multilevel 9/7 wavelet analysis/synthesis in 1-D and 2-D.

The transform is the biorthogonal 9/7 pair implemented by lifting, scaled so
the lowpass branch has DC gain sqrt(2) (near-orthonormal, so coefficient
energy tracks signal energy). Boundaries are handled symmetrically: the
lifting steps mirror at whole samples, and odd-length inputs are first
padded by duplicating the final sample (half-sample extension), so each
band holds ceil(n/2) coefficients and the pyramid may carry slightly more
coefficients than the input had samples.

``band_energies`` maps the dyadic sub-bands onto the five brain-rhythm
bands (delta 0-4 Hz, theta 4-8, alpha 8-13, beta 13-30, gamma 30-100) by
maximal frequency overlap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SizeError, StructureError

# 9/7 lifting constants; ZETA normalizes the lowpass branch to DC gain sqrt(2).
_ALPHA = -1.586134342059924
_BETA = -0.052980118572961
_GAMMA = 0.882911075530934
_DELTA = 0.443506852043971
_ZETA = 1.1496043988602418

RHYTHM_BANDS = {
    "delta": (0.0, 4.0),
    "theta": (4.0, 8.0),
    "alpha": (8.0, 13.0),
    "beta": (13.0, 30.0),
    "gamma": (30.0, 100.0),
}
RHYTHM_ORDER = ("delta", "theta", "alpha", "beta", "gamma")


def band_sizes(n: int, levels: int) -> list[int]:
    """Coefficient count per level: [n, ceil(n/2), ceil(n/4), ...]."""
    sizes = [n]
    for _ in range(levels):
        sizes.append((sizes[-1] + 1) // 2)
    return sizes


@dataclass
class WaveletPyramid1D:
    """L-level 1-D pyramid: approximation plus details from level L down to 1."""

    levels: int
    approx: np.ndarray
    details: list[np.ndarray]
    original_len: int

    def validate(self) -> None:
        sizes = band_sizes(self.original_len, self.levels)
        if len(self.details) != self.levels:
            raise StructureError(
                f"pyramid declares {self.levels} levels but holds {len(self.details)} detail bands"
            )
        if len(self.approx) != sizes[self.levels]:
            raise StructureError(
                f"approx band has {len(self.approx)} coefficients, expected {sizes[self.levels]}"
            )
        for i, det in enumerate(self.details):
            level = self.levels - i
            if len(det) != sizes[level]:
                raise StructureError(
                    f"detail level {level} has {len(det)} coefficients, expected {sizes[level]}"
                )

    def bands(self) -> list[np.ndarray]:
        """All coefficient bands, coarsest first."""
        return [self.approx, *self.details]

    def copy(self) -> "WaveletPyramid1D":
        return WaveletPyramid1D(
            self.levels, self.approx.copy(), [d.copy() for d in self.details], self.original_len
        )

    def energy(self) -> float:
        return float(sum(np.dot(b, b) for b in self.bands()))

    def _binary_op(self, other: "WaveletPyramid1D", op) -> "WaveletPyramid1D":
        if self.levels != other.levels or self.original_len != other.original_len:
            raise StructureError("pyramid shapes differ")
        return WaveletPyramid1D(
            self.levels,
            op(self.approx, other.approx),
            [op(a, b) for a, b in zip(self.details, other.details)],
            self.original_len,
        )

    def __add__(self, other):
        return self._binary_op(other, np.add)

    def __sub__(self, other):
        return self._binary_op(other, np.subtract)


@dataclass
class WaveletPyramid2D:
    """L-level separable 2-D pyramid.

    Per-level detail bands are keyed ``lh``, ``hl``, ``hh`` where the first
    letter is the filter applied along rows (channels) and the second along
    columns (time); stored from level L down to 1.
    """

    levels: int
    approx: np.ndarray
    details: list[dict[str, np.ndarray]]
    original_dims: tuple[int, int]

    def validate(self) -> None:
        rows = band_sizes(self.original_dims[0], self.levels)
        cols = band_sizes(self.original_dims[1], self.levels)
        if len(self.details) != self.levels:
            raise StructureError(
                f"pyramid declares {self.levels} levels but holds {len(self.details)} detail bands"
            )
        if self.approx.shape != (rows[self.levels], cols[self.levels]):
            raise StructureError(
                f"approx band shape {self.approx.shape}, expected "
                f"{(rows[self.levels], cols[self.levels])}"
            )
        for i, sb in enumerate(self.details):
            level = self.levels - i
            want = (rows[level], cols[level])
            for key in ("lh", "hl", "hh"):
                if key not in sb:
                    raise StructureError(f"detail level {level} missing {key!r} band")
                if sb[key].shape != want:
                    raise StructureError(
                        f"detail level {level} band {key!r} shape {sb[key].shape}, expected {want}"
                    )

    def bands(self) -> list[np.ndarray]:
        out = [self.approx]
        for sb in self.details:
            out.extend([sb["lh"], sb["hl"], sb["hh"]])
        return out

    def copy(self) -> "WaveletPyramid2D":
        return WaveletPyramid2D(
            self.levels,
            self.approx.copy(),
            [{k: v.copy() for k, v in sb.items()} for sb in self.details],
            self.original_dims,
        )

    def energy(self) -> float:
        return float(sum(np.sum(b * b) for b in self.bands()))


# ---------------------------------------------------------------------------
# Lifting kernels (operate along the last axis; length must be even)
# ---------------------------------------------------------------------------

def _lift_split(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = np.array(x[..., 0::2], dtype=np.float64)
    d = np.array(x[..., 1::2], dtype=np.float64)

    def shift_left(a):  # a[i+1] with mirror at the right edge
        return np.concatenate([a[..., 1:], a[..., -1:]], axis=-1)

    def shift_right(a):  # a[i-1] with mirror at the left edge
        return np.concatenate([a[..., :1], a[..., :-1]], axis=-1)

    d += _ALPHA * (s + shift_left(s))
    s += _BETA * (shift_right(d) + d)
    d += _GAMMA * (s + shift_left(s))
    s += _DELTA * (shift_right(d) + d)
    return s * _ZETA, d / _ZETA


def _lift_merge(s: np.ndarray, d: np.ndarray) -> np.ndarray:
    s = np.array(s, dtype=np.float64) / _ZETA
    d = np.array(d, dtype=np.float64) * _ZETA

    def shift_left(a):
        return np.concatenate([a[..., 1:], a[..., -1:]], axis=-1)

    def shift_right(a):
        return np.concatenate([a[..., :1], a[..., :-1]], axis=-1)

    s -= _DELTA * (shift_right(d) + d)
    d -= _GAMMA * (s + shift_left(s))
    s -= _BETA * (shift_right(d) + d)
    d -= _ALPHA * (s + shift_left(s))

    out = np.empty(s.shape[:-1] + (s.shape[-1] + d.shape[-1],), dtype=np.float64)
    out[..., 0::2] = s
    out[..., 1::2] = d
    return out


def _pad_even(x: np.ndarray) -> np.ndarray:
    if x.shape[-1] % 2:
        return np.concatenate([x, x[..., -1:]], axis=-1)
    return x


def _analyze_once(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return _lift_split(_pad_even(x))


def _synthesize_once(s: np.ndarray, d: np.ndarray, out_len: int) -> np.ndarray:
    return _lift_merge(s, d)[..., :out_len]


# ---------------------------------------------------------------------------
# 1-D transform
# ---------------------------------------------------------------------------

def dwt1d(signal, levels: int) -> WaveletPyramid1D:
    """L-level 1-D analysis of a real vector."""
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise StructureError(f"dwt1d expects a vector, got ndim={x.ndim}")
    if levels < 1:
        raise SizeError(f"levels must be >= 1, got {levels}")
    if len(x) < 2 ** levels:
        raise SizeError(f"signal of length {len(x)} too short for {levels} levels")
    details: list[np.ndarray] = []
    cur = x
    for _ in range(levels):
        cur, det = _analyze_once(cur)
        details.append(det)
    details.reverse()
    return WaveletPyramid1D(levels, cur, details, len(x))


def idwt1d(pyr: WaveletPyramid1D) -> np.ndarray:
    """Invert dwt1d; reconstructs a vector of ``original_len``."""
    pyr.validate()
    sizes = band_sizes(pyr.original_len, pyr.levels)
    cur = pyr.approx
    for i, det in enumerate(pyr.details):
        level = pyr.levels - i
        cur = _synthesize_once(cur, det, sizes[level - 1])
    return cur


# ---------------------------------------------------------------------------
# 2-D transform (separable)
# ---------------------------------------------------------------------------

def dwt2d(matrix, levels: int) -> WaveletPyramid2D:
    """L-level separable 2-D analysis of a channels x samples matrix."""
    x = np.asarray(getattr(matrix, "data", matrix), dtype=np.float64)
    if x.ndim != 2:
        raise StructureError(f"dwt2d expects a matrix, got ndim={x.ndim}")
    if levels < 1:
        raise SizeError(f"levels must be >= 1, got {levels}")
    if min(x.shape) < 2 ** levels:
        raise SizeError(f"matrix of shape {x.shape} too small for {levels} levels")
    details: list[dict[str, np.ndarray]] = []
    cur = x
    for _ in range(levels):
        time_lo, time_hi = _analyze_once(cur)        # along time axis
        ll, hl = _analyze_once(time_lo.T)            # along channel axis
        lh, hh = _analyze_once(time_hi.T)
        details.append({"lh": lh.T, "hl": hl.T, "hh": hh.T})
        cur = ll.T
    details.reverse()
    return WaveletPyramid2D(levels, cur, details, x.shape)


def idwt2d(pyr: WaveletPyramid2D) -> np.ndarray:
    """Invert dwt2d; reconstructs a matrix of ``original_dims``."""
    pyr.validate()
    rows = band_sizes(pyr.original_dims[0], pyr.levels)
    cols = band_sizes(pyr.original_dims[1], pyr.levels)
    cur = pyr.approx
    for i, sb in enumerate(pyr.details):
        level = pyr.levels - i
        r_out, c_out = rows[level - 1], cols[level - 1]
        time_lo = _synthesize_once(cur.T, sb["hl"].T, r_out).T
        time_hi = _synthesize_once(sb["lh"].T, sb["hh"].T, r_out).T
        cur = _synthesize_once(time_lo, time_hi, c_out)
    return cur


# ---------------------------------------------------------------------------
# Rhythm-band energies
# ---------------------------------------------------------------------------

@dataclass
class BandEnergyVector:
    """Coefficient energy per brain rhythm (squared microvolts)."""

    delta: float
    theta: float
    alpha: float
    beta: float
    gamma: float

    band_edges = RHYTHM_BANDS

    def as_array(self) -> np.ndarray:
        return np.array([self.delta, self.theta, self.alpha, self.beta, self.gamma])

    def total(self) -> float:
        return float(self.as_array().sum())

    def normalized(self) -> np.ndarray | None:
        """Unit-sum feature vector, or None for a zero-energy input."""
        arr = self.as_array()
        total = arr.sum()
        if total <= 0.0:
            return None
        return arr / total


def _rhythm_for(lo: float, hi: float) -> str:
    """Rhythm band with maximal overlap with [lo, hi]; nearest band if none."""
    best, best_overlap = None, -1.0
    for name in RHYTHM_ORDER:
        b_lo, b_hi = RHYTHM_BANDS[name]
        overlap = min(hi, b_hi) - max(lo, b_lo)
        if overlap > best_overlap + 1e-12:
            best, best_overlap = name, overlap
    if best_overlap > 0:
        return best
    mid = (lo + hi) / 2
    return min(
        RHYTHM_ORDER,
        key=lambda n: abs(mid - (RHYTHM_BANDS[n][0] + RHYTHM_BANDS[n][1]) / 2),
    )


def dyadic_band_edges(fs: float, levels: int) -> list[tuple[float, float]]:
    """Frequency span of each pyramid band, coarsest (approx) first."""
    edges = [(0.0, fs / 2 ** (levels + 1))]
    for level in range(levels, 0, -1):
        edges.append((fs / 2 ** (level + 1), fs / 2 ** level))
    return edges


def band_energies(pyr: WaveletPyramid1D, fs: float) -> BandEnergyVector:
    """Partition pyramid coefficient energy over the five rhythm bands.

    Each dyadic band's full energy goes to the rhythm with maximal frequency
    overlap, so the five entries sum to the total pyramid energy exactly.
    """
    if fs <= 0:
        raise StructureError(f"fs must be positive, got {fs}")
    out = dict.fromkeys(RHYTHM_ORDER, 0.0)
    for (lo, hi), band in zip(dyadic_band_edges(fs, pyr.levels), pyr.bands()):
        out[_rhythm_for(lo, hi)] += float(np.dot(band, band))
    return BandEnergyVector(**out)


def rowwise_band_energies(rows: np.ndarray, fs: float, levels: int) -> np.ndarray:
    """Rhythm-band energies of many equal-length signals at once.

    Returns an (n_rows, 5) array ordered delta..gamma; row i equals
    ``band_energies(dwt1d(rows[i], levels), fs).as_array()``.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise StructureError(f"expected a matrix of rows, got ndim={rows.ndim}")
    if rows.shape[1] < 2 ** levels:
        raise SizeError(f"rows of length {rows.shape[1]} too short for {levels} levels")
    edges = dyadic_band_edges(fs, levels)
    out = np.zeros((rows.shape[0], len(RHYTHM_ORDER)))
    cur = rows
    band_index = {name: i for i, name in enumerate(RHYTHM_ORDER)}
    for split in range(1, levels + 1):
        cur, det = _analyze_once(cur)
        # split number k produces the level-k detail band, edges[1 + levels - k]
        idx = band_index[_rhythm_for(*edges[1 + levels - split])]
        out[:, idx] += np.sum(det * det, axis=-1)
    out[:, band_index[_rhythm_for(*edges[0])]] += np.sum(cur * cur, axis=-1)
    return out
