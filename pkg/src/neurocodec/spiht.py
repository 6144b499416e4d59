"""Embedded SPIHT coding of wavelet pyramids with exact bit-budget control.

Bit-plane significance coding over spatial-orientation trees:

* 2-D trees use the classic layout: roots are the coarsest-band (LL)
  coefficients grouped 2x2, the top-left of each group childless and the
  other three parenting the 2x2 block at the matching position of their
  orientation band; below that, (r, c) parents the 2x2 block at (2r, 2c).
* 1-D trees are binary: approximation coefficient i parents coefficients
  {2i, 2i+1} of the coarsest detail band (approximation coefficients whose
  children fall outside that band stay list-of-insignificant-pixels only),
  and detail coefficient i parents {2i, 2i+1} of the next finer band.

Bands whose sizes are not powers of two are laid onto a zero-padded dyadic
grid; grid slots holding no transform coefficient are excluded from all
emission by a validity mask.

Streams are embedded (any prefix decodes) and encoding stops exactly at the
bit budget unless the pyramid completes losslessly first. Payload bits are
packed MSB-first within bytes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BudgetError, FormatError, StructureError
from .wavelet import WaveletPyramid1D, WaveletPyramid2D, band_sizes

_MAX_PLANES = 32


class _OutOfBits(Exception):
    """Internal: bit budget or stream exhausted."""


@dataclass
class Bitstream:
    """A packed bit sequence; ``length_bits`` is the true length."""

    data: bytes
    length_bits: int

    def __post_init__(self):
        if len(self.data) * 8 < self.length_bits:
            raise StructureError("bitstream shorter than its declared bit length")

    def prefix(self, length_bits: int) -> "Bitstream":
        """The first ``length_bits`` bits as a new stream."""
        length_bits = min(length_bits, self.length_bits)
        nbytes = (length_bits + 7) // 8
        buf = bytearray(self.data[:nbytes])
        if length_bits % 8 and buf:
            buf[-1] &= 0xFF << (8 - length_bits % 8)  # zero the padding tail
        return Bitstream(bytes(buf), length_bits)


class BitWriter:
    """MSB-first bit packer with a hard capacity."""

    def __init__(self, capacity_bits: int):
        self.capacity = capacity_bits
        self.total = 0
        self._buf = bytearray()
        self._cur = 0
        self._fill = 0

    def write(self, bit: int) -> None:
        if self.total >= self.capacity:
            raise _OutOfBits
        self._cur = (self._cur << 1) | (bit & 1)
        self._fill += 1
        self.total += 1
        if self._fill == 8:
            self._buf.append(self._cur)
            self._cur = 0
            self._fill = 0

    def write_uint(self, value: int, width: int) -> None:
        for shift in range(width - 1, -1, -1):
            self.write((value >> shift) & 1)

    def finish(self) -> Bitstream:
        buf = bytes(self._buf)
        if self._fill:
            buf += bytes([self._cur << (8 - self._fill)])
        return Bitstream(buf, self.total)


class BitReader:
    """MSB-first bit reader over a Bitstream."""

    def __init__(self, stream: Bitstream):
        self._data = stream.data
        self._len = stream.length_bits
        self.pos = 0

    def read(self) -> int:
        if self.pos >= self._len:
            raise _OutOfBits
        byte = self._data[self.pos >> 3]
        bit = (byte >> (7 - (self.pos & 7))) & 1
        self.pos += 1
        return bit

    def read_uint(self, width: int) -> int:
        value = 0
        for _ in range(width):
            value = (value << 1) | self.read()
        return value


# ---------------------------------------------------------------------------
# Uniform scalar quantization
# ---------------------------------------------------------------------------

def _map_bands(pyr, fn):
    if isinstance(pyr, WaveletPyramid1D):
        return WaveletPyramid1D(
            pyr.levels, fn(pyr.approx), [fn(d) for d in pyr.details], pyr.original_len
        )
    if isinstance(pyr, WaveletPyramid2D):
        return WaveletPyramid2D(
            pyr.levels,
            fn(pyr.approx),
            [{k: fn(v) for k, v in sb.items()} for sb in pyr.details],
            pyr.original_dims,
        )
    raise StructureError(f"not a wavelet pyramid: {type(pyr).__name__}")


def quantize(pyr, precision_bits: int = 16):
    """Uniform scalar quantization to sign-magnitude integers.

    scale = max|coef| / (2**(precision_bits-1) - 1); an all-zero pyramid
    quantizes to scale 0 and all-zero integers.

    Returns (integer-valued pyramid, scale).
    """
    if not 2 <= precision_bits <= 24:
        raise ValueError(f"precision_bits must be in [2, 24], got {precision_bits}")
    peak = max((float(np.max(np.abs(b))) if b.size else 0.0) for b in pyr.bands())
    if peak == 0.0:
        return _map_bands(pyr, lambda b: np.zeros_like(b, dtype=np.float64)), 0.0
    scale = peak / (2 ** (precision_bits - 1) - 1)
    return _map_bands(pyr, lambda b: np.rint(b / scale)), scale


def dequantize(pyr, scale: float):
    """Invert quantize: multiply every coefficient by the scale."""
    return _map_bands(pyr, lambda b: b * scale)


# ---------------------------------------------------------------------------
# Dyadic grid layout and tree topology
# ---------------------------------------------------------------------------

class _Tree1D:
    def __init__(self, n: int, levels: int):
        sizes = band_sizes(n, levels)
        self.levels = levels
        self.sizes = sizes
        self.root_len = sizes[levels]            # approx band container == band size
        self.grid_len = self.root_len << levels

    def valid_mask(self) -> np.ndarray:
        valid = np.zeros(self.grid_len, dtype=bool)
        valid[: self.root_len] = True
        for level in range(self.levels, 0, -1):
            start = self.root_len << (self.levels - level)
            valid[start: start + self.sizes[level]] = True
        return valid

    def band_slices(self):
        """(level, grid slice) pairs, approx (level L+1 sentinel) first."""
        out = [(self.levels, slice(0, self.sizes[self.levels]))]
        for level in range(self.levels, 0, -1):
            start = self.root_len << (self.levels - level)
            out.append((level, slice(start, start + self.sizes[level])))
        return out

    def roots(self) -> list[int]:
        return list(range(self.root_len))

    def children(self, g: int):
        a0 = self.root_len
        if g < a0:
            lo = a0 + 2 * g
            if lo >= 2 * a0:
                return ()
            return (lo,) if lo + 1 >= 2 * a0 else (lo, lo + 1)
        if g < self.grid_len // 2:
            return (2 * g, 2 * g + 1)
        return ()

    def descendant_max(self, values: np.ndarray) -> np.ndarray:
        """values -> per-slot max over all strict descendants (grid order)."""
        a0, levels = self.root_len, self.levels
        dmax = np.zeros(self.grid_len, dtype=values.dtype)
        for level in range(1, levels):          # parents live at level+1
            start = a0 << (levels - level)
            merged = np.maximum(values[start: 2 * start], dmax[start: 2 * start])
            dmax[start // 2: start] = merged.reshape(-1, 2).max(axis=1)
        merged = np.maximum(values[a0: 2 * a0], dmax[a0: 2 * a0])
        if a0 % 2:
            merged = np.append(merged, 0)
        pair_max = merged.reshape(-1, 2).max(axis=1)
        dmax[: len(pair_max)] = pair_max
        return dmax


class _Tree2D:
    def __init__(self, dims: tuple[int, int], levels: int):
        self.levels = levels
        self.row_sizes = band_sizes(dims[0], levels)
        self.col_sizes = band_sizes(dims[1], levels)
        # round the root container up to even so 2x2 root grouping applies
        self.root_rows = self.row_sizes[levels] + self.row_sizes[levels] % 2
        self.root_cols = self.col_sizes[levels] + self.col_sizes[levels] % 2
        self.grid_rows = self.root_rows << levels
        self.grid_cols = self.root_cols << levels

    def valid_mask(self) -> np.ndarray:
        valid = np.zeros((self.grid_rows, self.grid_cols), dtype=bool)
        for level, (r0, c0), (rr, cc) in self.band_rects():
            valid[r0: r0 + rr, c0: c0 + cc] = True
        return valid

    def band_rects(self):
        """(level, origin, shape) per band: approx, then lh/hl/hh per level."""
        out = [(self.levels, (0, 0), (self.row_sizes[self.levels], self.col_sizes[self.levels]))]
        for level in range(self.levels, 0, -1):
            qr = self.root_rows << (self.levels - level)
            qc = self.root_cols << (self.levels - level)
            shape = (self.row_sizes[level], self.col_sizes[level])
            out.append((level, (0, qc), shape))       # lh
            out.append((level, (qr, 0), shape))       # hl
            out.append((level, (qr, qc), shape))      # hh
        return out

    def roots(self) -> list[int]:
        cg = self.grid_cols
        return [r * cg + c for r in range(self.root_rows) for c in range(self.root_cols)]

    def children(self, g: int):
        cg = self.grid_cols
        r, c = divmod(g, cg)
        if r < self.root_rows and c < self.root_cols:
            if not (r & 1) and not (c & 1):
                return ()
            br, bc = (r >> 1) << 1, (c >> 1) << 1
            orow = br + (self.root_rows if r & 1 else 0)
            ocol = bc + (self.root_cols if c & 1 else 0)
            base = orow * cg + ocol
            return (base, base + 1, base + cg, base + cg + 1)
        if 2 * r < self.grid_rows and 2 * c < self.grid_cols:
            base = 2 * r * cg + 2 * c
            return (base, base + 1, base + cg, base + cg + 1)
        return ()

    def descendant_max(self, values: np.ndarray) -> np.ndarray:
        rg, cg = self.grid_rows, self.grid_cols
        vals = values.reshape(rg, cg)
        dmax = np.zeros((rg, cg), dtype=vals.dtype)
        for step in range(1, self.levels):
            hc, wc = rg >> (step - 1), cg >> (step - 1)
            hp, wp = hc >> 1, wc >> 1
            merged = np.maximum(vals[:hc, :wc], dmax[:hc, :wc])
            dmax[:hp, :wp] = merged.reshape(hp, 2, wp, 2).max(axis=(1, 3))
        r0, c0 = self.root_rows, self.root_cols
        merged = np.maximum(vals[: 2 * r0, : 2 * c0], dmax[: 2 * r0, : 2 * c0])

        def block_max(rows, cols):
            block = merged[rows, cols]
            return block.reshape(r0 // 2, 2, c0 // 2, 2).max(axis=(1, 3))

        ll = np.zeros((r0, c0), dtype=vals.dtype)
        ll[0::2, 1::2] = block_max(slice(0, r0), slice(c0, 2 * c0))
        ll[1::2, 0::2] = block_max(slice(r0, 2 * r0), slice(0, c0))
        ll[1::2, 1::2] = block_max(slice(r0, 2 * r0), slice(c0, 2 * c0))
        dmax[:r0, :c0] = ll
        return dmax.reshape(-1)


def _tree_for(shape, levels: int):
    if isinstance(shape, (int, np.integer)):
        return _Tree1D(int(shape), levels)
    return _Tree2D((int(shape[0]), int(shape[1])), levels)


def pyramid_to_grid(pyr) -> tuple[np.ndarray, object]:
    """Lay pyramid bands onto the flat dyadic grid. Returns (grid, tree)."""
    pyr.validate()
    if isinstance(pyr, WaveletPyramid1D):
        tree = _Tree1D(pyr.original_len, pyr.levels)
        grid = np.zeros(tree.grid_len, dtype=np.float64)
        for (_, sl), band in zip(tree.band_slices(), pyr.bands()):
            grid[sl] = band
        return grid, tree
    tree = _Tree2D(pyr.original_dims, pyr.levels)
    grid = np.zeros((tree.grid_rows, tree.grid_cols), dtype=np.float64)
    for (_, (r0, c0), (rr, cc)), band in zip(tree.band_rects(), pyr.bands()):
        grid[r0: r0 + rr, c0: c0 + cc] = band
    return grid.reshape(-1), tree


def grid_to_pyramid(grid: np.ndarray, tree, shape):
    """Extract pyramid bands back out of the flat dyadic grid."""
    if isinstance(tree, _Tree1D):
        slices = tree.band_slices()
        approx = grid[slices[0][1]].copy()
        details = [grid[sl].copy() for _, sl in slices[1:]]
        return WaveletPyramid1D(tree.levels, approx, details, int(shape))
    g2 = grid.reshape(tree.grid_rows, tree.grid_cols)
    rects = tree.band_rects()
    _, (r0, c0), (rr, cc) = rects[0]
    approx = g2[r0: r0 + rr, c0: c0 + cc].copy()
    details = []
    for i in range(tree.levels):
        sb = {}
        for key, (_, (r0, c0), (rr, cc)) in zip(("lh", "hl", "hh"), rects[1 + 3 * i: 4 + 3 * i]):
            sb[key] = g2[r0: r0 + rr, c0: c0 + cc].copy()
        details.append(sb)
    return WaveletPyramid2D(tree.levels, approx, details, (int(shape[0]), int(shape[1])))


# ---------------------------------------------------------------------------
# Encoder / decoder
# ---------------------------------------------------------------------------

def _check_disjoint(lip, lis, lsp, tree, valid_l):
    """Debug check: LIP, LSP and the members of each LIS set are disjoint.

    A type-A entry's members are all valid descendants of its head; a
    type-B entry's exclude the head's direct children.
    """
    pixels = set(lip)
    assert not (pixels & set(lsp)), "LIP and LSP overlap"
    pixels |= set(lsp)
    seen = set(pixels)
    for g, is_b in lis:
        frontier = list(tree.children(g))
        if is_b:
            frontier = [gc for ch in frontier for gc in tree.children(ch)]
        members = set()
        while frontier:
            node = frontier.pop()
            if valid_l[node]:
                members.add(node)
            frontier.extend(tree.children(node))
        assert not (members & seen), "LIS set overlaps another list"
        seen |= members


def encode(pyr, budget_bits: int, *, check_invariants: bool = False, stats: dict | None = None) -> Bitstream:
    """Encode an integer-valued pyramid into an embedded stream.

    The stream opens with a u8 bit-plane count, then sorting/refinement
    passes from the top plane down. Emission stops exactly at
    ``budget_bits`` unless coding completes losslessly first.
    """
    if budget_bits < 16:
        raise BudgetError(f"budget of {budget_bits} bits cannot hold the stream header")
    grid_f, tree = pyramid_to_grid(pyr)
    ints = np.rint(grid_f).astype(np.int64)
    valid = tree.valid_mask().reshape(-1)
    mag = np.abs(ints)
    mag[~valid] = 0
    neg = (ints < 0).tolist()
    dmax = tree.descendant_max(mag)
    vdesc = tree.descendant_max(valid.astype(np.int8)) > 0
    valid_l = valid.tolist()
    vdesc_l = vdesc.tolist()

    peak = int(mag.max()) if mag.size else 0
    planes = peak.bit_length()
    writer = BitWriter(budget_bits)
    writer.write_uint(planes, 8)

    # invalid root slots (even-rounded container) still head sets of valid
    # descendants, so they join LIS but never LIP
    roots = tree.roots()
    lip = [g for g in roots if valid_l[g]]
    lis = [(g, False) for g in roots if vdesc_l[g]]
    lsp: list[int] = []
    children = tree.children
    plane_end_bits = []

    try:
        for n in range(planes - 1, -1, -1):
            threshold = 1 << n
            refine_upto = len(lsp)

            kept = []
            for g in lip:
                if mag[g] >= threshold:
                    writer.write(1)
                    writer.write(neg[g])
                    lsp.append(g)
                else:
                    writer.write(0)
                    kept.append(g)
            lip = kept

            retained = []
            idx = 0
            while idx < len(lis):
                g, is_b = lis[idx]
                idx += 1
                if not is_b:
                    if dmax[g] >= threshold:
                        writer.write(1)
                        grand = False
                        for ch in children(g):
                            if vdesc_l[ch]:
                                grand = True
                            if not valid_l[ch]:
                                continue
                            if mag[ch] >= threshold:
                                writer.write(1)
                                writer.write(neg[ch])
                                lsp.append(ch)
                            else:
                                writer.write(0)
                                lip.append(ch)
                        if grand:
                            lis.append((g, True))
                    else:
                        writer.write(0)
                        retained.append((g, False))
                else:
                    if max((dmax[ch] for ch in children(g) if vdesc_l[ch]), default=0) >= threshold:
                        writer.write(1)
                        for ch in children(g):
                            if vdesc_l[ch]:
                                lis.append((ch, False))
                    else:
                        writer.write(0)
                        retained.append((g, True))
            lis = retained

            for g in lsp[:refine_upto]:
                writer.write((int(mag[g]) >> n) & 1)

            plane_end_bits.append(writer.total)
            if check_invariants:
                _check_disjoint(lip, lis, lsp, tree, valid_l)
    except _OutOfBits:
        pass

    if stats is not None:
        stats["planes"] = planes
        stats["plane_end_bits"] = plane_end_bits
    return writer.finish()


def decode(bits: Bitstream, shape, levels: int, *, stats: dict | None = None):
    """Decode an embedded stream back to an integer-valued pyramid.

    ``shape`` is the original signal length (1-D) or (rows, cols) (2-D).
    A truncated stream yields a best-effort reconstruction: coefficients
    known only down to plane p carry a mid-rise offset of 2**(p-1).
    """
    tree = _tree_for(shape, levels)
    valid = tree.valid_mask().reshape(-1)
    valid_l = valid.tolist()
    vdesc_l = (tree.descendant_max(valid.astype(np.int8)) > 0).tolist()

    grid_len = valid.size
    base = np.zeros(grid_len, dtype=np.int64)
    known = np.full(grid_len, -1, dtype=np.int64)   # -1: not yet significant
    neg = np.zeros(grid_len, dtype=bool)

    reader = BitReader(bits)
    roots = tree.roots()
    lip = [g for g in roots if valid_l[g]]
    lis = [(g, False) for g in roots if vdesc_l[g]]
    lsp: list[int] = []
    children = tree.children

    try:
        planes = reader.read_uint(8)
        if planes > _MAX_PLANES:
            raise FormatError(f"implausible bit-plane count {planes}")
        for n in range(planes - 1, -1, -1):
            refine_upto = len(lsp)

            kept = []
            for g in lip:
                if reader.read():
                    sign = reader.read()
                    base[g] = 1 << n
                    known[g] = n
                    neg[g] = bool(sign)
                    lsp.append(g)
                else:
                    kept.append(g)
            lip = kept

            retained = []
            idx = 0
            while idx < len(lis):
                g, is_b = lis[idx]
                idx += 1
                if not is_b:
                    if reader.read():
                        grand = False
                        for ch in children(g):
                            if vdesc_l[ch]:
                                grand = True
                            if not valid_l[ch]:
                                continue
                            if reader.read():
                                sign = reader.read()
                                base[ch] = 1 << n
                                known[ch] = n
                                neg[ch] = bool(sign)
                                lsp.append(ch)
                            else:
                                lip.append(ch)
                        if grand:
                            lis.append((g, True))
                    else:
                        retained.append((g, False))
                else:
                    if reader.read():
                        for ch in children(g):
                            if vdesc_l[ch]:
                                lis.append((ch, False))
                    else:
                        retained.append((g, True))
            lis = retained

            for g in lsp[:refine_upto]:
                bit = reader.read()
                if bit:
                    base[g] += 1 << n
                known[g] = n
            if stats is not None:
                stats["planes_completed"] = planes - n
    except _OutOfBits:
        pass

    offset = np.where(known > 0, 1 << np.maximum(known, 1) >> 1, 0)
    values = np.where(known >= 0, base + offset, 0)
    values = np.where(neg, -values, values).astype(np.float64)
    values[~valid] = 0.0
    if stats is not None:
        stats.setdefault("planes_completed", 0)
        stats["bits_consumed"] = reader.pos
    return grid_to_pyramid(values, tree, shape)
