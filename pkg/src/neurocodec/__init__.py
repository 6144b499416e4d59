"""neurocodec: multichannel EEG lossy compression with detection-aware evaluation.

Three codecs behind one container format: a 2-D wavelet/SPIHT coder over the
channel-time matrix, a per-channel dynamic-dictionary coder keyed on brain
rhythm energies (with built-in burst flagging), and a dipole-fitting coder
that models channels as projections of a single intracranial source.
Evaluation covers PRD/rate metrics and flag-overlap detection scoring.
"""

from .errors import (
    BudgetError,
    FitError,
    FormatError,
    MetricError,
    NeurocodecError,
    RangeError,
    SizeError,
    StructureError,
)
from .ingest import (
    FlagSection,
    Recording,
    SignalMatrix,
    read_edf,
    read_flags,
    read_raw,
    read_recording,
    slice_recording,
    write_edf,
    write_flags,
    write_raw,
)
from .wavelet import (
    BandEnergyVector,
    WaveletPyramid1D,
    WaveletPyramid2D,
    band_energies,
    dwt1d,
    dwt2d,
    idwt1d,
    idwt2d,
)
from .spiht import Bitstream, decode, dequantize, encode, quantize
from .container import CompressedRecord, read_records, write_records
from .metrics import RateDistortionPoint, prd, rd_point
from . import codec_dictionary, codec_dipole, codec_spiht2d
from .codecs import compress, decompress
from .detection import DetectionReport, aggregate, detect, match_flags

__version__ = "0.1.0"

__all__ = [
    "BandEnergyVector", "Bitstream", "BudgetError", "CompressedRecord",
    "DetectionReport", "FitError", "FlagSection", "FormatError", "MetricError",
    "NeurocodecError", "RangeError", "RateDistortionPoint", "Recording",
    "SignalMatrix", "SizeError", "StructureError", "WaveletPyramid1D",
    "WaveletPyramid2D", "aggregate", "band_energies", "codec_dictionary",
    "codec_dipole", "codec_spiht2d", "compress", "decode", "decompress",
    "dequantize", "detect", "dwt1d", "dwt2d", "encode", "idwt1d", "idwt2d",
    "match_flags", "prd", "quantize", "rd_point", "read_edf", "read_flags",
    "read_raw", "read_recording", "read_records", "slice_recording",
    "write_edf", "write_flags", "write_raw", "write_records",
]
