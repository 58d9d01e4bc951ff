"""Marker-controlled watershed segmentation of OCT B-scans, with synthetic phantoms and oracles."""

from .contour import ChanVeseParams, chan_vese
from .imgcore import Connectivity, read_gray
from .morph import StructuringElement
from .octsim import hann1d, hann2d, reconstruct_ascan, synth_interferogram, synth_phantom
from .pipeline import PipelineConfig, SegmentationReport, boundary_f1, metrics, overseg_ratio, run_baseline, run_modified
from .watershed import flooding_oracle, marker_watershed, watershed_vs

__version__ = "0.1.0"
