"""Differential-evolution clustering of mixed categorical and continuous data."""
from .baselines import HierConfig, LloydConfig, hierarchical_cluster, lloyd_cluster
from .bench import BenchSpec, DatasetRef, RunReport, run_bench
from .core import CentroidMatrix, ClusteringResult, DekConfig, decode, encode, objective, run_dek
from .dataset import ColumnSpec, Dataset, MixedPoint, Schema, load_dataset, normalize
from .de import DEConfig
from .gower import cross_distances, gower_distance, pairwise_matrix
from .metrics import MetricReport, evaluate
from .selection import SseCurve, pick_elbow, sweep_k
from .synth import SynthSpec, adjusted_rand_index, generate

__version__ = "0.1.0"
