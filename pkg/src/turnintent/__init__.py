"""EEG turn-intention decoding: preprocessing, pre-onset epoching, Hjorth and
statistical features, forest-based feature selection, SVM and boosted-tree
classifiers, and cross-validated lag x window sweeps."""

from .config import PipelineConfig
from .epoching import Epoch, WindowSpec, extract_epochs
from .errors import InsufficientDataError, NumericError, TurnIntentError, ValidationError
from .evaluate import Cell, ConfusionMatrix, CvReport, metrics, run_sweep, stratified_kfold
from .features import FeatureMatrix, featurize, hjorth, stat_features
from .ingest import (EventMarker, Label, MontageTable, Recording, SynthSpec, load_montage, read_markers,
                     read_recording, synthesize, write_markers, write_recording)
from .preprocess import (PreprocessConfig, common_average_reference, detect_flat_channels, highpass,
                         interpolate_channels, preprocess, suppress_bursts)

__version__ = "0.1.0"
