"""Audio-only advertisement detection in broadcast television.

Low-energy frames are merged into silence events, each event is scored by a
linear regression over statistics of its surrounding energy, and accepted
boundary silences are chained into advertising regions.
"""

from adsilence.ad_grouping import AdRegion, GroupingParams, group_boundaries, regions_to_frame_labels
from adsilence.audio_ingest import AudioSignal, FrameSequence, decode_wav, downmix_to_mono, frame_signal
from adsilence.boundary_regression import (
    CrossValReport,
    LabelledExample,
    Programme,
    RegressionModel,
    classify_silences,
    cross_validate,
    fit_ols,
    label_events,
    load_model,
    predict,
    save_model,
)
from adsilence.energy_analysis import (
    EnergyTrack,
    SilenceEvent,
    detect_silence_frames,
    energy_track,
    frame_energy_db,
    merge_silence_events,
)
from adsilence.evaluation import (
    AnnotationTrack,
    ConfusionCounts,
    confusion_counts,
    mcc,
    parse_annotations,
    precision_recall_f1,
)
from adsilence.silence_features import ContextWindow, FeatureVector, context_window, extract_features

__version__ = "0.1.0"
