"""Recordings, labeling protocol, spectrogram features and the synthetic generator."""

from seizurecast.data.dataset import DatasetSplit, PatientData, WindowSet, split_dataset
from seizurecast.data.features import spectrogram, spectrogram_frequencies
from seizurecast.data.labeling import (
    INTERICTAL,
    PREICTAL,
    LabeledWindow,
    label_windows,
    leading_seizures,
)
from seizurecast.data.recording import EEGRecording, load_recording, save_recording
from seizurecast.data.synth import SyntheticSpec, synthesize_dataset

__all__ = [
    "INTERICTAL",
    "PREICTAL",
    "DatasetSplit",
    "EEGRecording",
    "LabeledWindow",
    "PatientData",
    "SyntheticSpec",
    "WindowSet",
    "label_windows",
    "leading_seizures",
    "load_recording",
    "save_recording",
    "spectrogram",
    "spectrogram_frequencies",
    "split_dataset",
    "synthesize_dataset",
]
