"""EEG-to-EMG decoding pipeline with real-time virtual-elbow control."""

__version__ = "0.1.0"
