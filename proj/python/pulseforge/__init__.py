"""PPG-to-blood-pressure estimation toolkit.

Thin Python veneer over the native core. In an installed wheel the
extension lives inside this package; in a development tree it sits in the
CMake build directory and is picked up via PYTHONPATH.
"""

try:
    from . import _pulseforge as _core
except ImportError:  # development layout: extension next to the build tree
    import _pulseforge as _core

PulseforgeError = _core.PulseforgeError

design_bandpass = _core.design_bandpass
filtfilt = _core.filtfilt
moving_average = _core.moving_average
synthesize = _core.synthesize
second_derivative = _core.second_derivative
extract_cycles = _core.extract_cycles
metrics = _core.metrics
aami_check = _core.aami_check
bhs_grade = _core.bhs_grade
bland_altman = _core.bland_altman
predict = _core.predict
dataset_summary = _core.dataset_summary

__all__ = [
    "PulseforgeError",
    "design_bandpass",
    "filtfilt",
    "moving_average",
    "synthesize",
    "second_derivative",
    "extract_cycles",
    "metrics",
    "aami_check",
    "bhs_grade",
    "bland_altman",
    "predict",
    "dataset_summary",
]
