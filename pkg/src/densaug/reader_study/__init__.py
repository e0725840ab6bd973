from .scoring import (
    CHOICE_PROBABILITIES,
    StudyResponse,
    StudyScoreTable,
    choice_to_probability,
    score_study,
)
from .service import create_app, serve
from .stimuli import StudyConfig, Stimulus, build_stimulus_set, load_stimuli, reader_order
from .store import DuplicateResponseError, ResponseStore, UnknownStimulusError

__all__ = [
    "CHOICE_PROBABILITIES",
    "StudyResponse",
    "StudyScoreTable",
    "choice_to_probability",
    "score_study",
    "create_app",
    "serve",
    "StudyConfig",
    "Stimulus",
    "build_stimulus_set",
    "load_stimuli",
    "reader_order",
    "DuplicateResponseError",
    "ResponseStore",
    "UnknownStimulusError",
]
