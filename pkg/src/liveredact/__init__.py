"""liveredact: real-time PII redaction for two-channel call audio.

Detects spoken numeric entities from streaming partial hypotheses, masks
the matching audio with a beep before it reaches the agent side, and
captures each entity's canonical value. Ships with a deterministic
replay decoder, a synthetic annotated-corpus generator, and an
evaluation harness (WER/SER, exact-boundary entity P/R, mask coverage,
leak-cause attribution).
"""

from .audio import (
    AGENT,
    CALLER,
    BeepConfig,
    MaskSpan,
    PcmBuffer,
    apply_masks,
    mulaw_decode,
    mulaw_encode,
    read_wav,
    write_wav,
)
from .corpus import CallBundle, EntityAnnotation, GenConfig, generate_corpus, load_corpus, save_corpus
from .decoder import (
    DecoderSimConfig,
    ErrorModel,
    ErrorRates,
    PartialHypothesis,
    TimedWord,
    hyp_diff,
    replay_decode,
)
from .entities import DEFAULT_SENSITIVE, EntityType
from .metrics import EvalReport, entity_prf, evaluate_run, mask_coverage, ser, wer
from .nlu import (
    DialogState,
    LogRegModel,
    NluContext,
    OracleClassifier,
    TrainedClassifier,
    build_vocabulary,
    extract_features,
    load_model,
    predict,
    save_model,
    self_train,
    train,
)
from .numwords import (
    CanonicalValue,
    NumberLexicon,
    aba_check,
    luhn_check,
    verbalize,
    words_to_digits,
)
from .redactor import EntityCapture, LiveAudioRedactor, RedactionEvent
from .session import SessionConfig, SessionOutput, measure_rtf, redact_transcript, run_session
from .training import contexts_from_corpus, train_from_corpus
from .vad import VadConfig, VadState, classify_frame, segment, silence_duration

__version__ = "0.1.0"
