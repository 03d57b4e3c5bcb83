"""Selective-exposure measurement on labeled user-page interaction data."""

from .entropy import (
    EntropyBounds,
    EntropyFrame,
    EntropyRecord,
    bias_entropy,
    decompose,
    entropy_frame,
    entropy_record,
    max_class_entropy,
    max_page_entropy,
    min_page_entropy,
    page_entropy,
    shannon,
    x_statistic,
)
from .errors import ConfigError, DataError, ExposureError
from .model import (
    UNRESOLVED,
    BiasLabel,
    BiasScheme,
    IngestOptions,
    InteractionTable,
    UserVector,
    infer_leaning,
    ingest,
    user_vector,
    write_table,
)
from .nullmodel import RandomizationSpec, monte_carlo_weak, strong_randomize, weak_randomize
from .stats import activity_concentration, ecdf, kl_divergence, quartiles
from .synthgen import CohortSpec, FixedActivity, PowerLawActivity, generate

__version__ = "0.1.0"
