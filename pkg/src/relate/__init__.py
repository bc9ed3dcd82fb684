"""Schema-agnostic encoder for multi-table relational data.

Rows of arbitrary relational databases become fixed-size node embeddings
through shared per-modality cell encoders, column-metadata conditioning,
and latent cross-attention aggregation, with a schema-specific baseline
encoder and parameter audit alongside for comparison.
"""

from .autodiff import Tensor, backward, grad_check, no_grad
from .baseline import StandardConfig, StandardEncoder, audit_parameters
from .config import RunConfig, load_config
from .database import RelationalDatabase, load_database
from .encoder import RelateEncoder
from .features import FoneConfig
from .gnn import GnnConfig, TypedMeanGnn
from .graph import HeteroTemporalGraph, build_graph
from .metrics import evaluate, mae, roc_auc
from .optim import AdamW
from .params import ParameterStore
from .perceiver import PerceiverConfig
from .schema import SchemaManifest, parse_manifest
from .synth import SyntheticDbSpec, generate_synthetic_db, schema_family
from .text import TokenTable, load_demo_table
from .training import TaskSpec, train

__version__ = "0.1.0"

__all__ = [
    "AdamW",
    "FoneConfig",
    "GnnConfig",
    "HeteroTemporalGraph",
    "ParameterStore",
    "PerceiverConfig",
    "RelateEncoder",
    "RelationalDatabase",
    "RunConfig",
    "SchemaManifest",
    "StandardConfig",
    "StandardEncoder",
    "SyntheticDbSpec",
    "TaskSpec",
    "Tensor",
    "TokenTable",
    "TypedMeanGnn",
    "audit_parameters",
    "backward",
    "build_graph",
    "evaluate",
    "generate_synthetic_db",
    "grad_check",
    "load_config",
    "load_database",
    "load_demo_table",
    "mae",
    "no_grad",
    "parse_manifest",
    "roc_auc",
    "schema_family",
    "train",
]
