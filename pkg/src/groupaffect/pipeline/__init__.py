"""Dataset manifests, file formats, run configuration and the end-to-end run."""

from .audit import find_leaks, provenance_ids
from .config import ConfigError, RunConfig, derive_seed, load_config
from .features import (ConfigHashMismatch, FeatureFileError, FeatureMatrix, load_entity_features,
                       write_entity_features)
from .fixture import complementary_experts, fixture_config, make_fixture
from .manifest import DatasetManifest, ManifestError, ManifestRow, load_manifest, write_manifest
from .report import export_report, format_table, load_report
from .run import STAGES, PipelineError, Run, run_pipeline

__all__ = [
    "ConfigError", "ConfigHashMismatch", "DatasetManifest", "FeatureFileError", "FeatureMatrix",
    "ManifestError", "ManifestRow", "PipelineError", "Run", "RunConfig", "STAGES",
    "complementary_experts", "derive_seed", "export_report", "find_leaks", "fixture_config",
    "format_table", "load_config", "load_entity_features", "load_manifest", "load_report",
    "make_fixture", "provenance_ids", "run_pipeline", "write_entity_features", "write_manifest",
]
