"""Reproducible experiments, statistics and persistence."""
from .experiments import (ExperimentError, ExperimentResult, centering_grid, cp_approx_experiment,
                          inverse_subordinator_diagnostic, lil_grid, run_bm_lil_experiment,
                          run_clt_experiment, run_experiment, run_lil_experiment,
                          theta_invariance_check)
from .records import (SCHEMA_VERSION, ExperimentManifest, ManifestError, ResultRecord,
                      SchemaVersionError, load, load_metadata, parse_int_grid, parse_number_list,
                      persist, records_to_csv)
from .stats import ks_statistic, ks_two_sample
from .streams import make_stream, stream_id
