"""Planted-effect reproduction of the structured-vs-sentiment comparison."""

from .config import default_config, load_config, parse_config
from .generator import (
    POOLS,
    Cohort,
    GeneratedFiles,
    GeneratorConfig,
    generate,
    generate_cohort,
    pool_agreement,
    write_cohort,
)
from .pipeline import (
    JOIN_POLICIES,
    REFERENCE_R2,
    ComparisonReport,
    ExperimentConfig,
    ExperimentError,
    ExperimentResult,
    IntegratedRun,
    SeedResult,
    SeedRun,
    compare,
    load_feedback,
    load_records,
    run_experiment,
    run_model1,
    run_model2,
    run_model3,
    run_seed,
)
from .report import render_text, write_report
