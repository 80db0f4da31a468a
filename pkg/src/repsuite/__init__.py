"""Representativeness evaluation for LLM-simulated survey responses.

The library compares model-generated answer distributions against
weighted human survey data on two levels: per-question marginal
distances (normalized Wasserstein for ordinal scales, total variation
for nominal ones) and the correlation structure of subgroup response
means across questions or topics. Permutation nulls and split-half
resampling calibrate the structural similarity between a noise floor
and a sampling-error ceiling.
"""

__version__ = "0.1.0"

from .calibration import BoundEstimate, permutation_null, seeded_rng, split_half
from .distributions import (
    ResponsePanel,
    aggregate_by_dimension,
    aggregate_by_topic,
    ground_truth_distribution,
    simulated_distribution,
    write_distributions_csv,
)
from .errors import (
    CatalogError,
    DegenerateScaleError,
    DegenerateStructureError,
    EmptyDistributionError,
    IngestError,
    InsufficientRowsError,
    NoComparableQuestionsError,
    OracleScaleExceededError,
    RepsuiteError,
    SimulationError,
    SupportMismatchError,
    WrongScaleKindError,
)
from .ingestion import (
    clean_generation,
    parse_human_responses,
    parse_simulation_log,
    presented_options,
    unflip_response,
)
from .marginal import (
    invalid_rate,
    mean_dissimilarity,
    mean_variance,
    modal_collapse_count,
    modal_collapse_questions,
    normalized_variance,
    per_question_distance,
    total_variation,
    wasserstein_normalized,
)
from .model import (
    Catalog,
    CorrelationArtifacts,
    FilterClause,
    Level,
    MeanMatrix,
    QuestionSpec,
    ResponseDistribution,
    ResponseOption,
    ResponseRecord,
    ScaleKind,
    SimulatedSample,
    StructureComparison,
    SubgroupSpec,
    dump_catalog,
    load_catalog,
    parse_model_id,
    validate_catalog,
)
from .report import (
    EvalReport,
    compute_bounds,
    evaluate_run,
    report_csv_sidecars,
    report_json_schema,
    write_report_files,
)
from .sampler import (
    ModelTask,
    SamplerConfig,
    SimulationSummary,
    build_prompt,
    flip_flags,
    persona_paragraph,
    run_simulation,
    sample_question,
)
from .structure import (
    correlation_matrix,
    mean_matrix,
    structure_similarity,
    upper_triangle,
)
from .synth import (
    SynthConfig,
    SyntheticPopulation,
    brute_force_transport,
    column_permutations,
    generate_population,
    perfect_model_sampler,
    samples_from_distribution,
    synth_catalog,
    write_population_files,
    write_simulation_log,
)

__all__ = [
    "BoundEstimate",
    "Catalog",
    "CatalogError",
    "CorrelationArtifacts",
    "DegenerateScaleError",
    "DegenerateStructureError",
    "EmptyDistributionError",
    "EvalReport",
    "FilterClause",
    "IngestError",
    "InsufficientRowsError",
    "Level",
    "MeanMatrix",
    "ModelTask",
    "NoComparableQuestionsError",
    "OracleScaleExceededError",
    "QuestionSpec",
    "RepsuiteError",
    "ResponseDistribution",
    "ResponseOption",
    "ResponsePanel",
    "ResponseRecord",
    "SamplerConfig",
    "ScaleKind",
    "SimulatedSample",
    "SimulationError",
    "SimulationSummary",
    "StructureComparison",
    "SubgroupSpec",
    "SupportMismatchError",
    "SynthConfig",
    "SyntheticPopulation",
    "WrongScaleKindError",
    "__version__",
    "aggregate_by_dimension",
    "aggregate_by_topic",
    "brute_force_transport",
    "build_prompt",
    "clean_generation",
    "column_permutations",
    "compute_bounds",
    "correlation_matrix",
    "dump_catalog",
    "evaluate_run",
    "flip_flags",
    "generate_population",
    "ground_truth_distribution",
    "invalid_rate",
    "load_catalog",
    "mean_dissimilarity",
    "mean_matrix",
    "mean_variance",
    "modal_collapse_count",
    "modal_collapse_questions",
    "normalized_variance",
    "parse_human_responses",
    "parse_model_id",
    "parse_simulation_log",
    "per_question_distance",
    "perfect_model_sampler",
    "permutation_null",
    "persona_paragraph",
    "presented_options",
    "report_csv_sidecars",
    "report_json_schema",
    "run_simulation",
    "sample_question",
    "samples_from_distribution",
    "seeded_rng",
    "simulated_distribution",
    "split_half",
    "structure_similarity",
    "synth_catalog",
    "total_variation",
    "unflip_response",
    "upper_triangle",
    "validate_catalog",
    "wasserstein_normalized",
    "write_distributions_csv",
    "write_population_files",
    "write_report_files",
    "write_simulation_log",
]
