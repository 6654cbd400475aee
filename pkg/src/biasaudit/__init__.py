"""biasaudit: subgroup bias auditing for regression models.

Library surface: cohort ingestion and partition, the hypothesis-test
battery, balanced resampling, PCA/KDE feature inspection, synthetic
cohort generation, and the end-to-end audit pipeline with SVG/CSV
reporting. See the CLI (``biasaudit --help``) for the batch workflow.
"""

__version__ = "0.1.0"

from .cohort import (
    Race,
    Sex,
    SubgroupKey,
    SubgroupPartition,
    SubjectRecord,
    SUBGROUP_ORDER,
    absolute_error,
    attach_features,
    harmonize_race,
    load_cohort_csv,
    load_features_binary,
    load_features_csv,
    mae,
    partition,
    save_cohort_csv,
    save_features_binary,
)
from .errors import AuditError, ConfigError, DataError, DegenerateDataError
from .featspace import (
    AgeBracketing,
    FeatureMatrix,
    KdeCurve,
    PcaModel,
    ShiftTable,
    bracket_ages,
    equal_width_brackets,
    feature_shift_tests,
    kde,
    pca_fit,
    pca_project,
)
from .hyptest import (
    PairwiseResults,
    TestResult,
    benjamini_yekutieli,
    conover_iman,
    kruskal_wallis,
    ks_two_sample,
    levene,
    rank_midtie,
    shapiro_wilk,
)
from .pipeline import (
    AuditConfig,
    AuditReport,
    assemble_report,
    build_provenance,
    report_to_dict,
    report_to_json,
    run_feature_audit,
    run_performance_audit,
)
from .resample import BalancedSample, RepeatedMaeSummary, balanced_sample, repeated_subgroup_mae
from .synth import (
    CohortSpec,
    FeatureSpec,
    GroupSpec,
    default_cohort_spec,
    folded_normal_mean,
    generate_cohort,
    null_cohort_spec,
    spec_from_json,
    spec_to_json,
)
