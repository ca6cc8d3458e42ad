from .annotate import annotate, annotate_cohort
from .generator import (
    CLOPIDOGREL_CODES, TF_CODES, GeneratorConfig, center_sizes, generate_cohort,
)
from .split import partition_by_center, stratified_split, stratum_test_count
