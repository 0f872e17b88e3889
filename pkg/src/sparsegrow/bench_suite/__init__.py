from .bench import (
    CSV_COLUMNS,
    DEFAULT_SIZES,
    DEFAULT_SPARSITIES,
    FORMATS,
    BenchCase,
    BenchResult,
    crossover_report,
    format_crossover,
    random_sparse_matrix,
    run_bench,
    sweep_cases,
    write_csv,
)
