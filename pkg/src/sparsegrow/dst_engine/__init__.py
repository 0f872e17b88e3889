from .distributions import UnitDistributions, build_distribution, sample_signs
from .flops import RESNET50, FlopsEstimate, FlopsLayer, flops_estimate, gse_rigl_ratio, resnet50_schedule
from .growth import (
    RoundReport,
    SubsetSample,
    global_coordination,
    grow_prune_step,
    rigl_grow_step,
    sample_candidates,
    sample_connections,
    set_grow_step,
)
from .init import (
    InfeasibleSparsityError,
    erdos_renyi_init,
    layer_counts,
    random_connection_set,
    solve_epsilon,
    sparse_connection_sets,
    target_count,
    uniform_layer_counts,
)
from .schedule import (
    GSE_GRABO,
    GSE_GRAEST,
    GSE_STRATEGIES,
    GSE_UNIFORM,
    RIGL_DENSE,
    SET_RANDOM,
    STATIC,
    STRATEGIES,
    PruneGrowSchedule,
    ScheduleExpired,
    check_strategy,
    cosine_decay,
)
