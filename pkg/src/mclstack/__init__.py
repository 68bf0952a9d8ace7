"""Markov clustering on pluggable SpGEMM kernels with a simulated 2D SUMMA grid."""

from .estimate import (EstimateMethod, EstimatorConfig, KeySketch, NnzEstimate, choose_estimator,
                       estimate_nnz, exact_symbolic_nnz, gen_keys, propagate_min)
from .estimator import MarkovClustering
from .exceptions import (BudgetInfeasibleError, DimensionMismatchError, GraphParseError,
                         MatrixFormatError)
from .kernels import (KernelChoice, KernelKind, SelectorThresholds, hash_spgemm_numeric,
                      hash_spgemm_symbolic, heap_spgemm, select_kernel)
from .mcl import (ClusterAssignment, IterationStats, MclParams, connected_components, inflate,
                  mcl_cluster, mcl_iterate, prune)
from .merge import (BinaryMergeAccumulator, IntermediateList, MergeCounters, binary_merge,
                    multiway_merge, two_way_merge)
from .phases import PhasePlan, phased_expand, plan_phases
from .pipeline import PipelineMode, StageCosts, TimelineReport, simulate_pipeline
from .sparse import (CscMatrix, DcscMatrix, MultiplyStats, TripleList, csc_from_dcsc,
                     dcsc_from_csc, from_triples, make_column_stochastic, multiply_stats)
from .summa import (BlockMatrix, CostModel, GridConfig, MergeScheme, partition, reassemble,
                    summa_multiply)

__version__ = "0.1.0"
