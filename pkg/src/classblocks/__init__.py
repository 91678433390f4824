"""classblocks: diagnose large-class image classifiers through the
hierarchical similarity structure of their classes."""

from .datamodel import (ClassHierarchy, ClassInfo, DatasetBundle, EvaluationSet,
                        HierarchyNode, NeuronShape, ResponseTensor, SampleRecord,
                        flat_hierarchy, hierarchy_from_json, load_bundle,
                        load_hierarchy, load_manifest, load_predictions,
                        load_responses, register_dataset, save_hierarchy,
                        save_predictions, save_responses)
from .errors import (ConsistencyError, DataError, FormatError, SolverError,
                     TruncationError)
from .kernels import KERNEL_BACKEND
from .metrics import (ClassGroup, ConfusionMatrix, FilterSpec, GroupMetrics,
                      GroupSelectionBands, SampleSelection, annotate_hierarchy,
                      build_confusion, filter_samples, group_metrics, node_group,
                      per_class_accuracy, selection_bands, topk_error)
from .seriation import (BlockPartition, barycenter_order, block_outliers,
                        build_hierarchy_recursive, partition_blocks, seriate,
                        spectral_order)
from .responses import (CorrelationView, NeuronRelevance, ResponseMap,
                        ResponseRenderSpec, build_response_map, collective_response,
                        correlation_view, downsample_profile, group_average_response,
                        neuron_relevance, quantile, rank_neurons)
from .probe import (FeatureMatrix, LinearModel, ProbeConfig, extract_features,
                    probe_layer, probe_predictions, train_probe)
from .compare import (ComparisonSpec, EpochSeries, GroupDelta, GroupDeltaReport,
                      epoch_series, evaluate_set_expression, group_deltas,
                      parse_set_expression)

__version__ = "0.1.0"
