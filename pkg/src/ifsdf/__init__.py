"""Neural signed distance fields fitted to point clouds with implicit bilateral filtering."""
__version__ = "0.1.0"

from .geom import (InputError, NormalizationTransform, PointCloud, QueryBatch, build_query_batch,
                   denormalize, knn, knn_batch, normalize, sample_queries)
from .net import (CheckpointError, MlpField, SdfSample, eval, eval_batch, geometric_init,
                  load_checkpoint, save_checkpoint)
from .autodiff import (TrainingError, grad_params_of_input_gradient, grad_params_of_loss,
                       grad_params_of_value)
from .filter import (LOSS_COMBOS, DegenerateGradientError, FilterConfig, average_filter_baseline,
                     bilateral_distance, combo_config, loss_cd, loss_dist, loss_field, loss_pull,
                     loss_zero, project_neighbors, pull, total_loss, weight_normal, weight_spatial)
from .trainer import AdamState, TrainConfig, TrainLog, adam_step, train
from .mesher import EmptyMeshWarning, GridSpec, Mesh, marching_cubes, sample_mesh_surface
from .metrics import (MetricsReport, chamfer, edge_chamfer, edge_points, evaluate, f_score,
                      hausdorff, normal_consistency, one_sided_chamfer, one_sided_hausdorff)
from .config import RunConfig, load_config
