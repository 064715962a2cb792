"""vbfi: image-preference personality testing.

Train view-restricted boosted regression trees on per-concept image
preferences, compile them into a choose-your-favorite-image questionnaire,
and score responses.
"""

from .boosting import (BoostingConfig, VgbdtModel, VgbdtRegressor, load_model,
                       save_model, train_vgbdt)
from .clustering import (ApCluster, ApConfig, ApResult, affinity_propagation,
                         similarity_matrix)
from .concepts import (ConceptHierarchy, ConceptIndex, ViewMatrix, build_index,
                       build_views, co_favored_concepts, eligible_concepts,
                       expand_concepts)
from .dataset import (TRAITS, DataError, Dataset, ImageRecord, UserRecord,
                      load_dataset, save_dataset, validate_dataset)
from .evaluation import CvReport, cross_validate, paired_significance, rmse, sweep
from .questionnaire import (DesignError, Questionnaire, ResponseSheet,
                            design_questionnaire, load_questionnaire,
                            render_manifest, save_questionnaire, score_response)
from .synth import SynthSpec, generate_synthetic
from .tree import CartRegressor, RegressionTree, fit_tree

__version__ = "0.1.0"

__all__ = [
    "ApCluster", "ApConfig", "ApResult", "BoostingConfig", "CartRegressor",
    "ConceptHierarchy", "ConceptIndex", "CvReport", "DataError", "Dataset",
    "DesignError", "ImageRecord", "Questionnaire", "RegressionTree",
    "ResponseSheet", "SynthSpec", "TRAITS", "UserRecord", "VgbdtModel",
    "VgbdtRegressor", "ViewMatrix", "affinity_propagation", "build_index",
    "build_views", "co_favored_concepts", "cross_validate",
    "design_questionnaire", "eligible_concepts", "expand_concepts", "fit_tree",
    "generate_synthetic", "load_dataset", "load_model", "load_questionnaire",
    "paired_significance", "render_manifest", "rmse", "save_dataset",
    "save_model", "save_questionnaire", "score_response", "similarity_matrix",
    "sweep", "train_vgbdt", "validate_dataset",
]
