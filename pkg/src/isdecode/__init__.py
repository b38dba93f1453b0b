"""Imagined-speech EEG decoding toolkit.

Preprocessing, covariance/tangent-space and CSP features, PCA, a small
feed-forward classifier with bagging, and stratified cross-validation.
"""
from .dataset import (FoldPlan, SynthSpec, TrialSet, load_delimited, load_trialset,
                      reject_amplitude, save_delimited, save_trialset, stratified_kfold,
                      synth_trialset)
from .dsp import (FilterSpec, SpectrogramSpec, dft_features, filter_trials,
                  resample_trials, spectrogram_features, statistical_features, trim_trials)
from .errors import (ConvergenceWarning, DataError, FormatError, NotPositiveDefiniteError,
                     ParameterError, StratificationError, TrainingError)
from .evaluate import (BaggingSpec, EvalReport, FeatureSpec, PipelineSpec, accuracy,
                       chance_level, confusion_matrix, cross_validate, roc_auc, roc_auc_ovr)
from .nn import (AdamState, BaggingModel, MlpModel, NearestClassMean, TrainConfig,
                 adam_step, bagging_train, cross_entropy, load_model, mlp_backward,
                 mlp_forward, mlp_init, predict, predict_proba, save_model, train_mlp)
from .reduce import (PcaModel, Standardizer, export_2d, pca_fit, pca_inverse, pca_transform,
                     read_2d, standardize_apply, standardize_fit)
from .riemann import (distance_riemann, expm, invm, invsqrtm, logm, mean_covariance, spd_eigh,
                      spd_func, sqrtm, tangent_features, tangent_project, tangent_unproject,
                      unvectorize_tangent, vectorize_tangent)
from .spatial import (CspFilters, class_covariances, csp_fit, csp_transform,
                      trial_covariance, trial_covariances, variance_features)

__version__ = "0.1.0"
