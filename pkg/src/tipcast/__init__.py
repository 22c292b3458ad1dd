"""tipcast: tipping-point corpora, early-warning baselines, and evaluation."""

from .systems import (ArgumentError, NamedModel, NormalForm, NumericError,
                      PolynomialSystem2D, TipcastError, eval_rhs, jacobian,
                      sample_random_system, MODEL_IDS)
from .integrate import (DivergenceError, NoiseSpec, RampSpec, Trajectory,
                        ar1_series, converge_to_equilibrium,
                        euler_maruyama_run, euler_run)
from .bifurcation import (EquilibriumBranch, TippingLabel, continue_branch,
                          label_tipping_from_run, locate_crossing,
                          recovery_rate)
from .preprocess import (RawSample, TrainingInstance, irregular_sample,
                         linear_interpolate_regular, lowess_detrend,
                         zero_and_normalize)
from .ews import (IndicatorSeries, SmapConfig, bb_estimate,
                  degenerate_fingerprinting, dev, extrapolate_tipping,
                  indicator_series)
from .evaluate import (PredictionResult, aggregate, compare_methods,
                       relative_error)
from .pipeline import (CorpusConfig, generate_corpus, generate_test_suite,
                       make_null_corpus)

__version__ = "0.1.0"
