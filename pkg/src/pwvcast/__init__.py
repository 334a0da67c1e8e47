"""GPS wet-delay conversion and LSTM-based water-vapor forecasting."""

from .conversion import (PiFactor, StationMeta, convert_series, day_of_year_utc,
                         pi_factor, zwd_to_pwv)
from .errors import (AlignmentError, CacheError, ConfigError, DomainError,
                     FormatError, NumericError, ParseError, PwvcastError,
                     ShapeError)
from .evaluation import (LeadTimeReport, LeadTimeRow, lead_time_sweep,
                         read_report, rmse, write_report)
from .forecast import (AveragePredictor, ModelPredictor, NaivePredictor,
                       apply_bias_correction, average_forecast, estimate_bias,
                       naive_forecast, predict_iterative, predict_one)
from .lstm import (DenseParams, LstmLayerParams, LstmModel, ModelGradients,
                   backward, init_model, lstm_forward, model_forward,
                   with_normalization)
from .modelio import load_model, save_model
from .series import (SplitSet, TimeSeries, WindowSet, chrono_split, export_csv,
                     ingest_csv, make_windows, segment_gaps)
from .training import (AdamState, TrainConfig, adam_step, gradient_check,
                       huber_loss, lr_schedule, train)

__version__ = "0.1.0"
