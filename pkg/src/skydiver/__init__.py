"""Spiking CNN accelerator workload model: functional SNN, full-padding
workload prediction, channel-balanced scheduling and cycle accounting."""

from .accel import HwConfig, Schedule, SimReport, assign_schedule, balance_ratio, simulate, throughput_estimate
from .aprc import apply_aprc, channel_dv_sums, filter_magnitude, predict_channel_workload, proportionality_report
from .cbws import Partition, cbws_partition, optimal_partition_oracle, partition_stats
from .errors import BudgetError, ConfigError, FormatError, NumericDomainError, SkydiverError
from .snn import LayerSpec, NetworkSpec, NeuronState, SpikeTrain, conv_dv, layer_forward, lif_step, network_forward, rate_encode

__version__ = "0.1.0"
