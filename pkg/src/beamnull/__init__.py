"""Decentralized interference-aware analog beam codebook learning.

Multiple non-cooperating base stations learn phase-shifter codebooks
from local power measurements only: averaged interference estimates
feed a threshold decision rule and a binary reward, and each codebook
beam trains its own agent with zero information exchange between
stations.
"""

__version__ = "0.1.0"

from .beams import (Codebook, PhaseSet, QuantizedBeam, beam_from_indices,
                    beam_pattern, beam_training_select, beamforming_gain,
                    beamsteering_codebook)
from .channels import (ArrayGeometry, InterferenceChannel, InterferencePath,
                       PathComponent, PathSet, Scenario, array_response,
                       associate_users, generate_two_bs_scenario,
                       load_channel_dataset, save_channel_dataset,
                       synth_channel, synth_interference_matrix)
from .config import ConfigError, ScenarioConfig, parse_config
from .measurement import (DecisionThreshold, Hypothesis, MeasurementSet,
                          cluster_average_gain, decide_better, estimate_gain,
                          estimate_expected_interference, measure_interference,
                          measure_signal_plus_interference)
from .theory import (MultipathProjection, build_projection,
                     check_ordering_condition, check_ratio_limit,
                     check_spectrum_bounds, coupling_norm,
                     coupling_norm_asymptotics,
                     expected_interference_closed_form, resolution_factor)

__all__ = [name for name in dir() if not name.startswith("_")]
