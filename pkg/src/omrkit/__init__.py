"""Simulation and verification toolkit for online contextual pricing from bids.

The sellers learn a linear posted-price policy ``w`` from buyers' bids: one
assumes truthful buyers (expert reduction over sparse sketches), the other
adds random pricing and sparse learner updates to stay robust to strategic
buyers.  ``analysis`` holds stand-alone checks of the supporting
inequalities.
"""
from .core import (TOL, DiscountProfile, RoundPartition, RoundTrace, buyer_utility,
                   discounted_utility, inner_product, project_to_ball, revenue)
from .sketch import (GridSpec, Sketch, SketchBank, SketchDictionary, construct_sketch,
                     count_sketch_set, enumerate_sketch_set, lazy_ogd_step, online_sketch,
                     reconstruct)
from .experts import Hedge, SparseGate, SparseWrapped, expert_regret
from .agents import (CopyPriceSeller, FixedWeightSeller, OMRSeller, SUMSeller, Shade,
                     ThresholdDeceiver, Truthful, compute_delta, compute_rho)
from .environment import FixedEnvironment, IIDEnvironment, PriceTracker, ContextRotation
from .protocol import OptOracleConfig, opt_hindsight, regret, run_protocol, sreg_estimate
from .seeds import SeedStreams

__version__ = "0.1.0"
