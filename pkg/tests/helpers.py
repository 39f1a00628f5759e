"""Small builders shared by the test modules."""
import numpy as np

from omrkit.agents import OMRSeller, SUMSeller
from omrkit.sketch import GridSpec, SketchBank, enumerate_sketch_set
from omrkit.seeds import SeedStreams


def toy_bank(T, step=0.5, m=2, smax=1):
    g = GridSpec.coarse(step, m, smax)
    return SketchBank(enumerate_sketch_set(T, grid=g, cap=10 ** 6), g)


def omr(bank, T, streams: SeedStreams):
    return OMRSeller(bank, T, streams.rng("expert-sampling"))


def sum_seller(bank, T, streams: SeedStreams, **kw):
    return SUMSeller(bank, T, kw.pop("epsilon", 0.25), kw.pop("gamma_bar", 0.5),
                     expert_rng=streams.rng("expert-sampling"),
                     omega_rng=streams.rng("seller-omega"),
                     lambda_rng=streams.rng("seller-lambda"),
                     xi_rng=streams.rng("seller-xi"), **kw)


def e(d, i=0):
    x = np.zeros(d)
    x[i] = 1.0
    return x
