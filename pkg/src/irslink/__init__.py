"""Link-level simulator and optimizer for IRS-aided indoor mmWave MU-MIMO-OFDM.

Pipeline: scenario geometry -> channel synthesis -> hybrid beamforming ->
IRS phase optimization (conjugate gradient on the unit-modulus manifold) ->
SINR / rate -> delay -> multi-attribute utility, with batch sweeps over
codebook configurations and IRS sizes.
"""

from irslink.scenario import (
    Scenario,
    IrsPanel,
    SystemParams,
    CodebookScenario,
    load_scenario,
)

__all__ = [
    "Scenario",
    "IrsPanel",
    "SystemParams",
    "CodebookScenario",
    "load_scenario",
]

__version__ = "0.1.0"
