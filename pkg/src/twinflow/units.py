"""Reduced Lennard-Jones units and the mapping to physical units.

Everything in the simulation modules is expressed in reduced units with
epsilon = sigma = m = k_B = 1.  The tables below give the conversion
factors for a few concrete substances so that reduced results can be
read in SI when needed.  Only the closed-form calculators in
:mod:`twinflow.estimators` work directly in SI.
"""

import scipy.constants as _const

KB = _const.k  # J/K
AVOGADRO = _const.N_A

# Molecular masses in kg.
MASS_KG = {
    "water": 18.01528e-3 / AVOGADRO,
    "argon": 39.948e-3 / AVOGADRO,
}

# LJ parameter sets used to translate reduced units to SI.
# sigma [m], epsilon [J], mass [kg]; tau = sigma*sqrt(mass/epsilon).
LJ_MAPPING = {
    "argon": {
        "sigma": 3.405e-10,
        "epsilon": 119.8 * KB,
        "mass": MASS_KG["argon"],
    },
}


def tau_seconds(substance="argon"):
    """Reduced time unit in seconds for a given LJ mapping."""
    p = LJ_MAPPING[substance]
    return p["sigma"] * (p["mass"] / p["epsilon"]) ** 0.5


def spring_reduced(k_si, substance="argon"):
    """Convert a spring stiffness in N/m to reduced energy/length^2.

    A 2.7 N/m tether maps to roughly 190 for the argon parameter set.
    """
    p = LJ_MAPPING[substance]
    return k_si * p["sigma"] ** 2 / p["epsilon"]
