"""Physical constants (CODATA 2018, SI).

=====================  ==========================  =========
name                   value                       unit
=====================  ==========================  =========
SPEED_OF_LIGHT         299 792 458 (exact)         m/s
ELEMENTARY_CHARGE      1.602 176 634e-19 (exact)   C
HBAR                   1.054 571 817 646 1e-34     J s
ELECTRON_MASS          9.109 383 701 5e-31         kg
VACUUM_PERMITTIVITY    8.854 187 812 8e-12         F/m
ELECTRON_REST_ENERGY   510 998.950 00              eV
=====================  ==========================  =========
"""

import math

SPEED_OF_LIGHT = 299_792_458.0
ELEMENTARY_CHARGE = 1.602176634e-19
HBAR = 1.0545718176461565e-34
ELECTRON_MASS = 9.1093837015e-31
VACUUM_PERMITTIVITY = 8.8541878128e-12
ELECTRON_REST_ENERGY_EV = 510_998.95000

EV = ELEMENTARY_CHARGE


def wavelength_to_omega(wavelength):
    """Angular frequency (rad/s) of light with the given vacuum wavelength (m)."""
    return 2.0 * math.pi * SPEED_OF_LIGHT / wavelength
