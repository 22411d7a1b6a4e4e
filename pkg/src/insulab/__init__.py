"""Numerical laboratory for optimal boundary insulation on planar domains.

The package computes minimizers and concentration-breaking thresholds for
two variational problems from thermal insulation: maximizing heat content
and minimizing the rate of temperature decay.  Discrete solutions on
triangulated domains are cross-checked against closed-form radial results
on disks, balls and annuli.
"""

__version__ = "0.1.0"
