"""Reduced-model PID/FOPID tuning toolkit.

Submodules
----------
lti         rational transfer functions, dead time, the process test bench
reduction   FOPTD/SOPTD fitting objectives and GA-driven reduction
ga          real-coded genetic algorithm used by reduction and tuning
simulation  fractional closed-loop simulator and the time-domain tuning cost
gp          expression-tree genetic programming (single and multi gene)
rules       published correlation-style tuning rules and their evaluators
robustness  perturbed-plant corner sweeps for a fixed controller
pipeline    file-based stage runner behind the ``fractune`` CLI
"""

__version__ = "0.1.0"
