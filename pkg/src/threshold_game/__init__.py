"""Threshold policies against strategic score manipulation and improvement.

The package is organized as a stack of small modules:

* ``distkit``        densities, quadrature, and stochastic-order checks
* ``agent_response`` best-response partition of the feature axis
* ``post_strategic`` population statistics after agents have moved
* ``firm_policy``    screening utility and threshold optimizers
* ``fairness``       parity constraints and constrained optimization
* ``mc_oracle``      agent-level Monte Carlo simulation
* ``experiment``     scenarios, sweeps, and CSV emitters
* ``cli``            the ``threshold-game`` command line front end
"""

__version__ = "0.1.0"
