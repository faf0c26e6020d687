# Licensed under GPL v3 (see https://www.gnu.org/licenses/).
"""
hyperbolic-diffusion-lab

Numerical laboratory for the hyperbolic-diffusion ("relativistic
Black-Scholes") model: telegraph-equation solver, Klein-Gordon operator
toolkit, persistent-random-walk oracle and limit-claim verification.
"""

__version__ = "0.1.0"
