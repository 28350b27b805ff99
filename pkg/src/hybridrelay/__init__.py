"""Hybrid wireless-powered / ambient-backscatter relaying in alpha-Ginibre fields.

Modules: ``config`` (parameters), ``model`` (link physics), ``sampler`` (point patterns),
``fredholm`` (Laplace functionals and the law of the harvested power), ``analytics``
(success probability and capacity), ``simulator`` (Monte Carlo), ``optimizer`` (design
problems) and ``cli``.
"""
__version__ = "0.1.0"

from .config import SystemConfig, default_config, load_config  # noqa: E402,F401
