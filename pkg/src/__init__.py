"""mmpg - Incentive, leader and Nash equilibria of multi-player mean-payoff games."""

__version__ = "0.1.0"
