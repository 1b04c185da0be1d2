"""Financial Risk Meter toolkit: tail-risk networks, CoVaR and hierarchical portfolios."""

__version__ = "0.1.0"
