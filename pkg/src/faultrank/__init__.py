"""faultrank: mine a project's history to rank static-analysis rules by fault-proneness."""

__version__ = "0.1.0"
