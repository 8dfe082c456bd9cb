"""Q-routing simulation toolkit for flying ad-hoc networks."""
__version__ = "0.1.0"
