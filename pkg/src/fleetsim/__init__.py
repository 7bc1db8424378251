"""Multi-agent fleet communication toolkit and discrete-event simulator."""
__version__ = "0.1.0"
