"""Adaptive distributed space-time coding over two amplify-and-forward relays.

Link-level Monte-Carlo simulation, high-SNR outage analysis and power
allocation search for a source, two relays and a destination running a
distributed Alamouti code.
"""

__version__ = "0.1.0"
