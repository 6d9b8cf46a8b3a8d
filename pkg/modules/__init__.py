"""
TOFFE - Core Modules

Event streams, camera simulation, spiking and analog networks, cascade
inference, evaluation, config management and logging.
"""

__version__ = "0.1.0"
